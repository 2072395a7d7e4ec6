//! RDF graph store: N-Triples parsing, IRI interning, and outgoing
//! adjacency lists.
//!
//! Only vertex-to-vertex structure is kept: triples whose object is a
//! literal are dropped at parse time, since walks traverse entities and
//! predicates only. Blank nodes are interned like IRIs, keeping their
//! `_:` prefix. IRIs are compared by exact bytes, no normalization.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

/// Dense identifier of an interned entity (subject/object IRI or blank node).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(u32);

/// Dense identifier of an interned predicate IRI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredicateId(u32);

impl EntityId {
    pub fn new(raw: u32) -> Self {
        EntityId(raw)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl PredicateId {
    pub fn new(raw: u32) -> Self {
        PredicateId(raw)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One directed edge occurrence. Parallel edges between the same pair of
/// entities stay distinct entries so each occurrence has its own weight slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub predicate: PredicateId,
    pub target: EntityId,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown entity id {0}")]
    InvalidEntityId(u32),
    #[error("unknown predicate id {0}")]
    InvalidPredicateId(u32),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// String interner handing out dense ids in first-seen order.
#[derive(Debug, Default, Clone)]
struct Interner {
    strings: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.index.get(s) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_owned());
        self.index.insert(s.to_owned(), id);
        id
    }

    fn get(&self, s: &str) -> Option<u32> {
        self.index.get(s).copied()
    }

    fn resolve(&self, id: u32) -> Option<&str> {
        self.strings.get(id as usize).map(String::as_str)
    }

    fn len(&self) -> usize {
        self.strings.len()
    }
}

/// Immutable knowledge graph with interned vertices and per-vertex outgoing
/// adjacency lists in insertion order. Safe for concurrent reads.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Interner,
    predicates: Interner,
    adjacency: Vec<Vec<Edge>>,
    edge_count: usize,
}

impl KnowledgeGraph {
    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn predicate_count(&self) -> usize {
        self.predicates.len()
    }

    /// Total number of directed edge occurrences, parallel edges included.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entity_count() as u32).map(EntityId)
    }

    /// Outgoing adjacency list of `v` in insertion order, possibly empty.
    pub fn out_edges(&self, v: EntityId) -> Result<&[Edge], GraphError> {
        self.adjacency
            .get(v.index())
            .map(Vec::as_slice)
            .ok_or(GraphError::InvalidEntityId(v.0))
    }

    pub(crate) fn adjacency(&self) -> &[Vec<Edge>] {
        &self.adjacency
    }

    pub fn resolve(&self, iri: &str) -> Option<EntityId> {
        self.entities.get(iri).map(EntityId)
    }

    pub fn resolve_predicate(&self, iri: &str) -> Option<PredicateId> {
        self.predicates.get(iri).map(PredicateId)
    }

    pub fn entity_iri(&self, id: EntityId) -> Result<&str, GraphError> {
        self.entities
            .resolve(id.0)
            .ok_or(GraphError::InvalidEntityId(id.0))
    }

    pub fn predicate_iri(&self, id: PredicateId) -> Result<&str, GraphError> {
        self.predicates
            .resolve(id.0)
            .ok_or(GraphError::InvalidPredicateId(id.0))
    }
}

/// Parser behaviour switches.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Abort on the first malformed line instead of recording and continuing.
    pub strict: bool,
}

/// Outcome counters and per-line errors from one parse run.
#[derive(Debug, Clone, Default)]
pub struct ParseReport {
    /// Malformed lines as (line number, message), 1-based.
    pub errors: Vec<(u64, String)>,
    /// Graph edges added (after literal filtering and de-duplication).
    pub edges_added: usize,
    /// Triples dropped because their object is a literal.
    pub literals_skipped: usize,
    /// Exact duplicates of an earlier triple.
    pub duplicates_skipped: usize,
}

impl ParseReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    /// Writes the error report as `LINE<tab>MESSAGE` lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (line, message) in &self.errors {
            writeln!(w, "{line}\t{message}")?;
        }
        Ok(())
    }
}

#[derive(Debug, PartialEq)]
enum Term<'a> {
    Iri(&'a str),
    Blank(&'a str),
    Literal,
}

/// Parses one N-Triples line. `Ok(None)` for blank/comment lines.
fn parse_line(line: &str) -> Result<Option<(Term<'_>, &str, Term<'_>)>, String> {
    let mut rest = line.trim_start();
    if rest.is_empty() || rest.starts_with('#') {
        return Ok(None);
    }

    let subject = scan_term(&mut rest, "subject")?;
    if matches!(subject, Term::Literal) {
        return Err("subject must be an IRI or blank node".into());
    }

    let predicate = match scan_term(&mut rest, "predicate")? {
        Term::Iri(iri) => iri,
        _ => return Err("predicate must be an IRI".into()),
    };

    let object = scan_term(&mut rest, "object")?;

    rest = rest.trim_start();
    match rest.strip_prefix('.') {
        Some(tail) => {
            let tail = tail.trim_start();
            if !tail.is_empty() && !tail.starts_with('#') {
                return Err(format!("unexpected content after '.': {tail:?}"));
            }
        }
        None => return Err("missing terminating '.'".into()),
    }

    Ok(Some((subject, predicate, object)))
}

fn scan_term<'a>(rest: &mut &'a str, position: &str) -> Result<Term<'a>, String> {
    *rest = rest.trim_start();
    let s = *rest;
    if let Some(body) = s.strip_prefix('<') {
        let end = body
            .find('>')
            .ok_or_else(|| format!("unterminated IRI in {position}"))?;
        *rest = &body[end + 1..];
        return Ok(Term::Iri(&body[..end]));
    }
    if s.starts_with("_:") {
        let end = s
            .find(|c: char| c.is_whitespace())
            .unwrap_or_else(|| s.len());
        let label = &s[..end];
        if label.len() == 2 {
            return Err(format!("empty blank node label in {position}"));
        }
        *rest = &s[end..];
        return Ok(Term::Blank(label));
    }
    if let Some(body) = s.strip_prefix('"') {
        let mut escaped = false;
        let mut close = None;
        for (i, c) in body.char_indices() {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                close = Some(i);
                break;
            }
        }
        let close = close.ok_or_else(|| format!("unterminated literal in {position}"))?;
        let mut tail = &body[close + 1..];
        // Consume a language tag or datatype suffix; neither is validated.
        if let Some(lang) = tail.strip_prefix('@') {
            let end = lang
                .find(|c: char| c.is_whitespace() || c == '.')
                .unwrap_or_else(|| lang.len());
            tail = &lang[end..];
        } else if let Some(dt) = tail.strip_prefix("^^") {
            let body = dt
                .strip_prefix('<')
                .ok_or_else(|| format!("malformed datatype IRI in {position}"))?;
            let end = body
                .find('>')
                .ok_or_else(|| format!("unterminated datatype IRI in {position}"))?;
            tail = &body[end + 1..];
        }
        *rest = tail;
        return Ok(Term::Literal);
    }
    Err(format!("expected IRI, blank node, or literal in {position}"))
}

/// Parses an N-Triples stream (gzip detected by magic bytes) into a graph.
///
/// Every syntactically valid triple whose object is an IRI or blank node
/// becomes one directed edge; literal-object triples are skipped without
/// interning anything. Exact duplicate triples are de-duplicated. Malformed
/// lines go into the report unless `strict`, which aborts on the first one.
pub fn parse_ntriples<R: BufRead + 'static>(
    reader: R,
    options: &ParseOptions,
) -> Result<(KnowledgeGraph, ParseReport), GraphError> {
    let reader = crate::io::maybe_gzip(reader)?;

    let mut entities = Interner::default();
    let mut predicates = Interner::default();
    let mut adjacency: Vec<Vec<Edge>> = Vec::new();
    let mut seen: HashSet<(u32, u32, u32)> = HashSet::new();
    let mut report = ParseReport::default();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        let parsed = match parse_line(&line) {
            Ok(Some(triple)) => triple,
            Ok(None) => continue,
            Err(message) => {
                if options.strict {
                    return Err(GraphError::Malformed {
                        line: line_no,
                        message,
                    });
                }
                report.errors.push((line_no, message));
                continue;
            }
        };

        let (subject, predicate, object) = parsed;
        let object = match object {
            Term::Iri(iri) => iri,
            Term::Blank(label) => label,
            Term::Literal => {
                report.literals_skipped += 1;
                continue;
            }
        };
        let subject = match subject {
            Term::Iri(iri) => iri,
            Term::Blank(label) => label,
            Term::Literal => unreachable!("rejected by parse_line"),
        };

        let s = entities.intern(subject);
        let o = entities.intern(object);
        let p = predicates.intern(predicate);
        if !seen.insert((s, p, o)) {
            report.duplicates_skipped += 1;
            continue;
        }
        if adjacency.len() < entities.len() {
            adjacency.resize_with(entities.len(), Vec::new);
        }
        adjacency[s as usize].push(Edge {
            predicate: PredicateId(p),
            target: EntityId(o),
        });
        report.edges_added += 1;
    }

    adjacency.resize_with(entities.len(), Vec::new);
    let edge_count = report.edges_added;
    Ok((
        KnowledgeGraph {
            entities,
            predicates,
            adjacency,
            edge_count,
        },
        report,
    ))
}
