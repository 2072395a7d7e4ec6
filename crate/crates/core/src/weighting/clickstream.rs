//! Clickstream-derived edge weights.
//!
//! Wikipedia clickstream dumps are 4-column TSV rows `prev curr type n`.
//! Only `link` rows count: they are transitions between two pages, the
//! implicit human feedback used to weight graph edges. Counts are raw; the
//! walker's per-source normalization turns them into transition
//! probabilities.

use std::collections::HashMap;
use std::io::{self, BufRead};

use percent_encoding::percent_decode_str;

use crate::graph::KnowledgeGraph;

use super::{EdgeWeightTable, WeightError, WeightStrategy};

/// Transition counts keyed by (source page title, target page title).
#[derive(Debug, Clone, Default)]
pub struct ClickstreamTable {
    counts: HashMap<(String, String), u64>,
}

impl ClickstreamTable {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, prev: &str, curr: &str) -> Option<u64> {
        self.counts.get(&(prev.to_owned(), curr.to_owned())).copied()
    }

    #[cfg(test)]
    pub(crate) fn from_pairs<I: IntoIterator<Item = ((String, String), u64)>>(pairs: I) -> Self {
        ClickstreamTable {
            counts: pairs.into_iter().collect(),
        }
    }
}

/// Row counters from one clickstream parse.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClickstreamReport {
    pub rows_kept: usize,
    /// Rows with a type other than `link` (external traffic, search, ...).
    pub rows_skipped_non_link: usize,
    pub rows_malformed: usize,
}

/// Parses a clickstream TSV stream (gzip detected by magic bytes).
///
/// Rows whose type is not `link` are dropped; counts from duplicate
/// (prev, curr) pairs are summed; malformed rows are skipped and counted.
pub fn parse_clickstream<R: BufRead + 'static>(
    reader: R,
) -> Result<(ClickstreamTable, ClickstreamReport), io::Error> {
    let reader = crate::io::maybe_gzip(reader)?;
    let mut table = ClickstreamTable::default();
    let mut report = ClickstreamReport::default();

    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (prev, curr, kind, n) = match (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) {
            (Some(prev), Some(curr), Some(kind), Some(n), None) => (prev, curr, kind, n),
            _ => {
                report.rows_malformed += 1;
                continue;
            }
        };
        let count: u64 = match n.parse() {
            Ok(c) if c > 0 => c,
            _ => {
                report.rows_malformed += 1;
                continue;
            }
        };
        if kind != "link" {
            report.rows_skipped_non_link += 1;
            continue;
        }
        *table
            .counts
            .entry((prev.to_owned(), curr.to_owned()))
            .or_insert(0) += count;
        report.rows_kept += 1;
    }

    Ok((table, report))
}

/// How graph entities map onto clickstream page titles.
#[derive(Debug, Clone)]
pub struct ClickstreamOptions {
    /// IRI prefix stripped to obtain the page title, e.g. the DBpedia
    /// resource namespace. Entities outside the prefix have no title.
    pub entity_prefix: String,
    /// Weight for graph edges absent from the clickstream (one virtual
    /// click by default). Zero is allowed; unobserved edges then become
    /// unwalkable.
    pub smoothing: f64,
    /// Percent-decode the stripped title before lookup.
    pub decode_titles: bool,
}

impl Default for ClickstreamOptions {
    fn default() -> Self {
        ClickstreamOptions {
            entity_prefix: "http://dbpedia.org/resource/".to_owned(),
            smoothing: 1.0,
            decode_titles: false,
        }
    }
}

/// Coverage totals reported alongside a clickstream weight table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClickstreamCoverage {
    /// Edges that found a transition count.
    pub matched_edges: usize,
    /// Edges that fell back to the smoothing weight.
    pub smoothed_edges: usize,
    /// Entities whose IRI does not start with the configured prefix.
    pub unmapped_entities: usize,
}

/// Builds edge weights from clickstream transition counts.
///
/// Edge (i, p, j) gets the count recorded for (title(i), title(j)), or the
/// smoothing weight when either title is unmapped or the pair is absent.
/// Clickstream data is page-to-page, so parallel edges between the same
/// entity pair share one weight.
pub fn clickstream_weights(
    graph: &KnowledgeGraph,
    table: &ClickstreamTable,
    options: &ClickstreamOptions,
) -> Result<(EdgeWeightTable, ClickstreamCoverage), WeightError> {
    if options.smoothing < 0.0 {
        return Err(WeightError::NegativeWeight(options.smoothing));
    }

    let titles: Vec<Option<String>> = graph
        .entity_ids()
        .map(|v| {
            let iri = graph.entity_iri(v).expect("entity ids are dense");
            let title = iri.strip_prefix(&options.entity_prefix)?;
            if options.decode_titles {
                Some(percent_decode_str(title).decode_utf8_lossy().into_owned())
            } else {
                Some(title.to_owned())
            }
        })
        .collect();

    let mut coverage = ClickstreamCoverage {
        unmapped_entities: titles.iter().filter(|t| t.is_none()).count(),
        ..Default::default()
    };

    let weights: Vec<Vec<f64>> = graph
        .adjacency()
        .iter()
        .enumerate()
        .map(|(source, edges)| {
            edges
                .iter()
                .map(|edge| {
                    let count = match (&titles[source], &titles[edge.target.index()]) {
                        (Some(prev), Some(curr)) => table.count(prev, curr),
                        _ => None,
                    };
                    match count {
                        Some(c) => {
                            coverage.matched_edges += 1;
                            c as f64
                        }
                        None => {
                            coverage.smoothed_edges += 1;
                            options.smoothing
                        }
                    }
                })
                .collect()
        })
        .collect();

    Ok((
        EdgeWeightTable::new(weights, WeightStrategy::Clickstream),
        coverage,
    ))
}
