//! Transparent gzip handling for text inputs.

use std::io::{self, BufRead, BufReader};

use flate2::bufread::MultiGzDecoder;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Wraps a buffered reader, decompressing on the fly when the stream starts
/// with the gzip magic bytes. Streams shorter than two bytes pass through.
pub(crate) fn maybe_gzip<R: BufRead + 'static>(mut reader: R) -> io::Result<Box<dyn BufRead>> {
    let head = reader.fill_buf()?;
    if head.len() >= 2 && head[..2] == GZIP_MAGIC {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}

/// Reads the whole stream as UTF-8 text, decompressing gzip input.
#[cfg(test)]
pub(crate) fn read_text<R: BufRead + 'static>(reader: R) -> io::Result<String> {
    use std::io::Read;
    let mut out = String::new();
    maybe_gzip(reader)?.read_to_string(&mut out)?;
    Ok(out)
}
