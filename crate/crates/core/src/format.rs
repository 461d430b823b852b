//! Line-oriented file formats: tokenized corpora, tag files and triplet TSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::align::TokenSeq;
use crate::error::{Error, Result};
use crate::subword::FlatTagSeq;
use crate::synth::TripletRecord;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

/// UTF-8 lines split on LF; a CR before the LF is dropped.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Format {
        path: path.to_owned(),
        line: 0,
        reason: format!("not UTF-8: {e}"),
    })?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// One whitespace-tokenized sentence per line.
pub fn read_corpus(path: &Path) -> Result<Vec<TokenSeq>> {
    Ok(read_lines(path)?.iter().map(|l| TokenSeq::from_line(l)).collect())
}

/// Reads two files that must have the same number of lines.
pub fn read_aligned(a: &Path, b: &Path) -> Result<(Vec<TokenSeq>, Vec<TokenSeq>)> {
    let left = read_corpus(a)?;
    let right = read_corpus(b)?;
    if left.len() != right.len() {
        return Err(Error::Data(format!(
            "line count mismatch: {} has {} lines, {} has {}",
            a.display(),
            left.len(),
            b.display(),
            right.len()
        )));
    }
    Ok((left, right))
}

/// Parses one tag line: `2J+1` space-separated `OK`/`BAD` tokens.
pub fn parse_tag_line(line: &str) -> std::result::Result<FlatTagSeq, String> {
    line.parse::<FlatTagSeq>().map_err(|e| match e {
        Error::Data(msg) => msg,
        other => other.to_string(),
    })
}

pub fn read_tag_file(path: &Path) -> Result<Vec<FlatTagSeq>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            parse_tag_line(l).map_err(|reason| Error::Format {
                path: path.to_owned(),
                line: i + 1,
                reason,
            })
        })
        .collect()
}

/// Writes `lines` to `path`, or to standard output when `path` is `None`.
pub fn write_lines<I, S>(path: Option<&Path>, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: std::fmt::Display,
{
    match path {
        Some(p) => {
            let file = fs::File::create(p).map_err(io_err(p))?;
            let mut w = BufWriter::new(file);
            for l in lines {
                writeln!(w, "{l}").map_err(io_err(p))?;
            }
            w.flush().map_err(io_err(p))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            for l in lines {
                writeln!(w, "{l}")?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

/// `src<TAB>mt<TAB>pe`.
pub fn triplet_line(t: &TripletRecord) -> String {
    format!("{}\t{}\t{}", t.src, t.mt, t.pe)
}

pub fn read_triplets(path: &Path, origin: crate::synth::Origin) -> Result<Vec<TripletRecord>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::Format {
                    path: path.to_owned(),
                    line: i + 1,
                    reason: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            Ok(TripletRecord {
                src: TokenSeq::from_line(cols[0]),
                mt: TokenSeq::from_line(cols[1]),
                pe: TokenSeq::from_line(cols[2]),
                origin,
            })
        })
        .collect()
}
