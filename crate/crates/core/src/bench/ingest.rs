//! CSV input: one object per line, `id,x,y,kw1;kw2;...`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::domain::{Dataset, KeywordVocabulary, SpatioTextualObject};
use crate::error::{Result, StixError};
use crate::geometry::Point;

/// Parse a CSV file and min-max normalise coordinates into the unit square.
/// The vocabulary is built in file order.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    ingest_reader(File::open(path)?, path)
}

pub fn ingest_reader(reader: impl Read, path: &Path) -> Result<Dataset> {
    let mut vocab = KeywordVocabulary::new();
    let mut objects = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        let obj = parse_line(trimmed, &mut vocab).map_err(|message| parse_error(path, line_no, message))?;
        if !seen.insert(obj.id) {
            return Err(parse_error(path, line_no, format!("duplicate object id {}", obj.id)));
        }
        objects.push(obj);
    }
    Dataset::normalized(objects, vocab)
}

fn parse_error(path: &Path, line: usize, message: String) -> StixError {
    StixError::Parse {
        path: PathBuf::from(path),
        line,
        message,
    }
}

fn parse_line(line: &str, vocab: &mut KeywordVocabulary) -> std::result::Result<SpatioTextualObject, String> {
    let mut fields = line.splitn(4, ',');
    let mut next = |name: &str| fields.next().map(str::trim).ok_or_else(|| format!("missing {name} field"));
    let id: u64 = next("id")?.parse().map_err(|e| format!("bad id: {e}"))?;
    let coord = |s: &str, name: &str| -> std::result::Result<f64, String> {
        let v: f64 = s.parse().map_err(|e| format!("bad {name} coordinate {s:?}: {e}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite {name} coordinate {s:?}"))
        }
    };
    let x = coord(next("x")?, "x")?;
    let y = coord(next("y")?, "y")?;
    let keywords = next("keywords")?;
    let ids: Vec<u32> = keywords
        .split(';')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(|w| vocab.intern(w))
        .collect();
    Ok(SpatioTextualObject::new(id, Point::new(x, y), ids))
}

/// Write `data` in the ingest format, mapping locations back through the
/// dataset's normalisation when it has one.
pub fn write_csv(data: &Dataset, mut out: impl Write) -> Result<()> {
    let vocab = data.vocabulary();
    for o in data.objects() {
        let p = match data.normalization() {
            Some(n) => n.invert(&o.location),
            None => o.location,
        };
        let words: Vec<&str> = o.keywords().iter().filter_map(|&k| vocab.word(k)).collect();
        writeln!(out, "{},{},{},{}", o.id, p.x, p.y, words.join(";"))?;
    }
    Ok(())
}
