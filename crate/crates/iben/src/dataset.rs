//! Dataset CSV: header `id,original,edit,grades,meanGrade`, grades as a digit
//! string, quoted fields allowed.

use std::io::Read;
use std::path::Path;

use iben_core::corpus::{parse_grades, HeadlineRecord};

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 5] = ["id", "original", "edit", "grades", "meanGrade"];

pub fn parse_dataset(path: &Path) -> Result<Vec<HeadlineRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_reader(file, &path.display().to_string())
}

/// Parses from any reader; `name` labels errors. Errors carry the 1-based
/// line number of the offending row (the header is line 1).
pub fn parse_dataset_reader<R: Read>(reader: R, name: &str) -> Result<Vec<HeadlineRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Err(Error::file(name, "empty file (no header)")),
        Some(h) => h.map_err(|e| csv_error(name, 1, e))?,
    };
    let found: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}').trim()).collect();
    if found != COLUMNS {
        return Err(Error::Format {
            source_name: name.into(),
            line: 1,
            message: format!("header must be {}, got {}", COLUMNS.join(","), found.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| csv_error(name, line, e))?;
        let bad = |message: String| Error::Format {
            source_name: name.into(),
            line,
            message,
        };
        if row.len() != COLUMNS.len() {
            return Err(bad(format!("expected {} columns, got {}", COLUMNS.len(), row.len())));
        }
        let grades = parse_grades(row[3].trim()).map_err(|e| bad(e.to_string()))?;
        let mean: f64 = row[4]
            .trim()
            .parse()
            .map_err(|_| bad(format!("meanGrade {:?} is not a number", &row[4])))?;
        let rec = HeadlineRecord::new(row[0].trim(), &row[1], row[2].trim(), grades, mean)
            .map_err(|e| bad(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

fn csv_error(name: &str, line: usize, e: csv::Error) -> Error {
    Error::Format {
        source_name: name.into(),
        line,
        message: e.to_string(),
    }
}
