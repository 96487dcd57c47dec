//! Text word-vector files: `glove_text` (one `word v1 … vD` line per entry)
//! and `w2v_text` (the same preceded by a `count dim` header line).

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use iben_core::wordvec::WordVectorTable;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorFormat {
    GloveText,
    W2vText,
}

pub fn load_text_vectors(
    path: &Path,
    format: VectorFormat,
    name: &str,
    keep: Option<&BTreeSet<String>>,
) -> Result<WordVectorTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_text_vectors(file, format, name, &path.display().to_string(), keep)
}

/// Reads a table. With `keep`, only listed words are stored, but every line
/// is still checked for shape.
pub fn read_text_vectors<R: Read>(
    reader: R,
    format: VectorFormat,
    name: &str,
    source_name: &str,
    keep: Option<&BTreeSet<String>>,
) -> Result<WordVectorTable> {
    let err = |line: usize, message: String| Error::Format {
        source_name: source_name.into(),
        line,
        message,
    };
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut next_line = || -> Result<Option<(usize, String)>> {
        for (i, l) in lines.by_ref() {
            let l = l.map_err(|e| err(i + 1, e.to_string()))?;
            if !l.trim().is_empty() {
                return Ok(Some((i + 1, l)));
            }
        }
        Ok(None)
    };

    let mut declared = None;
    let mut dim = None;
    if format == VectorFormat::W2vText {
        let (ln, header) = next_line()?.ok_or_else(|| Error::file(source_name, "empty vector file"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[count, d]) if d > 0 => {
                declared = Some(count);
                dim = Some(d);
            }
            _ => return Err(err(ln, format!("expected a `count dim` header, got {header:?}"))),
        }
    }

    let mut table: Option<WordVectorTable> = None;
    let mut entries = 0usize;
    let mut buf = Vec::new();
    while let Some((ln, line)) = next_line()? {
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let values: Vec<&str> = parts.collect();
        let d = *dim.get_or_insert(values.len());
        if d == 0 {
            return Err(err(ln, "entry has no components".into()));
        }
        if values.len() != d {
            return Err(err(ln, format!("expected {d} components, got {}", values.len())));
        }
        entries += 1;
        if keep.is_some_and(|k| !k.contains(word)) {
            continue;
        }
        buf.clear();
        for v in &values {
            let x: f64 = v.parse().map_err(|_| err(ln, format!("bad number {v:?}")))?;
            if !x.is_finite() {
                return Err(err(ln, format!("non-finite value {v:?}")));
            }
            buf.push(x);
        }
        let t = match &mut table {
            Some(t) => t,
            None => table.insert(WordVectorTable::new(name, d)?),
        };
        t.insert(word, &buf)?;
    }
    if entries == 0 {
        return Err(Error::file(source_name, "vector file has no entries"));
    }
    if let Some(count) = declared {
        if count != entries {
            return Err(Error::file(
                source_name,
                format!("header declares {count} entries, file has {entries}"),
            ));
        }
    }
    match table {
        Some(t) => Ok(t),
        // every entry was filtered out; still a valid, empty table
        None => Ok(WordVectorTable::new(name, dim.unwrap_or(1))?),
    }
}
