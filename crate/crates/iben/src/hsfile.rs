//! Hidden-state container.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic "IBENHS1\0" | record_count
//! per record: id_len | id (UTF-8) | n_layers | seq_len | hidden | f32 values
//! ```
//!
//! Values are stored `[layer][token][dim]` as little-endian `f32`. Every record
//! in a file shares `n_layers` and `hidden`.

use std::io::Write;
use std::path::Path;

use iben_core::bertfuse::LayerStack;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"IBENHS1\0";

pub fn write_hs<W: Write>(mut w: W, stacks: &[LayerStack]) -> Result<()> {
    let bytes = encode(stacks)?;
    w.write_all(&bytes).map_err(|e| Error::io("<hs writer>", e))
}

pub fn write_hs_file(path: &Path, stacks: &[LayerStack]) -> Result<()> {
    let bytes = encode(stacks)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_hs_file(path: &Path) -> Result<Vec<LayerStack>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, &path.display().to_string())
}

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Check(format!("{what} {n} does not fit the container")))
}

pub fn encode(stacks: &[LayerStack]) -> Result<Vec<u8>> {
    if let Some(first) = stacks.first() {
        if let Some(s) = stacks
            .iter()
            .find(|s| s.n_layers() != first.n_layers() || s.hidden() != first.hidden())
        {
            return Err(Error::Check(format!(
                "record {:?} is {}x?x{}, file uses {}x?x{}",
                s.id,
                s.n_layers(),
                s.hidden(),
                first.n_layers(),
                first.hidden()
            )));
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&u32_of(stacks.len(), "record count")?.to_le_bytes());
    for s in stacks {
        out.extend_from_slice(&u32_of(s.id.len(), "id length")?.to_le_bytes());
        out.extend_from_slice(s.id.as_bytes());
        for d in [s.n_layers(), s.seq_len(), s.hidden()] {
            out.extend_from_slice(&u32_of(d, "dimension")?.to_le_bytes());
        }
        for &v in s.data() {
            let f = v as f32;
            if !f.is_finite() {
                return Err(Error::Check(format!("record {:?}: value {v} overflows f32", s.id)));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated(self.name.into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn decode(bytes: &[u8], name: &str) -> Result<Vec<LayerStack>> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic(name.into()));
    }
    let mut c = Cursor {
        bytes,
        pos: MAGIC.len(),
        name,
    };
    let count = c.u32()?;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    let mut shape: Option<(usize, usize)> = None;
    for i in 0..count {
        let id_len = c.u32()?;
        let id = std::str::from_utf8(c.take(id_len)?)
            .map_err(|_| Error::file(name, format!("record {i}: id is not UTF-8")))?
            .to_string();
        let (n_layers, seq_len, hidden) = (c.u32()?, c.u32()?, c.u32()?);
        let n_bytes = n_layers
            .checked_mul(seq_len)
            .and_then(|v| v.checked_mul(hidden))
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::DimensionOverflow(name.into()))?;
        match shape {
            None => shape = Some((n_layers, hidden)),
            Some(s) if s != (n_layers, hidden) => {
                return Err(Error::file(
                    name,
                    format!("record {id:?} is {n_layers}x?x{hidden}, file uses {}x?x{}", s.0, s.1),
                ))
            }
            _ => {}
        }
        let data = c
            .take(n_bytes)?
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        let stack = LayerStack::new(id.clone(), n_layers, seq_len, hidden, data)
            .map_err(|e| Error::file(name, format!("record {id:?}: {e}")))?;
        out.push(stack);
    }
    if c.pos != bytes.len() {
        return Err(Error::file(name, format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack(id: &str, seq: usize) -> LayerStack {
        let data = (0..2 * seq * 3).map(|i| f64::from(i as f32 * 0.25 - 1.0)).collect();
        LayerStack::new(id, 2, seq, 3, data).unwrap()
    }

    #[test]
    fn round_trip() {
        let stacks = vec![stack("a", 1), stack("bb", 4), stack("", 2)];
        assert_eq!(decode(&encode(&stacks).unwrap(), "t").unwrap(), stacks);
    }

    #[test]
    fn empty_list_is_valid() {
        let bytes = encode(&[]).unwrap();
        assert_eq!(bytes.len(), 12);
        assert!(decode(&bytes, "t").unwrap().is_empty());
    }

    #[test]
    fn distinct_errors() {
        let mut bytes = encode(&[stack("a", 2)]).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 1], "t"), Err(Error::Truncated(_))));
        let mut big = bytes.clone();
        // n_layers field of record 0
        big[8 + 4 + 4 + 1..8 + 4 + 4 + 1 + 4].copy_from_slice(&u32::MAX.to_le_bytes());
        big[8 + 4 + 4 + 1 + 4..8 + 4 + 4 + 1 + 8].copy_from_slice(&u32::MAX.to_le_bytes());
        big[8 + 4 + 4 + 1 + 8..8 + 4 + 4 + 1 + 12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode(&big, "t"), Err(Error::DimensionOverflow(_))));
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes, "t"), Err(Error::BadMagic(_))));
        assert!(matches!(decode(b"IBEN", "t"), Err(Error::BadMagic(_))));
    }

    #[test]
    fn mixed_shapes_are_rejected() {
        let other = LayerStack::new("x", 4, 1, 3, vec![0.0; 12]).unwrap();
        assert!(encode(&[stack("a", 1), other]).is_err());
    }
}
