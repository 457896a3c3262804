//! The `FLEP` binary field format.
//!
//! Layout (all little-endian): magic `FLEP`, `u32` version (= 1), `u32` d,
//! `u32` n, `f64` L, `f64` s (0 when not applicable), then `n^d` `f64`
//! samples in row-major order.

use std::io::{Read, Write};

use crate::error::{FlepError, Result};
use crate::grid::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"FLEP";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8;

/// A field together with the fractional order it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredField {
    pub field: Field,
    pub s: f64,
}

pub fn encode(field: &Field, s: f64) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&grid.length().to_le_bytes());
    out.extend_from_slice(&s.to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<StoredField> {
    if bytes.len() < HEADER_LEN {
        return Err(FlepError::Format("truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(FlepError::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(FlepError::Format(format!("unsupported version {version}")));
    }
    let grid = Grid::new(u32_at(8) as usize, u32_at(12) as usize, f64_at(16))
        .map_err(|e| FlepError::Format(e.to_string()))?;
    let s = f64_at(24);
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * grid.len() {
        return Err(FlepError::Format(format!(
            "expected {} samples, found {} bytes",
            grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(StoredField {
        field: Field::new(grid, values)?,
        s,
    })
}

pub fn write_field(mut w: impl Write, field: &Field, s: f64) -> Result<()> {
    w.write_all(&encode(field, s))?;
    Ok(())
}

pub fn read_field(mut r: impl Read) -> Result<StoredField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let g = Grid::new(1, 16, 2.5).unwrap();
        let f = Field::from_fn(g, |x| x[0]).unwrap();
        let b = encode(&f, 0.75);
        assert_eq!(&b[..4], b"FLEP");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &16u32.to_le_bytes());
        assert_eq!(&b[16..24], &2.5f64.to_le_bytes());
        assert_eq!(&b[24..32], &0.75f64.to_le_bytes());
        assert_eq!(&b[32..40], &(-1.25f64).to_le_bytes());
        assert_eq!(b.len(), 32 + 16 * 8);
    }

    #[test]
    fn rejects_malformed_input() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = Field::zeros(g);
        let mut b = encode(&f, 0.0);
        assert!(decode(&b[..20]).is_err());
        assert!(decode(&b[..b.len() - 8]).is_err());
        b[0] = b'X';
        assert!(decode(&b).is_err());
        let mut b = encode(&f, 0.0);
        b[4] = 2;
        assert!(decode(&b).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(values in proptest::collection::vec(-1e6f64..1e6, 256), s in 0.0f64..1.0, l in 0.1f64..100.0) {
            let g = Grid::new(2, 16, l).unwrap();
            let f = Field::new(g, values).unwrap();
            let back = decode(&encode(&f, s)).unwrap();
            prop_assert_eq!(back.field, f);
            prop_assert_eq!(back.s, s);
        }
    }
}
