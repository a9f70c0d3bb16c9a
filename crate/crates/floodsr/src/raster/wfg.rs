//! WFG1 storage for fraction and elevation grids.
//!
//! Layout: the ASCII line `WFG1 <rows> <cols>\n` (single spaces), then
//! rows·cols IEEE-754 binary32 little-endian values, row-major, no padding,
//! no trailer. A purpose-built binary format avoids the precision loss a
//! text serialization of fractions would introduce; roundtrips are bit-exact
//! on the 32-bit payload.

use std::fs;
use std::path::Path;

use super::FractionGrid;
use crate::scalar::Scalar;
use crate::{Error, Result};

pub fn write_fraction_grid<T: Scalar>(grid: &FractionGrid<T>, path: &Path) -> Result<()> {
    fs::write(path, to_wfg_bytes(grid)?)?;
    Ok(())
}

pub fn read_fraction_grid<T: Scalar>(path: &Path) -> Result<FractionGrid<T>> {
    from_wfg_bytes(&fs::read(path)?)
}

pub(crate) fn to_wfg_bytes<T: Scalar>(grid: &FractionGrid<T>) -> Result<Vec<u8>> {
    let mut out = format!("WFG1 {} {}\n", grid.rows(), grid.cols()).into_bytes();
    out.reserve(grid.cells().len() * 4);
    for (index, v) in grid.cells().iter().enumerate() {
        let v32 = v.as_f64() as f32;
        if !v32.is_finite() {
            // A finite f64 can still overflow the stored width.
            return Err(Error::NonFiniteValue(index));
        }
        out.extend_from_slice(&v32.to_le_bytes());
    }
    Ok(out)
}

pub(crate) fn from_wfg_bytes<T: Scalar>(bytes: &[u8]) -> Result<FractionGrid<T>> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedHeader("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 3 || fields[0] != "WFG1" {
        return Err(Error::MalformedHeader(format!(
            "expected \"WFG1 <rows> <cols>\", got {header:?}"
        )));
    }
    let rows: usize = fields[1]
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad row count {:?}", fields[1])))?;
    let cols: usize = fields[2]
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("bad col count {:?}", fields[2])))?;

    let payload = &bytes[newline + 1..];
    let expected = rows * cols * 4;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let mut cells = Vec::with_capacity(rows * cols);
    for (index, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFiniteValue(index));
        }
        cells.push(T::from_f64(v as f64));
    }
    FractionGrid::new(rows, cols, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn roundtrip_is_bit_exact_on_f32_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("g.wfg");
        let g = FractionGrid::new(1, 3, vec![0.0f64, 0.37, 1.0]).unwrap();
        write_fraction_grid(&g, &path).unwrap();
        let back: FractionGrid<f64> = read_fraction_grid(&path).unwrap();
        for (a, b) in g.cells().iter().zip(back.cells()) {
            // Equality at storage width: the file holds binary32.
            assert_eq!(*a as f32, *b as f32);
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }
        // A second write of the read-back grid reproduces the same bytes.
        let path2 = dir.path().join("g2.wfg");
        write_fraction_grid(&back, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut bytes = b"WFG1 2 2\n".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&0.25f32.to_le_bytes());
        assert!(matches!(
            from_wfg_bytes::<f64>(&bytes),
            Err(Error::TruncatedPayload {
                expected: 16,
                found: 12
            })
        ));
    }

    #[test]
    fn nan_payload_is_rejected() {
        let mut bytes = b"WFG1 1 2\n".to_vec();
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            from_wfg_bytes::<f64>(&bytes),
            Err(Error::NonFiniteValue(1))
        ));
    }

    #[test]
    fn header_must_use_single_spaces() {
        assert!(matches!(
            from_wfg_bytes::<f64>(b"WFG1  1 1\nxxxx"),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            from_wfg_bytes::<f64>(b"WFG2 1 1\nxxxx"),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn header_is_rows_then_cols() {
        let g = FractionGrid::from_fn(2, 3, |r, c| (r * 3 + c) as f64 * 0.125);
        let bytes = to_wfg_bytes(&g).unwrap();
        assert!(bytes.starts_with(b"WFG1 2 3\n"));
        assert_eq!(bytes.len(), 9 + 6 * 4);
        let back = from_wfg_bytes::<f64>(&bytes).unwrap();
        assert_eq!(back.cells(), g.cells());
    }

    #[test]
    fn f32_reads_widen_exactly_to_f64() {
        let vals = vec![0.1f32, 0.37, 0.85];
        let mut bytes = b"WFG1 1 3\n".to_vec();
        for v in &vals {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let g = from_wfg_bytes::<f64>(&bytes).unwrap();
        for (a, b) in vals.iter().zip(g.cells()) {
            assert_eq!(*a as f64, *b);
        }
    }
}
