//! P5 PGM storage for binary grids.
//!
//! FIMs are written as `P5\n<cols> <rows>\n255\n` followed by one byte per
//! cell, 0 = dry and 255 = inundated, no trailing bytes. The format is
//! human-inspectable in any image viewer and trivially bit-exact.

use std::fs;
use std::path::Path;

use super::BinaryGrid;
use crate::{Error, Result};

pub fn write_binary_grid(grid: &BinaryGrid, path: &Path) -> Result<()> {
    fs::write(path, to_pgm_bytes(grid))?;
    Ok(())
}

pub fn read_binary_grid(path: &Path) -> Result<BinaryGrid> {
    from_pgm_bytes(&fs::read(path)?)
}

/// Arbitrary grayscale P5 writer for rendered overlays (difference maps,
/// probability shades). Unlike FIM storage, any byte value is allowed.
pub fn write_gray_pgm(path: &Path, rows: usize, cols: usize, bytes: &[u8]) -> Result<()> {
    if rows * cols != bytes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{rows}x{cols} image needs {} bytes, got {}",
            rows * cols,
            bytes.len()
        )));
    }
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    fs::write(path, out)?;
    Ok(())
}

pub(crate) fn to_pgm_bytes(grid: &BinaryGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.cols(), grid.rows()).into_bytes();
    out.extend(grid.cells().iter().map(|&v| if v == 1 { 255u8 } else { 0u8 }));
    out
}

pub(crate) fn from_pgm_bytes(bytes: &[u8]) -> Result<BinaryGrid> {
    let (cols, rows, payload) = parse_header(bytes)?;
    let expected = rows * cols;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let mut cells = Vec::with_capacity(expected);
    for (index, &b) in payload[..expected].iter().enumerate() {
        cells.push(match b {
            0 => 0,
            255 => 1,
            value => return Err(Error::IllegalPixel { value, index }),
        });
    }
    BinaryGrid::new(rows, cols, cells)
}

/// Accepts any whitespace-separated P5 header with maxval 255 (what common
/// imaging tools emit), returning (cols, rows, payload). Our own writer
/// always produces the canonical single-`\n` form.
fn parse_header(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::MalformedHeader(format!(
            "magic {:?}, expected \"P5\"",
            String::from_utf8_lossy(&bytes[..bytes.len().min(2)])
        )));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("missing dimension field".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader("unparsable dimension field".into()))?;
    }
    let [cols, rows, maxval] = fields;
    if maxval != 255 {
        return Err(Error::MalformedHeader(format!(
            "maxval {maxval}, expected 255"
        )));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::MalformedHeader("missing payload separator".into()));
    }
    Ok((cols, rows, &bytes[pos + 1..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn roundtrip_all_ones() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ones.pgm");
        let g = BinaryGrid::new(3, 3, vec![1; 9]).unwrap();
        write_binary_grid(&g, &path).unwrap();
        assert_eq!(read_binary_grid(&path).unwrap(), g);
    }

    #[test]
    fn wrong_magic_is_malformed() {
        assert!(matches!(
            from_pgm_bytes(b"P2\n1 1\n255\n\x00"),
            Err(Error::MalformedHeader(_))
        ));
    }

    #[test]
    fn illegal_byte_is_rejected() {
        assert!(matches!(
            from_pgm_bytes(b"P5\n1 1\n255\n\x07"),
            Err(Error::IllegalPixel { value: 7, index: 0 })
        ));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        assert!(matches!(
            from_pgm_bytes(b"P5\n2 2\n255\n\x00\x00\x00"),
            Err(Error::TruncatedPayload {
                expected: 4,
                found: 3
            })
        ));
    }

    // Byte-count oracle: file length is the header string length plus one
    // payload byte per cell. For a 1x1 grid the canonical header
    // "P5\n1 1\n255\n" is 11 bytes, so the file is 12 bytes long.
    #[test]
    fn single_cell_file_length_matches_header_oracle() {
        let g = BinaryGrid::new(1, 1, vec![1]).unwrap();
        let bytes = to_pgm_bytes(&g);
        let oracle = format!("P5\n{} {}\n255\n", 1, 1).len() + 1;
        assert_eq!(bytes.len(), oracle);
        assert_eq!(bytes.len(), 12);
        assert_eq!(*bytes.last().unwrap(), 255);
    }

    #[test]
    fn zero_grid_payload_is_zero_bytes() {
        let g = BinaryGrid::zeros(2, 2);
        let bytes = to_pgm_bytes(&g);
        assert_eq!(&bytes[bytes.len() - 4..], &[0, 0, 0, 0]);
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        let g = BinaryGrid::from_fn(5, 7, |r, c| (r * c) % 3 == 1);
        write_binary_grid(&g, &a).unwrap();
        let again = read_binary_grid(&a).unwrap();
        write_binary_grid(&again, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn header_dimensions_are_cols_then_rows() {
        let g = BinaryGrid::zeros(2, 3);
        let bytes = to_pgm_bytes(&g);
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(from_pgm_bytes(&bytes).unwrap(), g);
    }
}
