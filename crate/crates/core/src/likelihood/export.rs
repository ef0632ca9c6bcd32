//! Grid dumps: CSV (`x_m,y_m,value`) and a flat little-endian binary.
//!
//! Binary layout: a 32-byte header followed by `nx * ny` row-major `f64`
//! values (`cell = iy * nx + ix`).
//!
//! | offset | type      | content                                   |
//! |--------|-----------|-------------------------------------------|
//! | 0      | `[u8; 8]` | magic `MLGRID01`                          |
//! | 8      | `u32`     | `nx`                                      |
//! | 12     | `u32`     | `ny`                                      |
//! | 16     | `u32`     | path index, `0xFFFF_FFFF` for the sum     |
//! | 20     | `u32`     | reserved, zero                            |
//! | 24     | `f64`     | cell size, metres                         |

use std::io::{Read, Write};

use super::{Grid, LikelihoodError};

pub const MAGIC: &[u8; 8] = b"MLGRID01";
pub const COMBINED_PATH_ID: u32 = u32::MAX;
pub const HEADER_LEN: usize = 32;

fn io_err(context: &str) -> impl FnOnce(std::io::Error) -> LikelihoodError + '_ {
    move |source| LikelihoodError::Io {
        context: context.to_string(),
        source,
    }
}

pub fn write_csv<W: Write>(out: &mut W, grid: &Grid, values: &[f64]) -> Result<(), LikelihoodError> {
    assert_eq!(values.len(), grid.cell_count());
    let err = io_err("writing grid CSV");
    let mut buf = String::with_capacity(32 * values.len() + 16);
    buf.push_str("x_m,y_m,value\n");
    for (c, v) in values.iter().enumerate() {
        let p = grid.center(c);
        buf.push_str(&format!("{},{},{}\n", p.x, p.y, v));
    }
    out.write_all(buf.as_bytes()).map_err(err)
}

/// `path = None` writes the combined-field marker.
pub fn write_binary<W: Write>(
    out: &mut W,
    grid: &Grid,
    path: Option<u32>,
    values: &[f64],
) -> Result<(), LikelihoodError> {
    assert_eq!(values.len(), grid.cell_count());
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(grid.nx() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.ny() as u32).to_le_bytes());
    buf.extend_from_slice(&path.unwrap_or(COMBINED_PATH_ID).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&grid.cell_size().to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(io_err("writing grid binary"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub nx: u32,
    pub ny: u32,
    pub path: Option<u32>,
    pub cell_size: f64,
    pub values: Vec<f64>,
}

pub fn read_binary<R: Read>(input: &mut R) -> Result<GridDump, LikelihoodError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err("reading grid binary"))?;
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(LikelihoodError::Format("missing MLGRID01 header".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let nx = u32_at(8);
    let ny = u32_at(12);
    let path = u32_at(16);
    let cell_size = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let n = nx as usize * ny as usize;
    if bytes.len() != HEADER_LEN + 8 * n {
        return Err(LikelihoodError::Format(format!(
            "expected {} bytes for a {nx}x{ny} grid, found {}",
            HEADER_LEN + 8 * n,
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GridDump {
        nx,
        ny,
        path: (path != COMBINED_PATH_ID).then_some(path),
        cell_size,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;

    fn grid() -> Grid {
        Grid::new(Region::new(0.0, 300.0, 0.0, 200.0).unwrap(), 100.0).unwrap()
    }

    #[test]
    fn binary_layout_is_exact() {
        let values = [0.0, 1.5, -2.0, 3.25, 1e-300, f64::MAX];
        let mut buf = Vec::new();
        write_binary(&mut buf, &grid(), Some(7), &values).unwrap();
        assert_eq!(buf.len(), 32 + 48);
        assert_eq!(&buf[..8], b"MLGRID01");
        assert_eq!(&buf[8..12], &[3, 0, 0, 0]);
        assert_eq!(&buf[12..16], &[2, 0, 0, 0]);
        assert_eq!(&buf[16..20], &[7, 0, 0, 0]);
        assert_eq!(&buf[20..24], &[0, 0, 0, 0]);
        assert_eq!(&buf[24..32], &100.0f64.to_le_bytes());
        assert_eq!(&buf[40..48], &1.5f64.to_le_bytes());
        let back = read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, values);
        assert_eq!(back.path, Some(7));
    }

    #[test]
    fn combined_marker_round_trips() {
        let mut buf = Vec::new();
        write_binary(&mut buf, &grid(), None, &[0.0; 6]).unwrap();
        assert_eq!(&buf[16..20], &[0xFF; 4]);
        assert_eq!(read_binary(&mut buf.as_slice()).unwrap().path, None);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut buf = Vec::new();
        write_binary(&mut buf, &grid(), None, &[0.0; 6]).unwrap();
        buf.pop();
        assert!(read_binary(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn csv_lists_cell_centres() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &grid(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x_m,y_m,value");
        assert_eq!(lines[1], "50,50,1");
        assert_eq!(lines[6], "250,150,6");
    }
}
