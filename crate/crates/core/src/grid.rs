//! Esri ASCII grid reading and writing.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Raster geometry. Row 0 is the northernmost row.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

impl Grid {
    pub fn new(ncols: usize, nrows: usize, xll: f64, yll: f64, cellsize: f64) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::Input("grid must have at least one row and column".into()));
        }
        if !(cellsize > 0.0 && cellsize.is_finite()) {
            return Err(Error::Input(format!("cellsize {cellsize} must be positive")));
        }
        Ok(Self {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata: -9999.0,
        })
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    pub fn row_col(&self, idx: usize) -> (usize, usize) {
        (idx / self.ncols, idx % self.ncols)
    }

    pub fn cell_area(&self) -> f64 {
        self.cellsize * self.cellsize
    }

    pub fn centre(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.yll + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize,
        ]
    }

    pub fn x_max(&self) -> f64 {
        self.xll + self.ncols as f64 * self.cellsize
    }

    pub fn y_max(&self) -> f64 {
        self.yll + self.nrows as f64 * self.cellsize
    }

    /// Inclusive row/column range of cells whose centres may fall inside the box.
    pub fn cells_in_bbox(&self, min: [f64; 2], max: [f64; 2]) -> Option<(usize, usize, usize, usize)> {
        let cs = self.cellsize;
        let c0 = ((min[0] - self.xll) / cs - 0.5).ceil().max(0.0);
        let c1 = ((max[0] - self.xll) / cs - 0.5).floor();
        let top = self.y_max();
        let r0 = ((top - max[1]) / cs - 0.5).ceil().max(0.0);
        let r1 = ((top - min[1]) / cs - 0.5).floor();
        if c1 < c0 || r1 < r0 || c0 >= self.ncols as f64 || r0 >= self.nrows as f64 {
            return None;
        }
        let c1 = c1.min(self.ncols as f64 - 1.0);
        let r1 = r1.min(self.nrows as f64 - 1.0);
        Some((r0 as usize, r1 as usize, c0 as usize, c1 as usize))
    }
}

/// A grid plus its cell values; `None` marks a nodata cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub grid: Grid,
    pub values: Vec<Option<f64>>,
}

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

pub fn parse_ascii_grid(text: &str) -> Result<Raster> {
    let mut lines = text.lines().enumerate();
    let mut header = [0.0f64; 6];
    for (k, key) in HEADER_KEYS.iter().enumerate() {
        let (lineno, line) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing header key {key}"),
            })?;
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap_or_default();
        if !name.eq_ignore_ascii_case(key) {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected header key {key}, found {name:?}"),
            });
        }
        let value = parts.next().ok_or_else(|| Error::Parse {
            line: lineno + 1,
            msg: format!("header key {key} has no value"),
        })?;
        header[k] = value.parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("non-numeric value {value:?} for {key}"),
        })?;
    }
    let as_count = |v: f64, key: &str| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Parse {
                line: 0,
                msg: format!("{key} must be a positive integer, got {v}"),
            })
        }
    };
    let mut grid = Grid::new(
        as_count(header[0], "ncols")?,
        as_count(header[1], "nrows")?,
        header[2],
        header[3],
        header[4],
    )
    .map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    grid.nodata = header[5];

    let expected = grid.len();
    let mut values = Vec::with_capacity(expected);
    let mut last_line = 0;
    for (lineno, line) in lines {
        last_line = lineno + 1;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("non-numeric cell value {tok:?}"),
            })?;
            if values.len() == expected {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("more than {expected} cell values"),
                });
            }
            values.push(if v == grid.nodata { None } else { Some(v) });
        }
    }
    if values.len() != expected {
        return Err(Error::Parse {
            line: last_line,
            msg: format!("expected {expected} cell values, found {}", values.len()),
        });
    }
    Ok(Raster { grid, values })
}

pub fn read_ascii_grid(path: &Path) -> Result<Raster> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ascii_grid(&text)
}

/// Formats a raster as an Esri ASCII grid. Finite values round-trip bit-for-bit.
pub fn format_ascii_grid(grid: &Grid, values: &[Option<f64>]) -> String {
    let mut out = String::with_capacity(values.len() * 8 + 128);
    let _ = writeln!(out, "ncols {}", grid.ncols);
    let _ = writeln!(out, "nrows {}", grid.nrows);
    let _ = writeln!(out, "xllcorner {}", grid.xll);
    let _ = writeln!(out, "yllcorner {}", grid.yll);
    let _ = writeln!(out, "cellsize {}", grid.cellsize);
    let _ = writeln!(out, "NODATA_value {}", grid.nodata);
    for row in values.chunks(grid.ncols) {
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", v.unwrap_or(grid.nodata));
        }
        out.push('\n');
    }
    out
}

pub fn write_ascii_grid(path: &Path, grid: &Grid, values: &[f64]) -> Result<()> {
    let vals: Vec<Option<f64>> = values.iter().map(|&v| Some(v)).collect();
    std::fs::write(path, format_ascii_grid(grid, &vals)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 5\nNODATA_value -9999\n";

    #[test]
    fn minimal_document() {
        let r = parse_ascii_grid("ncols 1\nnrows 1\nxllcorner 10\nyllcorner 20\ncellsize 2\nNODATA_value -9999\n5.0\n").unwrap();
        assert_eq!((r.grid.ncols, r.grid.nrows), (1, 1));
        assert_eq!(r.grid.xll, 10.0);
        assert_eq!(r.values, vec![Some(5.0)]);
    }

    #[test]
    fn nodata_cells_are_flagged() {
        let r = parse_ascii_grid(&format!("{HEADER}1 -9999\n3 4\n")).unwrap();
        assert_eq!(r.values, vec![Some(1.0), None, Some(3.0), Some(4.0)]);
    }

    #[test]
    fn rows_are_stored_north_first() {
        let r = parse_ascii_grid(&format!("{HEADER}1 2\n3 4\n")).unwrap();
        assert_eq!(r.values[r.grid.index(0, 0)], Some(1.0));
        assert_eq!(r.values[r.grid.index(1, 1)], Some(4.0));
        // Row 0 centres sit in the northern half.
        assert_eq!(r.grid.centre(0, 0), [2.5, 7.5]);
        assert_eq!(r.grid.centre(1, 1), [7.5, 2.5]);
        let text = format_ascii_grid(&r.grid, &r.values);
        assert_eq!(parse_ascii_grid(&text).unwrap(), r);
    }

    #[test]
    fn header_errors_carry_line_numbers() {
        let err = parse_ascii_grid("ncols 2\nxllcorner 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_ascii_grid("ncols 2\nnrows x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_ascii_grid("ncols 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn cell_count_and_token_errors() {
        let err = parse_ascii_grid(&format!("{HEADER}1 2\n3\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 8, .. }), "{err}");
        let err = parse_ascii_grid(&format!("{HEADER}1 2\n3 4 5\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 8, .. }));
        let err = parse_ascii_grid(&format!("{HEADER}1 2\n3 abc\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 8, .. }));
    }

    #[test]
    fn bbox_cell_range() {
        let g = Grid::new(4, 4, 0.0, 0.0, 5.0).unwrap();
        // Box covering centres (2.5..7.5, 12.5..17.5) -> rows 0..1, cols 0..1.
        assert_eq!(g.cells_in_bbox([0.0, 10.0], [10.0, 20.0]), Some((0, 1, 0, 1)));
        assert_eq!(g.cells_in_bbox([0.0, 0.0], [2.0, 2.0]), None);
        assert_eq!(g.cells_in_bbox([-100.0, -100.0], [100.0, 100.0]), Some((0, 3, 0, 3)));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            ncols in 1usize..6, nrows in 1usize..6,
            seed in proptest::collection::vec(-1e6f64..1e6, 36),
            xll in -1e5f64..1e5, cs in 0.1f64..50.0,
        ) {
            let grid = Grid::new(ncols, nrows, xll, -xll, cs).unwrap();
            let values: Vec<Option<f64>> = seed[..ncols * nrows].iter().map(|&v| Some(v)).collect();
            let back = parse_ascii_grid(&format_ascii_grid(&grid, &values)).unwrap();
            prop_assert_eq!(back.grid, grid);
            for (a, b) in back.values.iter().zip(&values) {
                prop_assert_eq!(a.unwrap().to_bits(), b.unwrap().to_bits());
            }
        }
    }
}
