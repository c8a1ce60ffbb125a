//! Color-naming features: an 11-way probability over linguistic color names
//! looked up per pixel from a 32³ RGB table and averaged per cell.

use std::fs;
use std::path::Path;

use super::{FeatureMap, Image};
use crate::error::{Error, Result};
use crate::spectral::RealPlane;

pub const COLOR_NAMES: usize = 11;
pub const TABLE_ROWS: usize = 32 * 32 * 32;

const ROW_SUM_TOL: f64 = 1e-3;

/// Immutable RGB → color-name probability table.
///
/// Row index is `r/8 + 32·(g/8) + 1024·(b/8)`.
#[derive(Clone, Debug)]
pub struct ColorNamingTable {
    rows: Vec<[f64; COLOR_NAMES]>,
}

impl ColorNamingTable {
    pub fn from_rows(rows: Vec<[f64; COLOR_NAMES]>) -> Result<Self> {
        if rows.len() != TABLE_ROWS {
            return Err(Error::ColorTable(format!(
                "expected {} rows, got {}",
                TABLE_ROWS,
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            validate_row(i, row)?;
        }
        Ok(ColorNamingTable { rows })
    }

    /// Parses the text format: one row per line, 11 whitespace-separated
    /// probabilities. Lines with 14 columns (RGB coordinates followed by the
    /// probabilities, as in the commonly distributed `w2c.txt`) are accepted
    /// and the leading three columns ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::with_capacity(TABLE_ROWS);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::ColorTable(format!("line {}: {}", lineno + 1, e)))?;
            let probs = match fields.len() {
                COLOR_NAMES => &fields[..],
                14 => &fields[3..],
                n => {
                    return Err(Error::ColorTable(format!(
                        "line {}: expected {} columns, got {}",
                        lineno + 1,
                        COLOR_NAMES,
                        n
                    )))
                }
            };
            let mut row = [0.0; COLOR_NAMES];
            row.copy_from_slice(probs);
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::ColorTable(m) => Error::Parse {
                path: path.to_path_buf(),
                message: m,
            },
            other => other,
        })
    }

    /// Writes the 11-column text format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(TABLE_ROWS * COLOR_NAMES * 9);
        for row in &self.rows {
            let cols: Vec<String> = row.iter().map(|v| format!("{:.6}", v)).collect();
            out.push_str(&cols.join(" "));
            out.push('\n');
        }
        out
    }

    #[inline]
    pub fn index(r: u8, g: u8, b: u8) -> usize {
        (r as usize >> 3) + 32 * (g as usize >> 3) + 1024 * (b as usize >> 3)
    }

    #[inline]
    pub fn lookup(&self, r: u8, g: u8, b: u8) -> &[f64; COLOR_NAMES] {
        &self.rows[Self::index(r, g, b)]
    }

    pub fn rows(&self) -> &[[f64; COLOR_NAMES]] {
        &self.rows
    }
}

fn validate_row(i: usize, row: &[f64; COLOR_NAMES]) -> Result<()> {
    if row.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(Error::ColorTable(format!(
            "row {} has entries outside [0, 1]",
            i
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::ColorTable(format!(
            "row {} sums to {} instead of 1",
            i, sum
        )));
    }
    Ok(())
}

/// 11 color-name channels on the same `⌊w/cell⌋ × ⌊h/cell⌋` grid as fHoG.
pub fn extract_color_naming(
    patch: &Image,
    table: &ColorNamingTable,
    cell: usize,
) -> Result<FeatureMap> {
    if !patch.is_color() {
        return Err(Error::GrayscaleColorFeatures);
    }
    if cell == 0 {
        return Err(Error::param("cell size must be positive"));
    }
    let (cw, ch) = (patch.width() / cell, patch.height() / cell);
    if cw == 0 || ch == 0 {
        return Err(Error::dim(format!(
            "{}x{} patch smaller than one {} px cell",
            patch.width(),
            patch.height(),
            cell
        )));
    }
    let mut acc = vec![vec![0.0; cw * ch]; COLOR_NAMES];
    for y in 0..ch * cell {
        let cy = y / cell;
        for x in 0..cw * cell {
            let px = patch.pixel(x, y);
            let row = table.lookup(px[0], px[1], px[2]);
            let i = cy * cw + x / cell;
            for (k, p) in row.iter().enumerate() {
                acc[k][i] += p;
            }
        }
    }
    let inv = 1.0 / (cell * cell) as f64;
    let planes = acc
        .into_iter()
        .map(|mut v| {
            v.iter_mut().for_each(|a| *a *= inv);
            RealPlane::new(cw, ch, v)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMap::new(planes)
}
