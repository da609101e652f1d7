use std::path::Path;

use crate::error::{Error, Result};

/// Number of color-name categories per table row.
pub const COLOR_NAME_CHANNELS: usize = 11;
const TABLE_ROWS: usize = 32 * 32 * 32;

/// RGB to color-name probability lookup, 32 levels per channel.
///
/// Row index for 8-bit `(r, g, b)` is `r/8 + 32*(g/8) + 1024*(b/8)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorNames {
    table: Vec<[f64; COLOR_NAME_CHANNELS]>,
}

impl ColorNames {
    /// Reads a table file.
    ///
    /// Text files hold 32768 whitespace-separated rows of 11 probabilities, or
    /// 14 values where the first three are the RGB bin centers and are skipped.
    /// A file of exactly 32768 × 11 × 4 bytes is read as little-endian `f32`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| Error::ColorTableUnavailable(format!("{}: {e}", path.display())))?;
        if bytes.len() == TABLE_ROWS * COLOR_NAME_CHANNELS * 4 {
            let table = bytes
                .chunks_exact(COLOR_NAME_CHANNELS * 4)
                .map(|row| {
                    let mut out = [0.0; COLOR_NAME_CHANNELS];
                    for (o, b) in out.iter_mut().zip(row.chunks_exact(4)) {
                        *o = f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
                    }
                    out
                })
                .collect();
            return ColorNames::from_rows(table);
        }
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::ColorTableUnavailable(format!("{}: not text", path.display())))?;
        let mut table = Vec::with_capacity(TABLE_ROWS);
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("{e}"),
                })?;
            let probs = match vals.len() {
                11 => &vals[..],
                14 => &vals[3..],
                n => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno + 1,
                        msg: format!("expected 11 or 14 columns, found {n}"),
                    })
                }
            };
            let mut row = [0.0; COLOR_NAME_CHANNELS];
            row.copy_from_slice(probs);
            table.push(row);
        }
        ColorNames::from_rows(table)
    }

    pub fn from_rows(table: Vec<[f64; COLOR_NAME_CHANNELS]>) -> Result<Self> {
        if table.len() != TABLE_ROWS {
            return Err(Error::ColorTableUnavailable(format!(
                "expected {TABLE_ROWS} rows, found {}",
                table.len()
            )));
        }
        if table.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::ColorTableUnavailable("non-finite entry".into()));
        }
        Ok(ColorNames { table })
    }

    /// Probabilities for an RGB triple in `[0, 1]`.
    #[inline]
    pub fn lookup(&self, rgb: &[f64]) -> &[f64; COLOR_NAME_CHANNELS] {
        let q = |v: f64| ((v * 255.0).round().clamp(0.0, 255.0) as usize) / 8;
        &self.table[q(rgb[0]) + 32 * q(rgb[1]) + 1024 * q(rgb[2])]
    }
}
