//! Plain-text PGM (P2) reader and writer. The textual variant keeps test
//! fixtures diffable and bit-exact across platforms.

use crate::error::{CliError, Result};
use rim_core::DenseMatrix;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub max_value: u32,
    /// Row-major pixel values in `0..=max_value`.
    pub pixels: Vec<u32>,
}

impl PgmImage {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|msg| {
            CliError::Validation(format!("{}: {msg}", path.display()))
        })
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        // strip comments (# to end of line), then tokenize on whitespace
        let mut tokens = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or(""))
            .flat_map(|line| line.split_whitespace())
            .map(str::to_owned)
            .collect::<Vec<_>>()
            .into_iter();
        let magic = tokens.next().ok_or("empty file")?;
        if magic != "P2" {
            return Err(format!("expected plain PGM magic P2, got {magic:?}"));
        }
        let mut next_number = |what: &str| -> std::result::Result<u64, String> {
            let t = tokens.next().ok_or_else(|| format!("missing {what}"))?;
            t.parse::<u64>()
                .map_err(|_| format!("bad {what} value {t:?}"))
        };
        let width = next_number("width")? as usize;
        let height = next_number("height")? as usize;
        let max_value = next_number("max value")? as u32;
        if width == 0 || height == 0 {
            return Err("zero image dimension".into());
        }
        if max_value == 0 || max_value > 65_535 {
            return Err(format!("max value {max_value} out of range"));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for _ in 0..width * height {
            let v = next_number("pixel")?;
            if v > max_value as u64 {
                return Err(format!("pixel value {v} above max {max_value}"));
            }
            pixels.push(v as u32);
        }
        if tokens.next().is_some() {
            return Err("trailing data after pixel raster".into());
        }
        Ok(Self {
            width,
            height,
            max_value,
            pixels,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "P2");
        let _ = writeln!(out, "{} {}", self.width, self.height);
        let _ = writeln!(out, "{}", self.max_value);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Pixel values as a height-by-width matrix of raw intensities.
    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.height, self.width, |i, j| {
            self.pixels[i * self.width + j] as f64
        })
    }

    /// Quantize a matrix of raw intensities back to pixels, clamping to
    /// `0..=max_value`.
    pub fn from_matrix(m: &DenseMatrix, max_value: u32) -> Self {
        let pixels = m
            .data()
            .iter()
            .map(|&v| v.round().clamp(0.0, max_value as f64) as u32)
            .collect();
        Self {
            width: m.cols(),
            height: m.rows(),
            max_value,
            pixels,
        }
    }
}
