//! Binary PPM (P6) rendering of heatmap grids.
//!
//! Grayscale, pixel = floor(255 * (v - vmin) / (vmax - vmin)), image rows
//! ordered by descending y. Pure function of grid and range, so renders are
//! byte-identical across runs.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct HeatmapGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `cells[yi][xi]`, aligned with ascending `y` and `x`.
    pub cells: Vec<Vec<f64>>,
    pub vmin: f64,
    pub vmax: f64,
}

impl HeatmapGrid {
    /// Build with the value range taken from the data.
    pub fn new(x: Vec<f64>, y: Vec<f64>, cells: Vec<Vec<f64>>) -> Result<Self> {
        if y.len() != cells.len() || cells.iter().any(|row| row.len() != x.len()) {
            return Err(Error::InvalidArgument("heatmap cells are not rectangular".into()));
        }
        if x.is_empty() || y.is_empty() {
            return Err(Error::InvalidArgument("heatmap axes must be non-empty".into()));
        }
        let mut vmin = f64::INFINITY;
        let mut vmax = f64::NEG_INFINITY;
        for row in &cells {
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument("heatmap cell is not finite".into()));
                }
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
        }
        Ok(Self { x, y, cells, vmin, vmax })
    }

    pub fn with_range(mut self, vmin: f64, vmax: f64) -> Result<Self> {
        if vmax <= vmin || !vmax.is_finite() || !vmin.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid range [{vmin}, {vmax}]")));
        }
        self.vmin = vmin;
        self.vmax = vmax;
        Ok(self)
    }

    /// Binary P6 bytes, grayscale.
    pub fn render_ppm(&self) -> Vec<u8> {
        let width = self.x.len();
        let height = self.y.len();
        let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
        out.reserve(3 * width * height);
        let span = self.vmax - self.vmin;
        for row in self.cells.iter().rev() {
            for &v in row {
                let gray = if span > 0.0 {
                    let level = (255.0 * (v - self.vmin) / span).floor();
                    level.clamp(0.0, 255.0) as u8
                } else {
                    0
                };
                out.extend_from_slice(&[gray, gray, gray]);
            }
        }
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render_ppm())?;
        Ok(())
    }
}
