use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;

/// Probability mass on a regular `height × width` pixel grid whose corner
/// pixels sit at ±1 on both axes.
///
/// Pixel `(row, col)` is located at `x = −1 + 2·col/(W−1)`,
/// `y = 1 − 2·row/(H−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridHistogram {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl GridHistogram {
    /// Normalizes nonnegative row-major intensities into a histogram.
    pub fn from_intensities(height: usize, width: usize, intensities: &[f64]) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::invalid("grid must be at least 2 × 2"));
        }
        if intensities.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: height * width,
                got: intensities.len(),
            });
        }
        if intensities.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("intensities must be finite and nonnegative"));
        }
        let total: f64 = intensities.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("image has no active pixel"));
        }
        Ok(Self {
            height,
            width,
            weights: intensities.iter().map(|v| v / total).collect(),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major probability vector over all pixels.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn col_spacing(&self) -> f64 {
        2.0 / (self.width - 1) as f64
    }

    pub fn row_spacing(&self) -> f64 {
        2.0 / (self.height - 1) as f64
    }

    pub fn position(&self, row: usize, col: usize) -> [f64; 2] {
        [
            -1.0 + col as f64 * self.col_spacing(),
            1.0 - row as f64 * self.row_spacing(),
        ]
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::invalid(format!(
                "histograms on different grids ({}×{} vs {}×{})",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// Weighted point cloud over the active pixels.
    pub fn to_measure(&self) -> Result<EmpiricalMeasure> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                let w = self.weights[row * self.width + col];
                if w > 0.0 {
                    points.extend_from_slice(&self.position(row, col));
                    weights.push(w);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        EmpiricalMeasure::from_flat_weighted(points, 2, weights)
    }
}
