use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Observed design locations `X` (one row per site), responses `y` and the
/// variance of the additive observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    noise_variance: f64,
}

impl Dataset {
    /// Validates shapes and finiteness. Repeated locations are rejected as a
    /// singular design unless `noise_variance > 0`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, noise_variance: f64) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || x.ncols() == 0 {
            return Err(Error::invalid("a dataset needs at least one row and one coordinate"));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be finite and nonnegative, got {noise_variance}"
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("locations and responses must be finite"));
        }
        if noise_variance == 0.0 {
            for i in 0..n {
                for j in 0..i {
                    if x.row(i) == x.row(j) {
                        return Err(Error::singular(format!(
                            "duplicate design points at rows {j} and {i} with zero noise"
                        )));
                    }
                }
            }
        }
        Ok(Dataset {
            x,
            y,
            noise_variance,
        })
    }

    /// One-dimensional convenience constructor.
    pub fn from_1d(x: &[f64], y: &[f64], noise_variance: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_column_slice(x.len(), 1, x),
            DVector::from_column_slice(y),
            noise_variance,
        )
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn location(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Same design and responses with a different noise variance.
    pub fn with_noise(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.x.clone(), self.y.clone(), noise_variance)
    }
}
