//! Covariance kernels, Gram and cross-covariance assembly, mean/trend
//! specifications and the variogram view of a stationary kernel.
//!
//! Every kernel here is stationary: `k(x, x')` depends only on the lag
//! `x - x'`, and `k(x, x) = variance` for every `x`. Observation noise is not
//! part of the kernel; it lives on the [`Dataset`] and only ever enters the
//! diagonal of the training Gram matrix.

mod config;
mod dataset;
mod mean;

pub use config::ModelConfig;
pub use dataset::Dataset;
pub use mean::{basis_matrix, eval_mean, Basis, BasisMean, BasisPrior, KnownMean, MeanFn, MeanSpec, Monomial};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel family. All families are scaled by the process variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-r^2 / 2)`
    SquaredExponential,
    /// `exp(-r)`
    Exponential,
    /// `(1 + sqrt(3) r) exp(-sqrt(3) r)`
    Matern32,
    /// `(1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r)`
    Matern52,
    /// Covariance only at zero lag.
    WhiteNoise,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelDocument {
    family: KernelFamily,
    variance: f64,
    lengthscales: Vec<f64>,
}

/// A stationary covariance function with its hyperparameters.
///
/// `lengthscales` holds either a single isotropic value or one value per
/// input dimension (axis-aligned anisotropy). `r` in the family formulas is
/// the Euclidean norm of the lag after dividing each coordinate by its
/// lengthscale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelDocument", into = "KernelDocument")]
pub struct KernelSpec {
    family: KernelFamily,
    variance: f64,
    lengthscales: Vec<f64>,
}

impl TryFrom<KernelDocument> for KernelSpec {
    type Error = Error;

    fn try_from(doc: KernelDocument) -> Result<Self> {
        KernelSpec::new(doc.family, doc.variance, doc.lengthscales)
    }
}

impl From<KernelSpec> for KernelDocument {
    fn from(k: KernelSpec) -> Self {
        KernelDocument {
            family: k.family,
            variance: k.variance,
            lengthscales: k.lengthscales,
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid(format!(
                "process variance must be finite and nonnegative, got {variance}"
            )));
        }
        if lengthscales.is_empty() {
            return Err(Error::invalid("at least one lengthscale is required"));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::invalid(format!(
                "lengthscales must be finite and positive, got {l}"
            )));
        }
        Ok(KernelSpec {
            family,
            variance,
            lengthscales,
        })
    }

    /// Isotropic kernel with a single lengthscale.
    pub fn isotropic(family: KernelFamily, variance: f64, lengthscale: f64) -> Result<Self> {
        Self::new(family, variance, vec![lengthscale])
    }

    pub fn squared_exponential(variance: f64, lengthscale: f64) -> Result<Self> {
        Self::isotropic(KernelFamily::SquaredExponential, variance, lengthscale)
    }

    pub fn white_noise(variance: f64) -> Result<Self> {
        Self::isotropic(KernelFamily::WhiteNoise, variance, 1.0)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Process variance `sigma_Z^2`, the value at zero lag.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    /// Fixed input dimension, if the lengthscales are per-dimension.
    pub fn dimension(&self) -> Option<usize> {
        (self.lengthscales.len() > 1).then_some(self.lengthscales.len())
    }

    /// True when every lengthscale is equal.
    pub fn is_isotropic(&self) -> bool {
        self.lengthscales.windows(2).all(|w| w[0] == w[1])
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self.dimension() {
            Some(expected) if expected != d => Err(Error::DimensionMismatch { expected, found: d }),
            _ => Ok(()),
        }
    }

    /// Correlation at scaled distance `r` (value in [0, 1]).
    fn correlation(&self, r: f64, zero_lag: bool) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => (-0.5 * r * r).exp(),
            KernelFamily::Exponential => (-r).exp(),
            KernelFamily::Matern32 => {
                let s = 3f64.sqrt() * r;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = 5f64.sqrt() * r;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            KernelFamily::WhiteNoise => {
                if zero_lag {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let iso = self.lengthscales.len() == 1;
        let mut r2 = 0.0;
        let mut zero_lag = true;
        for (i, (a, b)) in x.iter().zip(y).enumerate() {
            let l = if iso {
                self.lengthscales[0]
            } else {
                self.lengthscales[i]
            };
            let t = (a - b) / l;
            zero_lag &= a == b;
            r2 += t * t;
        }
        self.variance * self.correlation(r2.sqrt(), zero_lag)
    }

    /// `k(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        self.check_dim(x.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Covariance at isotropic lag `tau` (in input units).
    pub fn covariance_at_lag(&self, tau: f64) -> Result<f64> {
        if tau.is_nan() || tau < 0.0 {
            return Err(Error::invalid(format!("lag must be nonnegative, got {tau}")));
        }
        if !self.is_isotropic() {
            return Err(Error::invalid(
                "lag-based covariance needs an isotropic kernel",
            ));
        }
        let r = tau / self.lengthscales[0];
        Ok(self.variance * self.correlation(r, tau == 0.0))
    }

    /// Training Gram matrix `Sigma + noise * I` over the rows of `x`.
    pub fn gram(&self, x: &DMatrix<f64>, noise_variance: f64) -> Result<DMatrix<f64>> {
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be finite and nonnegative, got {noise_variance}"
            )));
        }
        self.check_dim(x.ncols())?;
        let pts = rows(x);
        let n = pts.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            g[(i, i)] = self.variance + noise_variance;
            for j in 0..i {
                let v = self.eval_unchecked(&pts[i], &pts[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Cross-covariance vector `k_*` between the rows of `x` and `target`.
    /// No noise term is ever added here.
    pub fn cross_cov(&self, x: &DMatrix<f64>, target: &[f64]) -> Result<DVector<f64>> {
        if x.ncols() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: target.len(),
            });
        }
        self.check_dim(target.len())?;
        Ok(DVector::from_iterator(
            x.nrows(),
            rows(x).iter().map(|r| self.eval_unchecked(r, target)),
        ))
    }

    /// Cross-covariance matrix `k(X, X*)`, one column per row of `targets`.
    pub fn cross_cov_matrix(&self, x: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != targets.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                found: targets.ncols(),
            });
        }
        self.check_dim(x.ncols())?;
        let a = rows(x);
        let b = rows(targets);
        Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
            self.eval_unchecked(&a[i], &b[j])
        }))
    }

    /// Semivariogram `gamma(tau) = variance - C(tau)`.
    pub fn semivariogram(&self, tau: f64) -> Result<f64> {
        Ok(self.variance - self.covariance_at_lag(tau)?)
    }
}

/// `gamma(tau)` for an isotropic kernel. See [`KernelSpec::semivariogram`].
pub fn semivariogram_of(spec: &KernelSpec, tau: f64) -> Result<f64> {
    spec.semivariogram(tau)
}

/// Covariance recovered from a semivariogram value: `C = variance - gamma`.
pub fn cov_from_semivariogram(variance: f64, gamma: f64) -> Result<f64> {
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::invalid(format!("variance must be nonnegative, got {variance}")));
    }
    if !(0.0..=2.0 * variance).contains(&gamma) {
        return Err(Error::invalid(format!(
            "semivariance {gamma} outside [0, {}]",
            2.0 * variance
        )));
    }
    Ok(variance - gamma)
}

/// Rows of `x` as owned coordinate vectors.
pub(crate) fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn se() -> KernelSpec {
        KernelSpec::squared_exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(se().eval(&[0.0], &[0.0]).unwrap(), 1.0);
        assert_relative_eq!(se().eval(&[0.0], &[1.0]).unwrap(), (-0.5f64).exp());
        let m32 = KernelSpec::isotropic(KernelFamily::Matern32, 2.0, 1.0).unwrap();
        assert_eq!(m32.eval(&[0.0], &[0.0]).unwrap(), 2.0);
    }

    #[test]
    fn eval_dimension_mismatch() {
        assert!(matches!(
            se().eval(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let ard = KernelSpec::new(KernelFamily::Exponential, 1.0, vec![1.0, 2.0]).unwrap();
        assert!(ard.eval(&[0.0], &[1.0]).is_err());
        assert!(ard.eval(&[0.0, 0.0], &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(KernelSpec::squared_exponential(-1.0, 1.0).is_err());
        assert!(KernelSpec::squared_exponential(1.0, 0.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, 1.0, vec![]).is_err());
    }

    #[test]
    fn gram_examples() {
        let x1 = DMatrix::from_row_slice(1, 1, &[3.0]);
        let k = KernelSpec::isotropic(KernelFamily::Matern52, 2.5, 0.3).unwrap();
        assert_eq!(k.gram(&x1, 0.0).unwrap()[(0, 0)], 2.5);

        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let g = se().gram(&x, 0.0).unwrap();
        let e = (-0.5f64).exp();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[1.0, e, e, 1.0]));
        let g = se().gram(&x, 0.1).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.1);
        assert_relative_eq!(g[(1, 1)], 1.1);
        assert_relative_eq!(g[(0, 1)], e);
    }

    #[test]
    fn cross_cov_examples() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let k = se().cross_cov(&x, &[1.0]).unwrap();
        assert_eq!(k[1], 1.0);
        let far = se().cross_cov(&x, &[1e6]).unwrap();
        assert!(far.iter().all(|v| *v < 1e-12));
        let mid = se().cross_cov(&x, &[0.5]).unwrap();
        assert_relative_eq!(mid[0], (-0.125f64).exp());
        assert_relative_eq!(mid[1], (-0.125f64).exp());
    }

    #[test]
    fn semivariogram_examples() {
        assert_eq!(semivariogram_of(&se(), 0.0).unwrap(), 0.0);
        assert_relative_eq!(semivariogram_of(&se(), 1e6).unwrap(), 1.0);
        assert_relative_eq!(semivariogram_of(&se(), 1.0).unwrap(), 1.0 - (-0.5f64).exp());
        let wn = KernelSpec::white_noise(2.0).unwrap();
        assert_eq!(wn.semivariogram(0.0).unwrap(), 0.0);
        assert_eq!(wn.semivariogram(1e-9).unwrap(), 2.0);
    }

    #[test]
    fn cov_from_semivariogram_examples() {
        assert_eq!(cov_from_semivariogram(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(cov_from_semivariogram(1.0, 1.0).unwrap(), 0.0);
        let g = 2.0 * (1.0 - (-0.5f64).exp());
        assert_relative_eq!(cov_from_semivariogram(2.0, g).unwrap(), 2.0 * (-0.5f64).exp());
        assert!(cov_from_semivariogram(1.0, 2.5).is_err());
        assert!(cov_from_semivariogram(1.0, -0.1).is_err());
    }

    #[test]
    fn nugget_lifts_diagonal_above_continuous_limit() {
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        for family in [
            KernelFamily::SquaredExponential,
            KernelFamily::Exponential,
            KernelFamily::Matern32,
            KernelFamily::Matern52,
        ] {
            let k = KernelSpec::isotropic(family, 1.0, 0.5).unwrap();
            let limit = k.covariance_at_lag(1e-12).unwrap();
            assert!(k.gram(&x, 0.2).unwrap()[(0, 0)] > limit + 0.1);
        }
    }

    #[test]
    fn json_shape() {
        let k: KernelSpec = serde_json::from_str(
            r#"{"family": "squared_exponential", "variance": 1.0, "lengthscales": [1.0]}"#,
        )
        .unwrap();
        assert_eq!(k, se());
        let back = serde_json::to_string(&k).unwrap();
        assert_eq!(
            back,
            r#"{"family":"squared_exponential","variance":1.0,"lengthscales":[1.0]}"#
        );
        assert!(serde_json::from_str::<KernelSpec>(
            r#"{"family": "matern32", "variance": 1.0, "lengthscales": [-1.0]}"#
        )
        .is_err());
    }

    fn family() -> impl Strategy<Value = KernelFamily> {
        prop_oneof![
            Just(KernelFamily::SquaredExponential),
            Just(KernelFamily::Exponential),
            Just(KernelFamily::Matern32),
            Just(KernelFamily::Matern52),
        ]
    }

    proptest! {
        #[test]
        fn symmetric(f in family(), v in 0.1f64..5.0, l in 0.1f64..3.0,
                     a in prop::collection::vec(-5.0f64..5.0, 2),
                     b in prop::collection::vec(-5.0f64..5.0, 2)) {
            let k = KernelSpec::isotropic(f, v, l).unwrap();
            let kab = k.eval(&a, &b).unwrap();
            prop_assert_eq!(kab, k.eval(&b, &a).unwrap());
            prop_assert!(kab >= 0.0 && kab <= v);
        }

        #[test]
        fn variogram_identity(f in family(), v in 0.1f64..5.0, l in 0.1f64..3.0, tau in 0.0f64..20.0) {
            let k = KernelSpec::isotropic(f, v, l).unwrap();
            let sum = k.semivariogram(tau).unwrap() + k.covariance_at_lag(tau).unwrap();
            prop_assert!((sum - v).abs() <= 1e-15 * v.max(1.0) * 4.0);
            let c = cov_from_semivariogram(v, k.semivariogram(tau).unwrap()).unwrap();
            prop_assert!((c - k.covariance_at_lag(tau).unwrap()).abs() <= 1e-15 * v.max(1.0) * 4.0);
        }

        #[test]
        fn semivariogram_monotone_to_sill(f in family(), l in 0.1f64..3.0, t1 in 0.0f64..10.0, dt in 0.0f64..10.0) {
            let k = KernelSpec::isotropic(f, 1.3, l).unwrap();
            prop_assert!(k.semivariogram(t1).unwrap() <= k.semivariogram(t1 + dt).unwrap() + 1e-15);
            prop_assert!((k.semivariogram(1e4 * l).unwrap() - 1.3).abs() < 1e-12);
        }

        #[test]
        fn gram_is_psd(f in family(), l in 0.05f64..2.0,
                       pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..20)) {
            let n = pts.len();
            let x = DMatrix::from_fn(n, 2, |i, j| pts[i][j]);
            let k = KernelSpec::isotropic(f, 1.7, l).unwrap();
            let g = k.gram(&x, 0.0).unwrap();
            prop_assert_eq!(&g, &g.transpose());
            let min = g.symmetric_eigen().eigenvalues.min();
            prop_assert!(min >= -1e-9 * 1.7, "min eigenvalue {}", min);
        }
    }
}
