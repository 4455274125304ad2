//! Best linear unbiased prediction: general noisy BLUP, Simple, Ordinary and
//! Universal Kriging, GLS trend estimators, and the alternative solution
//! routes that must agree with them.
//!
//! Sign convention for the Lagrange multipliers reported in
//! [`KrigingWeights::mu_tilde`]: the weights are always
//! `lambda = Sigma^{-1} (k_* + M mu_tilde)`. The block Kriging system
//! `[[Sigma, M], [M^T, 0]] (lambda; mu) = (k_*; f(x_*))` carries the opposite
//! sign (`mu = -mu_tilde`), so every route that solves the block system
//! negates its multiplier before reporting it. With this convention the
//! compact Ordinary Kriging error variance reads
//! `sigma_*^2 - lambda^T k_* + mu_tilde`.
//!
//! Observation noise is supported by every variant: `Sigma` is replaced by
//! `Sigma + noise * I` in the training Gram while `k_*` is left untouched.
//! At zero noise all routes reduce to the textbook Kriging estimators.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{Basis, Dataset, KernelSpec, MeanSpec};
use crate::linalg::{self, JitterPolicy, SpdFactor};

/// Error variances may come out slightly negative from rounding. Values down
/// to `-VARIANCE_TOLERANCE * max(1, sigma_*^2)` are clamped to zero; anything
/// lower is reported as a numerical inconsistency.
pub const VARIANCE_TOLERANCE: f64 = 1e-9;

/// Which estimator produced a set of weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    GeneralBlup,
    Simple,
    Ordinary,
    Universal,
}

/// Linear predictor `T(Y) = lambda^T Y + lambda0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingWeights {
    pub lambda: DVector<f64>,
    /// Intercept; zero for Ordinary and Universal Kriging.
    pub lambda0: f64,
    /// Absorbed Lagrange multipliers, empty for known-mean predictors.
    pub mu_tilde: DVector<f64>,
    pub variant: Variant,
}

/// A point prediction with its uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// The predictor `T(Y)`.
    pub mean: f64,
    /// `V[T(Y) - Z(x_*)]`.
    pub error_variance: f64,
    /// `V[T(Y)]`.
    pub estimator_variance: f64,
    pub weights: KrigingWeights,
    /// The training Gram needed jitter to factor.
    pub jitter_warning: bool,
}

fn clamp_variance(v: f64, prior: f64, what: &str) -> Result<f64> {
    let tol = VARIANCE_TOLERANCE * prior.max(1.0);
    if v >= 0.0 {
        Ok(v)
    } else if v >= -tol {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "{what} error variance is negative ({v:e})"
        )))
    }
}

/// Training data, kernel and the factored training Gram `Sigma + noise * I`.
///
/// Immutable once built; predictions borrow it and can run concurrently.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    data: Dataset,
    kernel: KernelSpec,
    gram: DMatrix<f64>,
    factor: SpdFactor,
}

impl KrigingModel {
    pub fn new(data: Dataset, kernel: KernelSpec) -> Result<Self> {
        Self::with_jitter(data, kernel, JitterPolicy::None)
    }

    pub fn with_jitter(data: Dataset, kernel: KernelSpec, policy: JitterPolicy) -> Result<Self> {
        let gram = kernel.gram(data.x(), data.noise_variance())?;
        let factor = linalg::spd_factor(&gram, policy)?;
        Ok(KrigingModel {
            data,
            kernel,
            gram,
            factor,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// `Sigma + noise * I` as assembled (before any jitter).
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn jitter_used(&self) -> f64 {
        self.factor.jitter_used()
    }

    pub(crate) fn jittered(&self) -> bool {
        self.factor.jitter_used() > 0.0
    }

    fn n(&self) -> usize {
        self.data.len()
    }

    fn check_target(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `(sigma_*^2, k_*)` at a target location.
    fn target_cov(&self, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        self.check_target(x)?;
        Ok((self.kernel.eval(x, x)?, self.kernel.cross_cov(self.data.x(), x)?))
    }

    /// `lambda^T (Sigma + noise I) lambda`.
    fn weight_variance(&self, lambda: &DVector<f64>) -> f64 {
        lambda.dot(&(&self.gram * lambda))
    }

    /// General BLUP with a known mean (noise allowed):
    /// `lambda = (Sigma + noise I)^{-1} k_*`, `lambda0 = m_* - lambda^T m`.
    pub fn blup(&self, mean: &MeanSpec, x: &[f64]) -> Result<Prediction> {
        self.known_mean_predict(mean, x, Variant::GeneralBlup)
    }

    fn known_mean_predict(&self, mean: &MeanSpec, x: &[f64], variant: Variant) -> Result<Prediction> {
        let (prior, k) = self.target_cov(x)?;
        let m = mean.eval_rows(self.data.x())?;
        let m_star = mean.eval(x)?;
        let lambda = self.factor.solve_vec(&k)?;
        let lambda0 = m_star - lambda.dot(&m);
        let estimator_variance = self.factor.quad_form(&k)?;
        let error_variance = clamp_variance(prior - estimator_variance, prior, "BLUP")?;
        Ok(Prediction {
            mean: lambda.dot(self.data.y()) + lambda0,
            error_variance,
            estimator_variance,
            weights: KrigingWeights {
                lambda,
                lambda0,
                mu_tilde: DVector::zeros(0),
                variant,
            },
            jitter_warning: self.jittered(),
        })
    }

    fn require_noise_free(&self) -> Result<()> {
        if self.data.noise_variance() != 0.0 {
            return Err(Error::invalid(
                "simple kriging assumes noise-free observations; use the general BLUP",
            ));
        }
        Ok(())
    }

    /// Simple Kriging: known mean, no noise.
    pub fn simple(&self, mean: &MeanSpec, x: &[f64]) -> Result<Prediction> {
        self.require_noise_free()?;
        self.known_mean_predict(mean, x, Variant::Simple)
    }

    /// Simple Kriging of the residual field `y - m` with zero mean, adding
    /// `m_*` back afterwards.
    pub fn simple_mean_subtraction(&self, mean: &MeanSpec, x: &[f64]) -> Result<Prediction> {
        self.require_noise_free()?;
        let (prior, k) = self.target_cov(x)?;
        let residual = self.data.y() - mean.eval_rows(self.data.x())?;
        let m_star = mean.eval(x)?;
        let lambda = self.factor.solve_vec(&k)?;
        let estimator_variance = self.factor.quad_form(&k)?;
        let error_variance = clamp_variance(prior - estimator_variance, prior, "SK")?;
        let lambda0 = m_star - lambda.dot(&mean.eval_rows(self.data.x())?);
        Ok(Prediction {
            mean: m_star + lambda.dot(&residual),
            error_variance,
            estimator_variance,
            weights: KrigingWeights {
                lambda,
                lambda0,
                mu_tilde: DVector::zeros(0),
                variant: Variant::Simple,
            },
            jitter_warning: self.jittered(),
        })
    }

    /// Inverse of the Ordinary Kriging system, reusable across targets.
    pub fn ordinary_system(&self) -> Result<OrdinarySystem<'_>> {
        let n = self.n();
        let ones = DMatrix::from_element(n, 1, 1.0);
        let inverse = linalg::block_inverse(
            &self.gram,
            &ones,
            &ones.transpose(),
            &DMatrix::zeros(1, 1),
        )?;
        let sigma_inv_ones = self.factor.solve_vec(&DVector::from_element(n, 1.0))?;
        let ones_quad = sigma_inv_ones.sum();
        Ok(OrdinarySystem {
            model: self,
            inverse,
            sigma_inv_ones,
            ones_quad,
        })
    }

    /// Ordinary Kriging through the inverted block Kriging system.
    pub fn ordinary(&self, x: &[f64]) -> Result<Prediction> {
        self.ordinary_system()?.predict(x)
    }

    /// Ordinary Kriging solved without the block inverse: isolate
    /// `lambda = Sigma^{-1} k_* - mu Sigma^{-1} 1` from the first block row and
    /// fix the scalar `mu` with the unbiasedness row `1^T lambda = 1`.
    /// The error variance is the BLUP objective evaluated at `lambda`.
    pub fn ordinary_direct(&self, x: &[f64]) -> Result<Prediction> {
        let (prior, k) = self.target_cov(x)?;
        let n = self.n();
        let a = self.factor.solve_vec(&k)?;
        let u = self.factor.solve_vec(&DVector::from_element(n, 1.0))?;
        let mu = -(1.0 - a.sum()) / u.sum();
        let lambda = &a - &u * mu;
        let estimator_variance = self.weight_variance(&lambda);
        let objective = prior + estimator_variance - 2.0 * lambda.dot(&k);
        Ok(Prediction {
            mean: lambda.dot(self.data.y()),
            error_variance: clamp_variance(objective, prior, "OK")?,
            estimator_variance,
            weights: KrigingWeights {
                lambda,
                lambda0: 0.0,
                mu_tilde: DVector::from_element(1, -mu),
                variant: Variant::Ordinary,
            },
            jitter_warning: self.jittered(),
        })
    }

    /// GLS estimate of an unknown constant mean,
    /// `(1^T Sigma^{-1} 1)^{-1} 1^T Sigma^{-1} y`.
    pub fn gls_constant(&self) -> Result<f64> {
        let u = self.factor.solve_vec(&DVector::from_element(self.n(), 1.0))?;
        Ok(u.dot(self.data.y()) / u.sum())
    }

    /// GLS fit of a linear trend, reusable across targets.
    pub fn trend(&self, basis: &Basis) -> Result<TrendFit<'_>> {
        let n = self.n();
        let p = basis.len();
        if p > n {
            return Err(Error::invalid(format!(
                "{p} basis functions but only {n} observations"
            )));
        }
        let m = basis.matrix(self.data.x())?;
        let sigma_inv_m = self.factor.solve(&m)?;
        let g = m.transpose() * &sigma_inv_m;
        let g = (&g + g.transpose()) * 0.5;
        let g_factor = linalg::spd_factor(&g, JitterPolicy::None).map_err(|_| {
            Error::singular("basis functions linearly dependent at the design points")
        })?;
        let beta = g_factor.solve_vec(&(sigma_inv_m.transpose() * self.data.y()))?;
        let residual_weights = self.factor.solve_vec(&(self.data.y() - &m * &beta))?;
        Ok(TrendFit {
            model: self,
            basis: basis.clone(),
            m,
            sigma_inv_m,
            g_factor,
            beta,
            residual_weights,
        })
    }

    /// GLS estimate `(M^T Sigma^{-1} M)^{-1} M^T Sigma^{-1} y`.
    pub fn gls_beta(&self, basis: &Basis) -> Result<DVector<f64>> {
        Ok(self.trend(basis)?.beta)
    }

    /// Predict at every row of `targets`, preparing shared state once.
    pub fn predict_batch(&self, method: &Method, targets: &DMatrix<f64>) -> Result<Vec<Prediction>> {
        let pts = crate::kernels::rows(targets);
        match method {
            Method::Blup(mean) => par_map(&pts, |x| self.blup(mean, x)),
            Method::Simple(mean) => par_map(&pts, |x| self.simple(mean, x)),
            Method::Ordinary => {
                let sys = self.ordinary_system()?;
                par_map(&pts, |x| sys.predict(x))
            }
            Method::OrdinaryDirect => par_map(&pts, |x| self.ordinary_direct(x)),
            Method::Universal(basis) => {
                let fit = self.trend(basis)?;
                par_map(&pts, |x| fit.universal(x))
            }
            Method::PluginMean(basis) => {
                let fit = self.trend(basis)?;
                par_map(&pts, |x| fit.sk_with_plugin_mean(x))
            }
        }
    }
}

fn par_map<F>(pts: &[Vec<f64>], f: F) -> Result<Vec<Prediction>>
where
    F: Fn(&[f64]) -> Result<Prediction> + Sync,
{
    pts.par_iter().map(|x| f(x)).collect()
}

/// Kriging estimator selector for [`KrigingModel::predict_batch`].
#[derive(Debug, Clone)]
pub enum Method {
    Blup(MeanSpec),
    Simple(MeanSpec),
    Ordinary,
    OrdinaryDirect,
    Universal(Basis),
    PluginMean(Basis),
}

/// `[[Sigma, 1], [1^T, 0]]^{-1}` for one model.
#[derive(Debug, Clone)]
pub struct OrdinarySystem<'m> {
    model: &'m KrigingModel,
    inverse: DMatrix<f64>,
    sigma_inv_ones: DVector<f64>,
    ones_quad: f64,
}

impl OrdinarySystem<'_> {
    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let model = self.model;
        let n = model.n();
        let (prior, k) = model.target_cov(x)?;
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&k);
        rhs[n] = 1.0;
        let sol = &self.inverse * rhs;
        let lambda = sol.rows(0, n).into_owned();
        let mu_tilde = -sol[n];

        let sk_variance = prior - model.factor.quad_form(&k)?;
        let defect = 1.0 - self.sigma_inv_ones.dot(&k);
        let expanded = sk_variance + defect * defect / self.ones_quad;
        let compact = prior - lambda.dot(&k) + mu_tilde;
        if (expanded - compact).abs() > VARIANCE_TOLERANCE * prior.max(1.0) {
            return Err(Error::Numerical(format!(
                "ordinary kriging variance forms disagree: {expanded} vs {compact}"
            )));
        }
        Ok(Prediction {
            mean: lambda.dot(model.data.y()),
            error_variance: clamp_variance(expanded, prior, "OK")?,
            estimator_variance: model.weight_variance(&lambda),
            weights: KrigingWeights {
                lambda,
                lambda0: 0.0,
                mu_tilde: DVector::from_element(1, mu_tilde),
                variant: Variant::Ordinary,
            },
            jitter_warning: model.jittered(),
        })
    }
}

/// GLS trend fit: `M`, `Sigma^{-1} M`, the factored `M^T Sigma^{-1} M` and
/// `beta_hat`.
#[derive(Debug, Clone)]
pub struct TrendFit<'m> {
    model: &'m KrigingModel,
    basis: Basis,
    m: DMatrix<f64>,
    pub(crate) sigma_inv_m: DMatrix<f64>,
    pub(crate) g_factor: SpdFactor,
    beta: DVector<f64>,
    pub(crate) residual_weights: DVector<f64>,
}

impl TrendFit<'_> {
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn design_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// `gamma = f(x_*) - M^T Sigma^{-1} k_*` and the SK error variance.
    fn gamma(&self, prior: f64, k: &DVector<f64>, f_star: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let gamma = f_star - self.sigma_inv_m.transpose() * k;
        let sk = prior - self.model.factor.quad_form(k)?;
        Ok((gamma, sk))
    }

    /// Universal Kriging from the block system
    /// `[[Sigma, M], [M^T, 0]] (lambda; mu) = (k_*; f(x_*))`.
    pub fn universal(&self, x: &[f64]) -> Result<Prediction> {
        let model = self.model;
        let (prior, k) = model.target_cov(x)?;
        let f_star = self.basis.eval(x);
        let sol = linalg::solve_saddle_factored(&model.factor, &self.m, &k, &f_star)?;
        let (gamma, sk) = self.gamma(prior, &k, &f_star)?;
        let inflation = self.g_factor.quad_form(&gamma)?;
        Ok(Prediction {
            mean: sol.lambda.dot(model.data.y()),
            error_variance: clamp_variance(sk + inflation, prior, "UK")?,
            estimator_variance: model.weight_variance(&sol.lambda),
            weights: KrigingWeights {
                lambda: sol.lambda,
                lambda0: 0.0,
                mu_tilde: -sol.mu,
                variant: Variant::Universal,
            },
            jitter_warning: model.jittered(),
        })
    }

    /// Simple Kriging with the GLS trend plugged in as if it were known:
    /// `f(x_*)^T beta_hat + k_*^T Sigma^{-1} (y - M beta_hat)`.
    ///
    /// The reported error variance is that of the equivalent Ordinary /
    /// Universal Kriging estimator, and the weights are its linear weights.
    pub fn sk_with_plugin_mean(&self, x: &[f64]) -> Result<Prediction> {
        let model = self.model;
        let (prior, k) = model.target_cov(x)?;
        let f_star = self.basis.eval(x);
        let mean = f_star.dot(&self.beta) + k.dot(&self.residual_weights);
        let (gamma, sk) = self.gamma(prior, &k, &f_star)?;
        let mu_tilde = self.g_factor.solve_vec(&gamma)?;
        let lambda = model.factor.solve_vec(&k)? + &self.sigma_inv_m * &mu_tilde;
        let inflation = gamma.dot(&mu_tilde);
        let variant = if self.basis == Basis::constant() {
            Variant::Ordinary
        } else {
            Variant::Universal
        };
        Ok(Prediction {
            mean,
            error_variance: clamp_variance(sk + inflation, prior, "plug-in")?,
            estimator_variance: model.weight_variance(&lambda),
            weights: KrigingWeights {
                lambda,
                lambda0: 0.0,
                mu_tilde,
                variant,
            },
            jitter_warning: model.jittered(),
        })
    }
}

/// Ordinary least squares trend prediction `f(x_*)^T (M^T M)^{-1} M^T y`,
/// ignoring all correlation.
pub fn ls_predict(data: &Dataset, basis: &Basis, x: &[f64]) -> Result<f64> {
    Ok(LeastSquaresFit::new(data, basis)?.predict(x))
}

/// Ordinary least squares trend fit.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    basis: Basis,
    beta: DVector<f64>,
}

impl LeastSquaresFit {
    pub fn new(data: &Dataset, basis: &Basis) -> Result<Self> {
        if basis.len() > data.len() {
            return Err(Error::invalid(format!(
                "{} basis functions but only {} observations",
                basis.len(),
                data.len()
            )));
        }
        let m = basis.matrix(data.x())?;
        let mtm = m.transpose() * &m;
        let f = linalg::spd_factor(&mtm, JitterPolicy::None).map_err(|_| {
            Error::singular("basis functions linearly dependent at the design points")
        })?;
        let beta = f.solve_vec(&(m.transpose() * data.y()))?;
        Ok(LeastSquaresFit {
            basis: basis.clone(),
            beta,
        })
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.basis.eval(x).dot(&self.beta)
    }
}

/// General noisy BLUP with a known mean.
pub fn blup_general(data: &Dataset, kernel: &KernelSpec, mean: &MeanSpec, x: &[f64]) -> Result<Prediction> {
    KrigingModel::new(data.clone(), kernel.clone())?.blup(mean, x)
}

/// Simple Kriging (known mean, noise-free data).
pub fn simple_krige(data: &Dataset, kernel: &KernelSpec, mean: &MeanSpec, x: &[f64]) -> Result<Prediction> {
    KrigingModel::new(data.clone(), kernel.clone())?.simple(mean, x)
}

/// Simple Kriging by subtracting the mean first.
pub fn sk_mean_subtraction(data: &Dataset, kernel: &KernelSpec, mean: &MeanSpec, x: &[f64]) -> Result<Prediction> {
    KrigingModel::new(data.clone(), kernel.clone())?.simple_mean_subtraction(mean, x)
}

/// Ordinary Kriging via the inverted block system.
pub fn ordinary_krige(data: &Dataset, kernel: &KernelSpec, x: &[f64]) -> Result<Prediction> {
    KrigingModel::new(data.clone(), kernel.clone())?.ordinary(x)
}

/// Ordinary Kriging via scalar elimination of the multiplier.
pub fn ordinary_krige_direct(data: &Dataset, kernel: &KernelSpec, x: &[f64]) -> Result<Prediction> {
    KrigingModel::new(data.clone(), kernel.clone())?.ordinary_direct(x)
}

pub fn gls_constant(data: &Dataset, kernel: &KernelSpec) -> Result<f64> {
    KrigingModel::new(data.clone(), kernel.clone())?.gls_constant()
}

pub fn gls_beta(data: &Dataset, kernel: &KernelSpec, basis: &Basis) -> Result<DVector<f64>> {
    KrigingModel::new(data.clone(), kernel.clone())?.gls_beta(basis)
}

/// Simple Kriging with the GLS trend estimate plugged in.
pub fn sk_with_plugin_mean(data: &Dataset, kernel: &KernelSpec, basis: &Basis, x: &[f64]) -> Result<Prediction> {
    let model = KrigingModel::new(data.clone(), kernel.clone())?;
    let fit = model.trend(basis)?;
    fit.sk_with_plugin_mean(x)
}

/// Universal Kriging.
pub fn universal_krige(data: &Dataset, kernel: &KernelSpec, basis: &Basis, x: &[f64]) -> Result<Prediction> {
    let model = KrigingModel::new(data.clone(), kernel.clone())?;
    let fit = model.trend(basis)?;
    fit.universal(x)
}
