//! Gaussian-process predictive distributions.
//!
//! With a known mean the posterior at a single test point coincides with
//! Simple Kriging. With a linear trend under a noninformative prior on its
//! coefficients the posterior mean is the Universal (or Ordinary) Kriging
//! predictor and the posterior variance its error variance.
//!
//! Predictions are for the latent field `Z(x_*)` unless
//! [`GprOptions::observation_noise`] is set, in which case the noise variance
//! is added to the diagonal.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{BasisMean, BasisPrior, Dataset, KernelSpec, MeanSpec};
use crate::kriging::{KrigingModel, VARIANCE_TOLERANCE};
use crate::linalg::{self, JitterPolicy};

/// Joint Gaussian over a set of test points.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPredictive {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianPredictive {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Marginal variances.
    pub fn variance(&self) -> DVector<f64> {
        self.covariance.diagonal()
    }

    /// Central interval `mean +- z * sd` at test point `i`.
    pub fn interval(&self, i: usize, z: f64) -> (f64, f64) {
        let half = z * self.covariance[(i, i)].sqrt();
        (self.mean[i] - half, self.mean[i] + half)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GprOptions {
    /// Predict `Y(x_*)` rather than the latent `Z(x_*)`.
    pub observation_noise: bool,
}

/// A fitted Gaussian process: the factored training Gram plus options.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    model: KrigingModel,
    options: GprOptions,
}

impl GaussianProcess {
    pub fn new(data: Dataset, kernel: KernelSpec) -> Result<Self> {
        Ok(Self::from_model(KrigingModel::new(data, kernel)?))
    }

    pub fn from_model(model: KrigingModel) -> Self {
        GaussianProcess {
            model,
            options: GprOptions::default(),
        }
    }

    pub fn with_options(mut self, options: GprOptions) -> Self {
        self.options = options;
        self
    }

    pub fn model(&self) -> &KrigingModel {
        &self.model
    }

    fn check_targets(&self, targets: &DMatrix<f64>) -> Result<()> {
        let d = self.model.data().dim();
        if targets.nrows() > 0 && targets.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: targets.ncols(),
            });
        }
        Ok(())
    }

    fn blocks(&self, targets: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let kernel = self.model.kernel();
        Ok((
            kernel.cross_cov_matrix(self.model.data().x(), targets)?,
            kernel.gram(targets, 0.0)?,
        ))
    }

    fn finish(&self, mean: DVector<f64>, mut cov: DMatrix<f64>) -> Result<GaussianPredictive> {
        cov = (&cov + cov.transpose()) * 0.5;
        let tol = VARIANCE_TOLERANCE * self.model.kernel().variance().max(1.0);
        for i in 0..cov.nrows() {
            let v = cov[(i, i)];
            if v < -tol {
                return Err(Error::Numerical(format!(
                    "posterior variance at test point {i} is negative ({v:e})"
                )));
            }
            if v < 0.0 {
                cov[(i, i)] = 0.0;
            }
            if self.options.observation_noise {
                cov[(i, i)] += self.model.data().noise_variance();
            }
        }
        Ok(GaussianPredictive {
            mean,
            covariance: cov,
        })
    }

    /// Posterior under a fully known mean.
    pub fn predict(&self, mean: &MeanSpec, targets: &DMatrix<f64>) -> Result<GaussianPredictive> {
        self.check_targets(targets)?;
        let data = self.model.data();
        let factor = self.model.factor();
        let (k_star, k_ss) = self.blocks(targets)?;
        let resid = data.y() - mean.eval_rows(data.x())?;
        let post_mean = mean.eval_rows(targets)? + k_star.transpose() * factor.solve_vec(&resid)?;
        let v = factor.solve_lower(&k_star)?;
        self.finish(post_mean, k_ss - v.transpose() * v)
    }

    /// Posterior under a linear trend `f(x)^T beta`.
    ///
    /// * Gaussian prior `beta ~ N(b, B)`: exact conditional of the joint
    ///   Gaussian with `E[y] = M b` and `V[y] = M B M^T + Sigma`.
    /// * Noninformative prior: the zero-precision limit in closed form,
    ///   with the GLS trend estimate. Any `beta` on `mean` is ignored, since
    ///   the limit does not depend on the prior mean.
    ///
    /// For coefficients that are known exactly, use [`Self::predict`] with a
    /// [`MeanSpec::Basis`].
    pub fn predict_basis(&self, mean: &BasisMean, targets: &DMatrix<f64>) -> Result<GaussianPredictive> {
        self.check_targets(targets)?;
        match &mean.prior {
            BasisPrior::Gaussian { mean: b, covariance } => self.predict_gaussian_prior(mean, b, covariance, targets),
            BasisPrior::Noninformative => self.predict_noninformative(mean, targets),
        }
    }

    fn predict_noninformative(&self, mean: &BasisMean, targets: &DMatrix<f64>) -> Result<GaussianPredictive> {
        let fit = self.model.trend(&mean.basis)?;
        let factor = self.model.factor();
        let (k_star, k_ss) = self.blocks(targets)?;
        let f_star = mean.basis.matrix(targets)?;
        let post_mean = &f_star * fit.beta() + k_star.transpose() * &fit.residual_weights;
        let v = factor.solve_lower(&k_star)?;
        // R = F_*^T - M^T Sigma^{-1} K_*
        let r = f_star.transpose() - fit.sigma_inv_m.transpose() * &k_star;
        let w = fit.g_factor.solve_lower(&r)?;
        self.finish(post_mean, k_ss - v.transpose() * v + w.transpose() * w)
    }

    /// Conditional of the joint Gaussian written in information form:
    /// with `H = B^{-1} + M^T Sigma^{-1} M`,
    /// `beta_bar = H^{-1} (M^T Sigma^{-1} y + B^{-1} b)`,
    /// mean `F_* beta_bar + K_*^T Sigma^{-1} (y - M beta_bar)` and covariance
    /// `K_** - K_*^T Sigma^{-1} K_* + R^T H^{-1} R`. Algebraically identical to
    /// conditioning on `V[y] = M B M^T + Sigma`, but it stays well conditioned
    /// for very wide and very narrow priors alike.
    fn predict_gaussian_prior(
        &self,
        mean: &BasisMean,
        b: &DVector<f64>,
        big_b: &DMatrix<f64>,
        targets: &DMatrix<f64>,
    ) -> Result<GaussianPredictive> {
        let data = self.model.data();
        let factor = self.model.factor();
        let m = mean.basis.matrix(data.x())?;
        let p = m.ncols();
        let b_factor = linalg::spd_factor(big_b, JitterPolicy::None)
            .map_err(|_| Error::invalid("prior covariance of the trend must be SPD"))?;
        let b_inv = b_factor.solve(&DMatrix::identity(p, p))?;
        let sigma_inv_m = factor.solve(&m)?;
        let h = &b_inv + m.transpose() * &sigma_inv_m;
        let h_factor = linalg::spd_factor(&((&h + h.transpose()) * 0.5), JitterPolicy::None)?;
        let beta_bar = h_factor.solve_vec(&(sigma_inv_m.transpose() * data.y() + &b_inv * b))?;

        let (k_star, k_ss) = self.blocks(targets)?;
        let f_star = mean.basis.matrix(targets)?;
        let resid = factor.solve_vec(&(data.y() - &m * &beta_bar))?;
        let post_mean = &f_star * &beta_bar + k_star.transpose() * resid;
        let v = factor.solve_lower(&k_star)?;
        let r = f_star.transpose() - sigma_inv_m.transpose() * &k_star;
        let w = h_factor.solve_lower(&r)?;
        self.finish(post_mean, k_ss - v.transpose() * v + w.transpose() * w)
    }
}

/// Prior mean and covariance of `(y, Z(X_*))`: the training block carries
/// the observation noise, the test block does not.
pub fn joint_prior(
    data: &Dataset,
    kernel: &KernelSpec,
    mean: &MeanSpec,
    targets: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = data.len();
    let m = targets.nrows();
    if m > 0 && targets.ncols() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: targets.ncols(),
        });
    }
    let mut mu = DVector::zeros(n + m);
    mu.rows_mut(0, n).copy_from(&mean.eval_rows(data.x())?);
    let mut cov = DMatrix::zeros(n + m, n + m);
    cov.view_mut((0, 0), (n, n))
        .copy_from(&kernel.gram(data.x(), data.noise_variance())?);
    if m > 0 {
        mu.rows_mut(n, m).copy_from(&mean.eval_rows(targets)?);
        let cross = kernel.cross_cov_matrix(data.x(), targets)?;
        cov.view_mut((0, n), (n, m)).copy_from(&cross);
        cov.view_mut((n, 0), (m, n)).copy_from(&cross.transpose());
        cov.view_mut((n, n), (m, m)).copy_from(&kernel.gram(targets, 0.0)?);
    }
    Ok((mu, cov))
}

/// Latent posterior with a known mean.
pub fn gpr_predict(
    data: &Dataset,
    kernel: &KernelSpec,
    mean: &MeanSpec,
    targets: &DMatrix<f64>,
) -> Result<GaussianPredictive> {
    gpr_predict_with(data, kernel, mean, targets, GprOptions::default())
}

pub fn gpr_predict_with(
    data: &Dataset,
    kernel: &KernelSpec,
    mean: &MeanSpec,
    targets: &DMatrix<f64>,
    options: GprOptions,
) -> Result<GaussianPredictive> {
    GaussianProcess::new(data.clone(), kernel.clone())?
        .with_options(options)
        .predict(mean, targets)
}

/// Latent posterior with a linear trend; see [`GaussianProcess::predict_basis`].
pub fn gpr_predict_basis(
    data: &Dataset,
    kernel: &KernelSpec,
    mean: &BasisMean,
    targets: &DMatrix<f64>,
) -> Result<GaussianPredictive> {
    GaussianProcess::new(data.clone(), kernel.clone())?.predict_basis(mean, targets)
}

/// The MAP predictor of a Gaussian predictive is its mean.
pub fn map_predict(pred: &GaussianPredictive) -> DVector<f64> {
    pred.mean.clone()
}
