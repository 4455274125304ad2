//! Gaussian random-field sampling and a replicated prediction study.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)`. In a study, replicate `r` uses stream `r` of that
//! generator, so reports do not depend on thread scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::GaussianProcess;
use crate::kernels::{Basis, Dataset, KernelSpec, MeanSpec};
use crate::kriging::{KrigingModel, LeastSquaresFit};
use crate::linalg::{self, JitterPolicy};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Relative jitter allowed when factoring a sampling covariance.
const SAMPLING_JITTER: f64 = 1e-6;

fn draw_mvn(
    kernel: &KernelSpec,
    mean: &MeanSpec,
    x: &DMatrix<f64>,
    noise_variance: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    let mut out = mean.eval_rows(x)?;
    let cov = kernel.gram(x, noise_variance)?;
    let scale = cov.diagonal().max();
    if scale == 0.0 {
        return Ok(out);
    }
    let factor = linalg::spd_factor(
        &cov,
        JitterPolicy::Adaptive {
            max_jitter: SAMPLING_JITTER * scale,
        },
    )?;
    let z = DVector::from_fn(x.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    out += factor.lower() * z;
    Ok(out)
}

/// One draw of `Y(X) = Z(X) + eps` with `Z ~ GP(m, k)` and `eps ~ N(0, noise I)`.
pub fn sample_field(
    kernel: &KernelSpec,
    mean: &MeanSpec,
    x: &DMatrix<f64>,
    noise_variance: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(Error::invalid("noise variance must be finite and nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_mvn(kernel, mean, x, noise_variance, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predictor {
    /// Ordinary least squares on `ls_basis`, ignoring correlation.
    Ls,
    /// Known-mean BLUP with the true mean.
    Sk,
    Ok,
    /// Universal Kriging on `uk_basis`.
    Uk,
    /// Known-mean Gaussian process; also scored for interval coverage.
    Gpr,
}

impl Predictor {
    fn name(self) -> &'static str {
        match self {
            Predictor::Ls => "LS",
            Predictor::Sk => "SK",
            Predictor::Ok => "OK",
            Predictor::Uk => "UK",
            Predictor::Gpr => "GPR",
        }
    }
}

fn default_ls_basis() -> Basis {
    Basis::constant()
}

/// Study configuration. The same kernel and mean generate the data and are
/// handed to the predictors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub kernel: KernelSpec,
    pub true_mean: MeanSpec,
    #[serde(default)]
    pub noise_variance: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// `[lo, hi]` per dimension; locations are uniform over the box.
    pub domain: Vec<[f64; 2]>,
    pub replicates: usize,
    pub seed: u64,
    pub predictors: Vec<Predictor>,
    #[serde(default = "default_ls_basis")]
    pub ls_basis: Basis,
    /// Defaults to the linear basis `(1, x1, .., xd)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uk_basis: Option<Basis>,
}

impl StudyConfig {
    fn uk_basis(&self) -> Basis {
        self.uk_basis
            .clone()
            .unwrap_or_else(|| Basis::linear(self.domain.len()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 || self.n_train == 0 || self.n_test == 0 {
            return Err(Error::invalid("replicates, n_train and n_test must be positive"));
        }
        if self.predictors.is_empty() {
            return Err(Error::invalid("no predictors selected"));
        }
        if self.domain.is_empty() {
            return Err(Error::invalid("domain needs at least one dimension"));
        }
        for [lo, hi] in &self.domain {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("bad domain interval [{lo}, {hi}]")));
            }
        }
        if let Some(d) = self.kernel.dimension() {
            if d != self.domain.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.domain.len(),
                    found: d,
                });
            }
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::invalid("noise variance must be finite and nonnegative"));
        }
        if !self.true_mean.is_identified() {
            return Err(Error::MeanNotIdentified(
                "the true mean of a study needs fixed parameters".into(),
            ));
        }
        let d = self.domain.len();
        for (pred, basis) in [(Predictor::Uk, self.uk_basis()), (Predictor::Ls, self.ls_basis.clone())] {
            if self.predictors.contains(&pred) {
                basis.check_dimension(d)?;
                if self.n_train < basis.len() {
                    return Err(Error::invalid(format!(
                        "{} needs n_train >= {} basis functions",
                        pred.name(),
                        basis.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSummary {
    pub predictor: Predictor,
    /// Mean over successful replicates of the per-replicate test MSE.
    pub mse_mean: f64,
    pub mse_std_error: f64,
    /// Average reported error variance over test points, where defined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_error_variance: Option<f64>,
    pub successful_replicates: usize,
    /// Per-replicate test MSE, `null` where the predictor failed.
    pub replicate_mse: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub nominal: f64,
    pub covered: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    /// `None` when the replicate failed before any predictor ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictor: Option<Predictor>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub replicates: usize,
    pub predictors: Vec<PredictorSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gpr_coverage: Option<Coverage>,
    pub failures: Vec<ReplicateFailure>,
}

impl StudyReport {
    pub fn summary(&self, predictor: Predictor) -> Option<&PredictorSummary> {
        self.predictors.iter().find(|s| s.predictor == predictor)
    }
}

#[derive(Debug, Clone, Default)]
struct Score {
    mse: f64,
    error_variance: Option<f64>,
    covered: usize,
}

struct Replicate {
    scores: Vec<std::result::Result<Score, String>>,
}

fn uniform_locations(domain: &[[f64; 2]], n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, domain.len());
    for i in 0..n {
        for (j, [lo, hi]) in domain.iter().enumerate() {
            x[(i, j)] = lo + (hi - lo) * rng.random::<f64>();
        }
    }
    x
}

fn mse(pred: &[f64], truth: &DVector<f64>) -> f64 {
    pred.iter()
        .zip(truth.iter())
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / truth.len() as f64
}

fn run_replicate(cfg: &StudyConfig, r: usize) -> Result<Replicate> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(r as u64);
    let (nt, ns) = (cfg.n_train, cfg.n_test);
    let x_all = uniform_locations(&cfg.domain, nt + ns, &mut rng);
    let z = draw_mvn(&cfg.kernel, &cfg.true_mean, &x_all, 0.0, &mut rng)?;
    let noise_sd = cfg.noise_variance.sqrt();
    let mut y = z.rows(0, nt).into_owned();
    for v in y.iter_mut() {
        *v += noise_sd * rng.sample::<f64, _>(StandardNormal);
    }
    let truth = z.rows(nt, ns).into_owned();
    let x_train = x_all.rows(0, nt).into_owned();
    let x_test = x_all.rows(nt, ns).into_owned();
    let data = Dataset::new(x_train, y, cfg.noise_variance)?;
    let test_pts = crate::kernels::rows(&x_test);

    let model = KrigingModel::new(data.clone(), cfg.kernel.clone());
    let scores = cfg
        .predictors
        .iter()
        .map(|&p| score(cfg, p, &data, model.as_ref(), &x_test, &test_pts, &truth).map_err(|e| e.to_string()))
        .collect();
    Ok(Replicate { scores })
}

fn kriging_score<F>(pts: &[Vec<f64>], truth: &DVector<f64>, f: F) -> Result<Score>
where
    F: Fn(&[f64]) -> Result<crate::kriging::Prediction>,
{
    let preds = pts.iter().map(|x| f(x)).collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = preds.iter().map(|p| p.mean).collect();
    let ev = preds.iter().map(|p| p.error_variance).sum::<f64>() / preds.len() as f64;
    Ok(Score {
        mse: mse(&means, truth),
        error_variance: Some(ev),
        covered: 0,
    })
}

fn score(
    cfg: &StudyConfig,
    predictor: Predictor,
    data: &Dataset,
    model: std::result::Result<&KrigingModel, &Error>,
    x_test: &DMatrix<f64>,
    pts: &[Vec<f64>],
    truth: &DVector<f64>,
) -> Result<Score> {
    if predictor == Predictor::Ls {
        let fit = LeastSquaresFit::new(data, &cfg.ls_basis)?;
        let preds: Vec<f64> = pts.iter().map(|x| fit.predict(x)).collect();
        return Ok(Score {
            mse: mse(&preds, truth),
            ..Score::default()
        });
    }
    let model = model.map_err(Clone::clone)?;
    match predictor {
        Predictor::Sk => kriging_score(pts, truth, |x| model.blup(&cfg.true_mean, x)),
        Predictor::Ok => {
            let sys = model.ordinary_system()?;
            kriging_score(pts, truth, |x| sys.predict(x))
        }
        Predictor::Uk => {
            let fit = model.trend(&cfg.uk_basis())?;
            kriging_score(pts, truth, |x| fit.universal(x))
        }
        Predictor::Gpr => {
            let gp = GaussianProcess::from_model(model.clone());
            let post = gp.predict(&cfg.true_mean, x_test)?;
            let covered = (0..truth.len())
                .filter(|&i| {
                    let (lo, hi) = post.interval(i, Z95);
                    lo <= truth[i] && truth[i] <= hi
                })
                .count();
            Ok(Score {
                mse: mse(post.mean.as_slice(), truth),
                error_variance: Some(post.variance().mean()),
                covered,
            })
        }
        Predictor::Ls => unreachable!(),
    }
}

/// Run all replicates (in parallel) and aggregate.
///
/// Failures of single predictors or replicates are recorded in the report.
/// The study as a whole fails only if no replicate produced any score.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let outcomes: Vec<Result<Replicate>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect();

    let mut failures = Vec::new();
    let mut per_pred: Vec<Vec<Option<Score>>> = vec![Vec::with_capacity(cfg.replicates); cfg.predictors.len()];
    let mut any_success = false;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Err(e) => {
                failures.push(ReplicateFailure {
                    replicate: r,
                    predictor: None,
                    message: e.to_string(),
                });
                per_pred.iter_mut().for_each(|v| v.push(None));
            }
            Ok(rep) => {
                for (j, s) in rep.scores.into_iter().enumerate() {
                    match s {
                        Ok(s) => {
                            any_success = true;
                            per_pred[j].push(Some(s));
                        }
                        Err(message) => {
                            failures.push(ReplicateFailure {
                                replicate: r,
                                predictor: Some(cfg.predictors[j]),
                                message,
                            });
                            per_pred[j].push(None);
                        }
                    }
                }
            }
        }
    }
    if !any_success {
        let first = failures.first().map(|f| f.message.clone()).unwrap_or_default();
        return Err(Error::Numerical(format!(
            "all {} replicates failed; first error: {first}",
            cfg.replicates
        )));
    }

    let mut gpr_coverage = None;
    let predictors = cfg
        .predictors
        .iter()
        .zip(&per_pred)
        .map(|(&predictor, scores)| {
            let ok: Vec<&Score> = scores.iter().flatten().collect();
            let k = ok.len();
            let mse_mean = if k > 0 { ok.iter().map(|s| s.mse).sum::<f64>() / k as f64 } else { f64::NAN };
            let mse_std_error = if k > 1 {
                let var = ok.iter().map(|s| (s.mse - mse_mean).powi(2)).sum::<f64>() / (k - 1) as f64;
                (var / k as f64).sqrt()
            } else {
                0.0
            };
            let mean_error_variance = if k > 0 && ok[0].error_variance.is_some() {
                Some(ok.iter().filter_map(|s| s.error_variance).sum::<f64>() / k as f64)
            } else {
                None
            };
            if predictor == Predictor::Gpr && k > 0 {
                let covered = ok.iter().map(|s| s.covered).sum();
                let total = k * cfg.n_test;
                gpr_coverage = Some(Coverage {
                    nominal: 0.95,
                    covered,
                    total,
                    rate: covered as f64 / total as f64,
                });
            }
            PredictorSummary {
                predictor,
                mse_mean,
                mse_std_error,
                mean_error_variance,
                successful_replicates: k,
                replicate_mse: scores.iter().map(|s| s.as_ref().map(|s| s.mse)).collect(),
            }
        })
        .collect();

    Ok(StudyReport {
        seed: cfg.seed,
        replicates: cfg.replicates,
        predictors,
        gpr_coverage,
        failures,
    })
}
