//! Command-line front end: `predict`, `variogram`, `study` and `verify`.
//!
//! Exit codes: 0 success, 2 input or parse error, 3 singular or numerically
//! inconsistent system, 4 study failure, 5 verification failure.
//!
//! Data files are comma-separated with a header naming the coordinate
//! columns `x1..xd` and the response column `y`. Point files use the same
//! layout without `y`. Numbers are written in their shortest round-trip
//! decimal form.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::gpr::GaussianProcess;
use crate::kernels::{semivariogram_of, Basis, BasisMean, Dataset, KernelSpec, MeanSpec, ModelConfig};
use crate::kriging::{KrigingModel, Method};
use crate::linalg::JitterPolicy;
use crate::simulate::{run_study, StudyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_STUDY: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

/// Relative tolerance of the `verify` identities.
pub const VERIFY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "blupkit", version, about = "Kriging and Gaussian-process prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predict mean and error variance at target locations.
    Predict(PredictArgs),
    /// Binned empirical semivariogram, optionally next to a model.
    Variogram(VariogramArgs),
    /// Run a replicated simulation study.
    Study(StudyArgs),
    /// Check that the alternative prediction routes agree on this data.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct TargetArgs {
    /// Grid axis `lo:hi:count`, once per dimension (last dimension varies fastest).
    #[arg(long, value_name = "LO:HI:COUNT", allow_hyphen_values = true)]
    grid: Vec<String>,
    /// CSV of target locations with header x1..xd.
    #[arg(long, value_name = "PATH", conflicts_with = "grid")]
    points: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    targets: TargetArgs,
    /// Output CSV (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VariogramArgs {
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    #[arg(long)]
    bins: usize,
    #[arg(long)]
    max_lag: f64,
    /// Model config whose semivariogram is added as a column.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    targets: TargetArgs,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Singular { .. } | Error::Numerical(_) => EXIT_SINGULAR,
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::MeanNotIdentified(_) => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_INPUT
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Predict(a) => cmd_predict(&a, stdout, stderr),
        Command::Variogram(a) => cmd_variogram(&a, stdout),
        Command::Study(a) => cmd_study(&a, stdout, stderr),
        Command::Verify(a) => cmd_verify(&a, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

/// Rows of a CSV table: coordinates and, when present, the `y` column.
#[derive(Debug, Clone)]
pub struct PointTable {
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
}

impl PointTable {
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Read a table with header `x1..xd[,y]`. Errors name the offending row.
pub fn read_table(path: &Path, require_y: bool) -> std::result::Result<PointTable, String> {
    let show = path.display();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{show}: {e}"))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| format!("{show}: {e}"))?
        .iter()
        .map(str::to_string)
        .collect();
    let y_col = header.iter().position(|h| h == "y");
    if require_y && y_col.is_none() {
        return Err(format!("{show}: header has no `y` column"));
    }
    let d = header.len() - usize::from(y_col.is_some());
    if d == 0 {
        return Err(format!("{show}: header has no coordinate columns"));
    }
    let x_cols = (1..=d)
        .map(|k| {
            header
                .iter()
                .position(|h| *h == format!("x{k}"))
                .ok_or_else(|| format!("{show}: expected coordinate columns x1..x{d}, missing x{k}"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| format!("{show}: row {row}: {e}"))?;
        let line = rec.position().map_or(row + 1, |p| p.line() as usize);
        let field = |c: usize| -> std::result::Result<f64, String> {
            let s = &rec[c];
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!(
                    "{show}: row {row} (line {line}): column {} has invalid value {s:?}",
                    header[c]
                )),
            }
        };
        for &c in &x_cols {
            xs.push(field(c)?);
        }
        if let Some(c) = y_col {
            ys.push(field(c)?);
        }
    }
    if xs.is_empty() {
        return Err(format!("{show}: no data rows"));
    }
    let n = xs.len() / d;
    Ok(PointTable {
        x: DMatrix::from_row_slice(n, d, &xs),
        y: y_col.map(|_| DVector::from_vec(ys)),
    })
}

/// Expand `lo:hi:count` axes into grid rows, last axis varying fastest.
pub fn parse_grid(specs: &[String]) -> std::result::Result<DMatrix<f64>, String> {
    let mut axes = Vec::with_capacity(specs.len());
    for spec in specs {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || format!("grid axis {spec:?} is not lo:hi:count");
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(bad());
        }
        let axis: Vec<f64> = if count == 1 {
            vec![lo]
        } else {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| if i == count - 1 { hi } else { lo + step * i as f64 })
                .collect()
        };
        axes.push(axis);
    }
    let total: usize = axes.iter().map(Vec::len).product();
    let d = axes.len();
    let mut grid = DMatrix::zeros(total, d);
    for r in 0..total {
        let mut rem = r;
        for j in (0..d).rev() {
            let len = axes[j].len();
            grid[(r, j)] = axes[j][rem % len];
            rem /= len;
        }
    }
    Ok(grid)
}

fn load_targets(args: &TargetArgs, d: usize) -> CliResult<DMatrix<f64>> {
    let targets = if let Some(path) = &args.points {
        read_table(path, false).map_err(Failure::input)?.x
    } else if !args.grid.is_empty() {
        parse_grid(&args.grid).map_err(Failure::input)?
    } else {
        return Err(Failure::input("no targets: pass --grid (once per dimension) or --points"));
    };
    if targets.ncols() != d {
        return Err(Failure::input(format!(
            "targets have {} coordinates but the data has {d}",
            targets.ncols()
        )));
    }
    Ok(targets)
}

fn load_config(path: &Path) -> CliResult<ModelConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Dataset and factored model from the data file and config.
fn load_model(data: &Path, cfg: &ModelConfig) -> CliResult<KrigingModel> {
    let table = read_table(data, true).map_err(Failure::input)?;
    if let Some(d) = cfg.kernel.dimension() {
        if d != table.dim() {
            return Err(Failure::input(format!(
                "kernel has {d} lengthscales but the data has {} coordinates",
                table.dim()
            )));
        }
    }
    let y = table.y.expect("y column required");
    let dataset = Dataset::new(table.x, y, cfg.noise_variance)?;
    let policy = match cfg.max_jitter {
        Some(max_jitter) => JitterPolicy::Adaptive { max_jitter },
        None => JitterPolicy::None,
    };
    Ok(KrigingModel::with_jitter(dataset, cfg.kernel.clone(), policy)?)
}

/// Prediction route named by the config's `variant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Sk,
    Ok,
    Uk,
    Gpr,
    GprBasis,
}

fn variant_of(cfg: &ModelConfig) -> CliResult<Variant> {
    match cfg.variant.as_deref() {
        Some("sk") => Ok(Variant::Sk),
        Some("ok") => Ok(Variant::Ok),
        Some("uk") => Ok(Variant::Uk),
        Some("gpr") => Ok(Variant::Gpr),
        Some("gpr-basis") => Ok(Variant::GprBasis),
        Some(other) => Err(Failure::input(format!(
            "unknown variant {other:?}; expected sk, ok, uk, gpr or gpr-basis"
        ))),
        None => Ok(match &cfg.mean {
            MeanSpec::Known(_) => Variant::Sk,
            MeanSpec::ConstantUnknown => Variant::Ok,
            MeanSpec::Basis(b) if b.beta.is_some() => Variant::Sk,
            MeanSpec::Basis(_) => Variant::Uk,
        }),
    }
}

fn trend_basis(mean: &MeanSpec, variant: &str) -> CliResult<Basis> {
    mean.basis()
        .ok_or_else(|| Failure::input(format!("variant {variant} needs a constant_unknown or basis mean")))
}

fn require_identified(mean: &MeanSpec, variant: &str) -> CliResult<()> {
    if mean.is_identified() {
        Ok(())
    } else {
        Err(Failure::input(format!("variant {variant} needs a known mean")))
    }
}

/// `(mean, error_variance)` per target for the configured variant.
fn predict_all(model: &KrigingModel, cfg: &ModelConfig, targets: &DMatrix<f64>) -> CliResult<Vec<(f64, f64)>> {
    let from_kriging = |method: Method| -> CliResult<Vec<(f64, f64)>> {
        Ok(model
            .predict_batch(&method, targets)?
            .into_iter()
            .map(|p| (p.mean, p.error_variance))
            .collect())
    };
    match variant_of(cfg)? {
        Variant::Sk => {
            require_identified(&cfg.mean, "sk")?;
            from_kriging(Method::Blup(cfg.mean.clone()))
        }
        Variant::Ok => from_kriging(Method::Ordinary),
        Variant::Uk => from_kriging(Method::Universal(trend_basis(&cfg.mean, "uk")?)),
        Variant::Gpr => {
            require_identified(&cfg.mean, "gpr")?;
            let gp = GaussianProcess::from_model(model.clone());
            per_point(targets, |t| gp.predict(&cfg.mean, t))
        }
        Variant::GprBasis => {
            let bm = match &cfg.mean {
                MeanSpec::Basis(b) => b.clone(),
                other => BasisMean::unknown(trend_basis(other, "gpr-basis")?),
            };
            let gp = GaussianProcess::from_model(model.clone());
            per_point(targets, |t| gp.predict_basis(&bm, t))
        }
    }
}

/// Marginal posteriors one target at a time, so large grids never build the
/// full joint covariance.
fn per_point<F>(targets: &DMatrix<f64>, f: F) -> CliResult<Vec<(f64, f64)>>
where
    F: Fn(&DMatrix<f64>) -> crate::Result<crate::gpr::GaussianPredictive> + Sync,
{
    use rayon::prelude::*;
    (0..targets.nrows())
        .into_par_iter()
        .map(|i| {
            let p = f(&targets.rows(i, 1).into_owned())?;
            Ok((p.mean[0], p.covariance[(0, 0)]))
        })
        .collect::<crate::Result<Vec<_>>>()
        .map_err(Failure::from)
}

fn coordinate_header(d: usize) -> String {
    (1..=d).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",")
}

fn cmd_predict(a: &PredictArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let model = load_model(&a.data, &cfg)?;
    if model.jitter_used() > 0.0 {
        let _ = writeln!(
            stderr,
            "warning: training covariance needed jitter {:e} to factor",
            model.jitter_used()
        );
    }
    let targets = load_targets(&a.targets, model.data().dim())?;
    let preds = predict_all(&model, &cfg, &targets)?;
    let mut text = format!("{},mean,error_variance\n", coordinate_header(targets.ncols()));
    for (i, (mean, var)) in preds.iter().enumerate() {
        for v in targets.row(i).iter() {
            let _ = write!(text, "{v},");
        }
        let _ = writeln!(text, "{mean},{var}");
    }
    emit(&a.out, &text, stdout)
}

/// One lag bin of an empirical semivariogram.
#[derive(Debug, Clone, PartialEq)]
pub struct LagBin {
    pub center: f64,
    pub pairs: usize,
    /// `None` for a bin without pairs.
    pub semivariance: Option<f64>,
}

/// `gamma_hat(h) = sum (y_i - y_j)^2 / (2 |N(h)|)` over pairs whose distance
/// falls in each of `bins` equal-width bins on `[0, max_lag]`.
pub fn empirical_semivariogram(x: &DMatrix<f64>, y: &DVector<f64>, bins: usize, max_lag: f64) -> Vec<LagBin> {
    let width = max_lag / bins as f64;
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for i in 0..x.nrows() {
        for j in 0..i {
            let h = (x.row(i) - x.row(j)).norm();
            if h > max_lag {
                continue;
            }
            let b = ((h / width) as usize).min(bins - 1);
            sums[b] += (y[i] - y[j]).powi(2);
            counts[b] += 1;
        }
    }
    (0..bins)
        .map(|b| LagBin {
            center: (b as f64 + 0.5) * width,
            pairs: counts[b],
            semivariance: (counts[b] > 0).then(|| sums[b] / (2.0 * counts[b] as f64)),
        })
        .collect()
}

fn cmd_variogram(a: &VariogramArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if a.bins == 0 || !(a.max_lag.is_finite() && a.max_lag > 0.0) {
        return Err(Failure::input("--bins must be positive and --max-lag a positive number"));
    }
    let table = read_table(&a.data, true).map_err(Failure::input)?;
    if table.x.nrows() < 2 {
        return Err(Failure::input("a variogram needs at least two observations"));
    }
    let model: Option<(KernelSpec, f64)> = match &a.config {
        Some(path) => {
            let cfg = load_config(path)?;
            Some((cfg.kernel, cfg.noise_variance))
        }
        None => None,
    };
    let y = table.y.as_ref().expect("y column required");
    let bins = empirical_semivariogram(&table.x, y, a.bins, a.max_lag);
    let mut text = String::from("lag_center,pair_count,empirical_semivariance");
    text.push_str(if model.is_some() { ",model_semivariance\n" } else { "\n" });
    for bin in &bins {
        let _ = write!(text, "{},{},", bin.center, bin.pairs);
        if let Some(g) = bin.semivariance {
            let _ = write!(text, "{g}");
        }
        if let Some((kernel, noise)) = &model {
            let g = semivariogram_of(kernel, bin.center)? + noise;
            let _ = write!(text, ",{g}");
        }
        text.push('\n');
    }
    emit(&a.out, &text, stdout)
}

fn cmd_study(a: &StudyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Failure::input(format!("{}: {e}", a.config.display())))?;
    let mut cfg: StudyConfig =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", a.config.display())))?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let report = run_study(&cfg).map_err(|e| Failure {
        code: EXIT_STUDY,
        message: e.to_string(),
    })?;
    for f in &report.failures {
        let _ = writeln!(stderr, "warning: replicate {} failed: {}", f.replicate, f.message);
    }
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Failure {
        code: EXIT_STUDY,
        message: e.to_string(),
    })?;
    json.push('\n');
    emit(&a.out, &json, stdout)
}

/// Relative deviation `|a - b| / max(|a|, |b|, 1)`.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

struct Check {
    name: &'static str,
    deviation: Option<f64>,
}

fn max_dev(pairs: impl IntoIterator<Item = ((f64, f64), (f64, f64))>) -> f64 {
    pairs
        .into_iter()
        .map(|((m1, v1), (m2, v2))| relative_deviation(m1, m2).max(relative_deviation(v1, v2)))
        .fold(0.0, f64::max)
}

fn mean_var(model: &KrigingModel, method: Method, targets: &DMatrix<f64>) -> crate::Result<Vec<(f64, f64)>> {
    Ok(model
        .predict_batch(&method, targets)?
        .into_iter()
        .map(|p| (p.mean, p.error_variance))
        .collect())
}

fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(&a.config)?;
    let model = load_model(&a.data, &cfg)?;
    let d = model.data().dim();
    let targets = load_targets(&a.targets, d)?;
    let uk_basis = match &cfg.mean {
        MeanSpec::Basis(b) => b.basis.clone(),
        _ => Basis::linear(d),
    };
    let known = if cfg.mean.is_identified() {
        cfg.mean.clone()
    } else {
        MeanSpec::constant(model.gls_constant()?)
    };

    let ok = mean_var(&model, Method::Ordinary, &targets)?;
    let ok_direct = mean_var(&model, Method::OrdinaryDirect, &targets)?;
    let ok_plugin = mean_var(&model, Method::PluginMean(Basis::constant()), &targets)?;
    let uk = mean_var(&model, Method::Universal(uk_basis.clone()), &targets)?;
    let uk_plugin = mean_var(&model, Method::PluginMean(uk_basis.clone()), &targets)?;
    let blup = mean_var(&model, Method::Blup(known.clone()), &targets)?;
    let gp = GaussianProcess::from_model(model.clone());
    let gpr = gp.predict(&known, &targets)?;
    let gpr: Vec<(f64, f64)> = gpr.mean.iter().copied().zip(gpr.variance().iter().copied()).collect();
    let gpr_basis = gp.predict_basis(&BasisMean::unknown(uk_basis.clone()), &targets)?;
    let gpr_basis: Vec<(f64, f64)> = gpr_basis
        .mean
        .iter()
        .copied()
        .zip(gpr_basis.variance().iter().copied())
        .collect();

    let zip = |a: &[(f64, f64)], b: &[(f64, f64)]| max_dev(a.iter().copied().zip(b.iter().copied()));
    let mut checks = vec![
        Check { name: "OK = OK-direct", deviation: Some(zip(&ok, &ok_direct)) },
        Check { name: "OK = SK+GLS", deviation: Some(zip(&ok, &ok_plugin)) },
        Check { name: "UK = SK+GLS(beta)", deviation: Some(zip(&uk, &uk_plugin)) },
        Check { name: "GPR = SK", deviation: Some(zip(&gpr, &blup)) },
        Check { name: "GPR-basis = UK", deviation: Some(zip(&gpr_basis, &uk)) },
    ];
    let interpolation = if model.data().noise_variance() > 0.0 {
        None
    } else {
        let data = model.data();
        let y = data.y();
        let mut dev: f64 = 0.0;
        for method in [
            Method::Blup(known),
            Method::Ordinary,
            Method::OrdinaryDirect,
            Method::Universal(uk_basis.clone()),
            Method::PluginMean(uk_basis),
        ] {
            for (i, p) in model.predict_batch(&method, data.x())?.iter().enumerate() {
                dev = dev.max(relative_deviation(p.mean, y[i])).max(p.error_variance);
            }
        }
        Some(dev)
    };
    checks.push(Check { name: "interpolation", deviation: interpolation });

    let mut text = String::new();
    let mut failed = Vec::new();
    for c in &checks {
        let (dev, status) = match c.deviation {
            None => ("-".to_string(), "skipped (noisy)"),
            Some(v) if v <= VERIFY_TOLERANCE => (format!("{v:.3e}"), "pass"),
            Some(v) => {
                failed.push(format!("{} (max deviation {v:.3e})", c.name));
                (format!("{v:.3e}"), "FAIL")
            }
        };
        let _ = writeln!(text, "{:<20} {:>10}  {status}", c.name, dev);
    }
    let _ = stdout.write_all(text.as_bytes());
    if failed.is_empty() {
        Ok(())
    } else {
        let _ = stderr.flush();
        Err(Failure {
            code: EXIT_VERIFY,
            message: format!("verification failed: {}", failed.join("; ")),
        })
    }
}
