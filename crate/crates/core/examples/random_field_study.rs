//! Replicated study on simulated fields: least squares against the Kriging
//! family and the GP, with interval coverage.
//!
//! ```bash
//! cargo run --release -p blupkit --example random_field_study
//! ```

use blupkit::kernels::{Basis, KernelSpec, MeanSpec};
use blupkit::simulate::{run_study, Predictor, StudyConfig};

fn main() -> blupkit::Result<()> {
    let cfg = StudyConfig {
        kernel: KernelSpec::squared_exponential(1.0, 0.2)?,
        true_mean: MeanSpec::constant(5.0),
        noise_variance: 0.01,
        n_train: 30,
        n_test: 20,
        domain: vec![[0.0, 1.0]],
        replicates: 200,
        seed: 1,
        predictors: vec![Predictor::Ls, Predictor::Sk, Predictor::Ok, Predictor::Uk, Predictor::Gpr],
        ls_basis: Basis::constant(),
        uk_basis: None,
    };
    let report = run_study(&cfg)?;
    println!("{:>5} {:>10} {:>10} {:>12}", "", "mse", "se", "mean var");
    for s in &report.predictors {
        let ev = s.mean_error_variance.map_or("-".to_string(), |v| format!("{v:.5}"));
        println!("{:>5} {:>10.5} {:>10.5} {:>12}", format!("{:?}", s.predictor), s.mse_mean, s.mse_std_error, ev);
    }
    if let Some(c) = &report.gpr_coverage {
        println!("\nGP 95% intervals: {}/{} covered ({:.3})", c.covered, c.total, c.rate);
    }
    println!("failures: {}", report.failures.len());
    Ok(())
}
