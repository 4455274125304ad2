//! Ordinary Kriging three ways: the inverted block system, the scalar
//! elimination of the multiplier, and Simple Kriging with the GLS mean
//! plugged in. All three give the same predictor.
//!
//! ```bash
//! cargo run -p blupkit --example ordinary_kriging_paths
//! ```

use blupkit::kernels::{Basis, Dataset, KernelSpec};
use blupkit::kriging::KrigingModel;

fn main() -> blupkit::Result<()> {
    let data = Dataset::from_1d(&[0.0, 1.0, 3.0, 3.5], &[1.0, 2.0, 0.0, 0.4], 0.0)?;
    let model = KrigingModel::new(data, KernelSpec::squared_exponential(1.0, 1.0)?)?;
    let system = model.ordinary_system()?;
    let trend = model.trend(&Basis::constant())?;

    println!("GLS constant mean: {:.6}\n", model.gls_constant()?);
    println!("{:>5} {:>22} {:>22} {:>22}", "x", "block system", "direct", "sk + gls");
    for t in [-1.0, 0.5, 2.0, 3.2, 6.0] {
        let a = system.predict(&[t])?;
        let b = model.ordinary_direct(&[t])?;
        let c = trend.sk_with_plugin_mean(&[t])?;
        println!(
            "{t:>5.1} {:>11.6} ({:>8.5}) {:>11.6} ({:>8.5}) {:>11.6} ({:>8.5})",
            a.mean, a.error_variance, b.mean, b.error_variance, c.mean, c.error_variance
        );
    }

    let p = system.predict(&[2.0])?;
    println!("\nweights at x = 2: {:.5?} (sum {:.12})", p.weights.lambda.as_slice(), p.weights.lambda.sum());
    println!("multiplier mu~ = {:.6}", p.weights.mu_tilde[0]);
    Ok(())
}
