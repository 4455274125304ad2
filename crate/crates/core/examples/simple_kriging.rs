//! Known-mean prediction: Simple Kriging on clean data and the general BLUP
//! once observation noise is added.
//!
//! ```bash
//! cargo run -p blupkit --example simple_kriging
//! ```

use blupkit::kernels::{Dataset, KernelFamily, KernelSpec, MeanSpec};
use blupkit::kriging::KrigingModel;

fn main() -> blupkit::Result<()> {
    let x = [0.0, 0.8, 1.5, 2.7, 3.1, 4.4];
    let y = [1.2, 1.9, 1.4, 0.1, 0.3, 1.0];
    let kernel = KernelSpec::isotropic(KernelFamily::Matern52, 0.6, 0.9)?;
    let mean = MeanSpec::constant(1.0);

    let clean = KrigingModel::new(Dataset::from_1d(&x, &y, 0.0)?, kernel.clone())?;
    let noisy = KrigingModel::new(Dataset::from_1d(&x, &y, 0.05)?, kernel)?;

    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "x", "sk", "sk var", "blup", "blup var");
    for i in 0..=18 {
        let t = [i as f64 * 0.25];
        let sk = clean.simple(&mean, &t)?;
        let bl = noisy.blup(&mean, &t)?;
        println!(
            "{:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            t[0], sk.mean, sk.error_variance, bl.mean, bl.error_variance
        );
    }

    // At a data site SK returns the observation; with noise the BLUP smooths.
    let at = [x[3]];
    let sk = clean.simple(&mean, &at)?;
    let bl = noisy.blup(&mean, &at)?;
    println!("\nat x = {}: y = {}, sk = {:.6} (var {:.1e}), blup = {:.6} (var {:.4})", at[0], y[3], sk.mean, sk.error_variance, bl.mean, bl.error_variance);
    println!("intercept lambda0 = {:.6}, weights = {:.4?}", bl.weights.lambda0, bl.weights.lambda.as_slice());
    Ok(())
}
