//! Semivariograms: the model curve of each kernel family and a binned
//! empirical estimate from a simulated field.
//!
//! ```bash
//! cargo run -p blupkit --example variogram
//! ```

use blupkit::cli::empirical_semivariogram;
use blupkit::kernels::{semivariogram_of, KernelFamily, KernelSpec, MeanSpec};
use blupkit::simulate::sample_field;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> blupkit::Result<()> {
    let families = [
        KernelFamily::SquaredExponential,
        KernelFamily::Exponential,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
    ];
    let kernels: Vec<KernelSpec> = families
        .iter()
        .map(|&f| KernelSpec::isotropic(f, 1.0, 0.3))
        .collect::<blupkit::Result<_>>()?;
    println!("{:>6} {:>9} {:>9} {:>9} {:>9}", "lag", "se", "exp", "m32", "m52");
    for i in 0..=10 {
        let h = i as f64 * 0.1;
        print!("{h:>6.2}");
        for k in &kernels {
            print!(" {:>9.4}", semivariogram_of(k, h)?);
        }
        println!();
    }

    // One realization on scattered 2-D sites wanders well away from the model
    // at large lags; averaging over realizations recovers it.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(200, 2, |_, _| rng.random::<f64>());
    let kernel = KernelSpec::isotropic(KernelFamily::Exponential, 1.0, 0.2)?;
    let noise = 0.05;
    let (bins, max_lag, reps) = (12, 0.6, 100);
    let single = empirical_semivariogram(&x, &sample_field(&kernel, &MeanSpec::zero(), &x, noise, 0)?, bins, max_lag);
    let mut mean = vec![0.0; bins];
    for seed in 0..reps {
        let y = sample_field(&kernel, &MeanSpec::zero(), &x, noise, seed)?;
        for (acc, bin) in mean.iter_mut().zip(empirical_semivariogram(&x, &y, bins, max_lag)) {
            *acc += bin.semivariance.unwrap_or(0.0) / reps as f64;
        }
    }
    println!("\n{:>6} {:>7} {:>8} {:>8} {:>8}", "lag", "pairs", "one", "average", "model");
    for (bin, avg) in single.iter().zip(&mean) {
        let model = semivariogram_of(&kernel, bin.center)? + noise;
        let one = bin.semivariance.map_or("-".to_string(), |g| format!("{g:.4}"));
        println!("{:>6.3} {:>7} {:>8} {:>8.4} {:>8.4}", bin.center, bin.pairs, one, avg, model);
    }
    Ok(())
}
