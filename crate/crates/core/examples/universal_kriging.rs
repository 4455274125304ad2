//! Universal Kriging with a linear trend, compared with Ordinary Kriging and
//! the least-squares trend fit when extrapolating away from the data.
//!
//! ```bash
//! cargo run -p blupkit --example universal_kriging
//! ```

use blupkit::kernels::{Basis, Dataset, KernelFamily, KernelSpec};
use blupkit::kriging::{KrigingModel, LeastSquaresFit};

fn main() -> blupkit::Result<()> {
    let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
    let y: Vec<f64> = x.iter().map(|&v| 0.8 * v + (1.7 * v).sin() * 0.6).collect();
    let data = Dataset::from_1d(&x, &y, 0.0)?;
    let kernel = KernelSpec::isotropic(KernelFamily::Matern32, 0.5, 0.7)?;
    let model = KrigingModel::new(data.clone(), kernel)?;

    let linear = Basis::linear(1);
    let trend = model.trend(&linear)?;
    let ls = LeastSquaresFit::new(&data, &linear)?;
    println!("GLS trend beta = {:.4?}", trend.beta().as_slice());
    println!("OLS trend beta = {:.4?}", ls.beta().as_slice());

    println!("{:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "x", "uk", "uk var", "ok", "ok var", "ls");
    for t in [2.25, 5.5, 6.5, 8.0, 10.0] {
        let uk = trend.universal(&[t])?;
        let ok = model.ordinary(&[t])?;
        println!(
            "{t:>5.2} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            uk.mean, uk.error_variance, ok.mean, ok.error_variance, ls.predict(&[t])
        );
    }

    let quad = Basis::polynomial_1d(2);
    let p = model.trend(&quad)?.universal(&[8.0])?;
    println!("\nquadratic trend at x = 8: {:.4} (var {:.4})", p.mean, p.error_variance);
    Ok(())
}
