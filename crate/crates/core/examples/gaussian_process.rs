//! Gaussian-process posteriors: known mean, and a linear trend with a
//! Gaussian or noninformative prior on its coefficients.
//!
//! ```bash
//! cargo run -p blupkit --example gaussian_process
//! ```

use blupkit::gpr::{map_predict, GaussianProcess, GprOptions};
use blupkit::kernels::{Basis, BasisMean, Dataset, KernelSpec, MeanSpec};
use blupkit::kriging::KrigingModel;
use nalgebra::{DMatrix, DVector};

fn main() -> blupkit::Result<()> {
    let data = Dataset::from_1d(&[0.2, 1.1, 1.9, 3.0, 4.2], &[0.9, 1.8, 1.7, 2.9, 3.6], 0.01)?;
    let kernel = KernelSpec::squared_exponential(0.4, 0.8)?;
    let model = KrigingModel::new(data, kernel)?;
    let gp = GaussianProcess::from_model(model.clone());
    let targets = DMatrix::from_column_slice(4, 1, &[0.5, 2.5, 5.0, 7.0]);

    let known = gp.predict(&MeanSpec::constant(2.0), &targets)?;
    println!("known mean 2.0:\n  mean {:.4?}\n  var  {:.4?}", known.mean.as_slice(), known.variance().as_slice());
    let blup = model.blup(&MeanSpec::constant(2.0), &[5.0])?;
    println!("  BLUP at x = 5: {:.6} (var {:.6})", blup.mean, blup.error_variance);

    let observed = gp.clone().with_options(GprOptions { observation_noise: true });
    let y_pred = observed.predict(&MeanSpec::constant(2.0), &targets)?;
    println!("  var of a new observation {:.4?}", y_pred.variance().as_slice());

    let linear = Basis::linear(1);
    let flat = gp.predict_basis(&BasisMean::unknown(linear.clone()), &targets)?;
    println!("\nnoninformative linear trend:\n  MAP  {:.4?}\n  var  {:.4?}", map_predict(&flat).as_slice(), flat.variance().as_slice());

    for tau in [1e-6, 1.0, 1e8] {
        let prior = BasisMean::unknown(linear.clone())
            .with_prior(DVector::from_vec(vec![2.0, 0.0]), DMatrix::identity(2, 2) * tau)?;
        let p = gp.predict_basis(&prior, &targets)?;
        println!("prior B = {tau:e} I:\n  mean {:.4?}\n  var  {:.4?}", p.mean.as_slice(), p.variance().as_slice());
    }

    println!("\njoint posterior covariance (noninformative):\n{:.4}", flat.covariance);
    Ok(())
}
