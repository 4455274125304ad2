//! The linear algebra underneath: SPD factorization with optional jitter,
//! block inversion through the Schur complement, and the saddle-point solve
//! used by the unbiased Kriging systems.
//!
//! ```bash
//! cargo run -p blupkit --example saddle_point
//! ```

use blupkit::linalg::{block_inverse, solve_saddle, spd_factor, JitterPolicy};
use nalgebra::{DMatrix, DVector};

fn main() -> blupkit::Result<()> {
    let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.6, 0.1, 0.6, 1.5, 0.4, 0.1, 0.4, 1.0]);
    let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.5, 1.0, 2.0]);
    let k = DVector::from_vec(vec![0.3, 0.8, 0.2]);
    let f = DVector::from_vec(vec![1.0, 0.7]);

    let sol = solve_saddle(&sigma, &m, &k, &f)?;
    println!("lambda = {:.6?}", sol.lambda.as_slice());
    println!("mu     = {:.6?}", sol.mu.as_slice());
    println!("M^T lambda = {:.6?} (target {:.6?})", (m.transpose() * &sol.lambda).as_slice(), f.as_slice());

    let inv = block_inverse(&sigma, &m, &m.transpose(), &DMatrix::zeros(2, 2))?;
    let mut rhs = DVector::zeros(5);
    rhs.rows_mut(0, 3).copy_from(&k);
    rhs.rows_mut(3, 2).copy_from(&f);
    println!("via block inverse: {:.6?}", (inv * rhs).as_slice());

    // rank one: singular without jitter, factorable with it
    let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let rank_one = &v * v.transpose();
    println!("\nno jitter: {:?}", spd_factor(&rank_one, JitterPolicy::None).err());
    let fac = spd_factor(&rank_one, JitterPolicy::Adaptive { max_jitter: 1e-6 })?;
    println!("adaptive jitter used: {:e}", fac.jitter_used());
    Ok(())
}
