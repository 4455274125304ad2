//! Dense SPD factorization and the partitioned solves behind the Kriging
//! systems.
//!
//! Matrices are never inverted explicitly on the prediction paths: a
//! covariance matrix is factored once and the factor is reused for every
//! right-hand side. [`block_inverse`] is the one exception; it materializes
//! the partitioned inverse on purpose.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// How [`spd_factor`] reacts to a matrix that is not numerically positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum JitterPolicy {
    /// Fail on the first non-positive pivot.
    #[default]
    None,
    /// Retry with `delta * I` added, starting at `1e-12 * trace / n` and
    /// growing by decades until `max_jitter` is exceeded.
    Adaptive { max_jitter: f64 },
}

/// Lower Cholesky factor `L` of `A + jitter * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    l: DMatrix<f64>,
    jitter_used: f64,
}

impl SpdFactor {
    pub fn size(&self) -> usize {
        self.l.nrows()
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `L L^T`, i.e. the jittered input.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                found: rows,
            });
        }
        Ok(())
    }

    /// `L^{-1} B`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(b.nrows())?;
        let mut out = b.clone();
        forward_substitute(&self.l, &mut out);
        Ok(out)
    }

    /// `(A + jitter I)^{-1} B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = self.solve_lower(b)?;
        backward_substitute_transposed(&self.l, &mut out);
        Ok(out)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(b.len())?;
        let mut m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        forward_substitute(&self.l, &mut m);
        backward_substitute_transposed(&self.l, &mut m);
        Ok(DVector::from_column_slice(m.as_slice()))
    }

    /// `b^T A^{-1} b`, computed as `|L^{-1} b|^2` so it is never negative.
    pub fn quad_form(&self, b: &DVector<f64>) -> Result<f64> {
        self.check_rows(b.len())?;
        let mut m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        forward_substitute(&self.l, &mut m);
        Ok(m.norm_squared())
    }
}

fn forward_substitute(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = b[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * b[(k, c)];
            }
            b[(i, c)] = s / l[(i, i)];
        }
    }
}

fn backward_substitute_transposed(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    for c in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut s = b[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * b[(k, c)];
            }
            b[(i, c)] = s / l[(i, i)];
        }
    }
}

/// Plain Cholesky. On failure returns the index of the offending pivot.
fn cholesky(a: &DMatrix<f64>, jitter: f64) -> std::result::Result<DMatrix<f64>, usize> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max) + jitter;
    // pivots at or below this are rank deficiency, not precision loss
    let floor = n as f64 * f64::EPSILON * scale;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= floor {
            return Err(j);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let scale = a.amax();
    let n = a.nrows();
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Factor a symmetric positive definite matrix.
pub fn spd_factor(a: &DMatrix<f64>, policy: JitterPolicy) -> Result<SpdFactor> {
    check_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::invalid("cannot factor an empty matrix"));
    }
    match cholesky(a, 0.0) {
        Ok(l) => Ok(SpdFactor {
            l,
            jitter_used: 0.0,
        }),
        Err(pivot) => {
            let JitterPolicy::Adaptive { max_jitter } = policy else {
                return Err(Error::Singular {
                    what: "matrix is not positive definite".into(),
                    pivot: Some(pivot),
                });
            };
            let mean_diag = a.trace() / n as f64;
            let mut delta = if mean_diag > 0.0 { 1e-12 * mean_diag } else { 1e-12 };
            let mut last_pivot = pivot;
            while delta <= max_jitter {
                match cholesky(a, delta) {
                    Ok(l) => {
                        return Ok(SpdFactor {
                            l,
                            jitter_used: delta,
                        })
                    }
                    Err(p) => last_pivot = p,
                }
                delta *= 10.0;
            }
            Err(Error::Singular {
                what: format!("matrix is not positive definite within jitter {max_jitter:e}"),
                pivot: Some(last_pivot),
            })
        }
    }
}

/// `(A + jitter I)^{-1} B` from a factor.
pub fn solve_spd(factor: &SpdFactor, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    factor.solve(b)
}

fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, which: &str) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let u = lu.u();
    let umax = u.amax();
    let tiny = n as f64 * f64::EPSILON * umax;
    if umax == 0.0 || (0..n).any(|i| u[(i, i)].abs() <= tiny) {
        return Err(Error::singular(which));
    }
    lu.solve(b).ok_or_else(|| Error::singular(which))
}

/// Inverse of the partitioned matrix `S = [[A, B], [C, D]]` through the
/// Schur complement `D - C A^{-1} B`:
///
/// ```text
/// S^{-1} = [[A^{-1} + A^{-1} B W C A^{-1}, -A^{-1} B W],
///           [-W C A^{-1},                   W         ]],   W = (D - C A^{-1} B)^{-1}
/// ```
pub fn block_inverse(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let p = d.nrows();
    if !a.is_square()
        || !d.is_square()
        || b.shape() != (n, p)
        || c.shape() != (p, n)
    {
        return Err(Error::invalid(format!(
            "incompatible blocks: A {:?}, B {:?}, C {:?}, D {:?}",
            a.shape(),
            b.shape(),
            c.shape(),
            d.shape()
        )));
    }
    let a_inv = lu_solve(a, &DMatrix::identity(n, n), "block A is singular")?;
    let a_inv_b = &a_inv * b;
    let c_a_inv = c * &a_inv;
    let schur = d - c * &a_inv_b;
    let w = lu_solve(&schur, &DMatrix::identity(p, p), "Schur complement is singular")?;

    let mut s = DMatrix::zeros(n + p, n + p);
    let a_inv_b_w = &a_inv_b * &w;
    s.view_mut((0, 0), (n, n))
        .copy_from(&(&a_inv + &a_inv_b_w * &c_a_inv));
    s.view_mut((0, n), (n, p)).copy_from(&(-&a_inv_b_w));
    s.view_mut((n, 0), (p, n)).copy_from(&(-&w * &c_a_inv));
    s.view_mut((n, n), (p, p)).copy_from(&w);
    Ok(s)
}

/// Solution of the saddle-point system
///
/// ```text
/// [[Sigma, M], [M^T, 0]] (lambda; mu) = (r_top; r_bot)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub lambda: DVector<f64>,
    /// Multiplier exactly as it appears in the system above.
    pub mu: DVector<f64>,
}

/// Saddle solve against an already factored `Sigma`, by the Schur route
/// `mu = (M^T Sigma^{-1} M)^{-1} (M^T Sigma^{-1} r_top - r_bot)`,
/// `lambda = Sigma^{-1} (r_top - M mu)`.
pub fn solve_saddle_factored(
    sigma: &SpdFactor,
    m: &DMatrix<f64>,
    r_top: &DVector<f64>,
    r_bot: &DVector<f64>,
) -> Result<SaddleSolution> {
    let n = sigma.size();
    let p = m.ncols();
    if m.nrows() != n || r_top.len() != n || r_bot.len() != p {
        return Err(Error::invalid("saddle system blocks have inconsistent shapes"));
    }
    if p > n {
        return Err(Error::invalid(format!(
            "{p} constraints but only {n} unknowns"
        )));
    }
    let sigma_inv_m = sigma.solve(m)?;
    let g = m.transpose() * &sigma_inv_m;
    let g = (&g + g.transpose()) * 0.5;
    let g_factor = spd_factor(&g, JitterPolicy::None).map_err(|_| {
        Error::singular("basis functions linearly dependent at the design points")
    })?;
    let sigma_inv_r = sigma.solve_vec(r_top)?;
    let rhs = m.transpose() * &sigma_inv_r - r_bot;
    let mu = g_factor.solve_vec(&rhs)?;
    let lambda = sigma_inv_r - sigma_inv_m * &mu;
    Ok(SaddleSolution { lambda, mu })
}

/// [`solve_saddle_factored`] for an unfactored SPD `Sigma`.
pub fn solve_saddle(
    sigma: &DMatrix<f64>,
    m: &DMatrix<f64>,
    r_top: &DVector<f64>,
    r_bot: &DVector<f64>,
) -> Result<SaddleSolution> {
    let f = spd_factor(sigma, JitterPolicy::None)?;
    solve_saddle_factored(&f, m, r_top, r_bot)
}
