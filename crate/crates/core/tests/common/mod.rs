#![allow(dead_code)]

use blupkit::kernels::{Basis, Dataset, KernelFamily, KernelSpec, Monomial};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest accepted condition number of the training Gram.
pub const MAX_CONDITION: f64 = 1e4;

pub const FAMILIES: [KernelFamily; 4] = [
    KernelFamily::SquaredExponential,
    KernelFamily::Exponential,
    KernelFamily::Matern32,
    KernelFamily::Matern52,
];

pub struct Instance {
    pub data: Dataset,
    pub kernel: KernelSpec,
    pub targets: Vec<Vec<f64>>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn d(&self) -> usize {
        self.data.dim()
    }

    pub fn targets_matrix(&self) -> DMatrix<f64> {
        let d = self.d();
        DMatrix::from_fn(self.targets.len(), d, |i, j| self.targets[i][j])
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let ev = a.clone().symmetric_eigenvalues();
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Random instance with `n` in `n_range`, `d` in `d_range`, locations uniform
/// on the unit box and a Gram whose condition number is at most
/// [`MAX_CONDITION`]. Lengthscales shrink until that holds.
pub fn instance(
    rng: &mut ChaCha8Rng,
    n_range: (usize, usize),
    d_range: (usize, usize),
    noise_variance: f64,
    n_targets: usize,
) -> Instance {
    let n = rng.random_range(n_range.0..=n_range.1);
    let d = rng.random_range(d_range.0..=d_range.1);
    let family = FAMILIES[rng.random_range(0..FAMILIES.len())];
    let variance = rng.random_range(0.5..3.0);
    let mut lengthscales: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..0.8)).collect();
    let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
    let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0) + 1.0);
    loop {
        let kernel = if d == 1 {
            KernelSpec::isotropic(family, variance, lengthscales[0]).unwrap()
        } else {
            KernelSpec::new(family, variance, lengthscales.clone()).unwrap()
        };
        let gram = kernel.gram(&x, noise_variance).unwrap();
        if condition_number(&gram) <= MAX_CONDITION {
            let targets = (0..n_targets)
                .map(|_| (0..d).map(|_| rng.random_range(-0.2..1.2)).collect())
                .collect();
            return Instance {
                data: Dataset::new(x, y, noise_variance).unwrap(),
                kernel,
                targets,
            };
        }
        lengthscales.iter_mut().for_each(|l| *l *= 0.7);
    }
}

/// Polynomial trend with `p` terms in the first coordinate: 1, x1, x1^2, ..
pub fn trend(p: usize) -> Basis {
    Basis::new((0..p as u32).map(|k| Monomial::coordinate(0, k)).collect()).unwrap()
}

/// `|a - b| / max(|a|, |b|, 1)`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// `sigma_*^2 + l^T (Sigma + noise I) l - 2 l^T k_*`, assembled from kernel
/// evaluations only.
pub fn objective(inst: &Instance, x: &[f64], lambda: &DVector<f64>) -> f64 {
    let n = inst.n();
    let loc: Vec<Vec<f64>> = (0..n).map(|i| inst.data.location(i)).collect();
    let k = &inst.kernel;
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut c = k.eval(&loc[i], &loc[j]).unwrap();
            if i == j {
                c += inst.data.noise_variance();
            }
            quad += lambda[i] * c * lambda[j];
        }
    }
    let cross: f64 = (0..n).map(|i| lambda[i] * k.eval(&loc[i], x).unwrap()).sum();
    k.eval(x, x).unwrap() + quad - 2.0 * cross
}
