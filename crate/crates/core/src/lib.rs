//! Kriging and Gaussian-process prediction on one shared linear-algebra core.
//!
//! The crate implements the best linear unbiased predictor family (Simple,
//! Ordinary and Universal Kriging, plus the general noisy BLUP) and the
//! Gaussian-process predictive distribution, together with the alternative
//! solution routes that must agree with each other. A seeded random-field
//! simulator and a small command-line front end sit on top.
//!
//! ```
//! use blupkit::kernels::{Dataset, KernelSpec};
//! use blupkit::kriging::ordinary_krige;
//!
//! let data = Dataset::from_1d(&[0.0, 1.0], &[1.0, 2.0], 0.0).unwrap();
//! let kernel = KernelSpec::squared_exponential(1.0, 1.0).unwrap();
//! let p = ordinary_krige(&data, &kernel, &[0.5]).unwrap();
//! assert!((p.mean - 1.5).abs() < 1e-12);
//! ```

pub mod cli;
pub mod error;
pub mod gpr;
pub mod kernels;
pub mod kriging;
pub mod linalg;
pub mod simulate;

pub use error::{Error, Result};
