use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A monomial `x1^a1 * x2^a2 * ...` used as a trend basis function.
///
/// Parses from and prints to strings such as `"1"`, `"x1"`, `"x2^3"` or
/// `"x1*x2^2"`. Coordinates are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exponents: Vec<u32>,
}

impl Monomial {
    pub fn constant() -> Self {
        Monomial { exponents: vec![] }
    }

    /// The `dim`-th coordinate (0-based) raised to `power`.
    pub fn coordinate(dim: usize, power: u32) -> Self {
        let mut exponents = vec![0; dim + 1];
        exponents[dim] = power;
        Monomial::from_exponents(exponents)
    }

    pub fn from_exponents(mut exponents: Vec<u32>) -> Self {
        while exponents.last() == Some(&0) {
            exponents.pop();
        }
        Monomial { exponents }
    }

    /// Number of leading coordinates this monomial touches.
    pub fn min_dimension(&self) -> usize {
        self.exponents.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .exponents
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > 0)
            .map(|(i, e)| match e {
                1 => format!("x{}", i + 1),
                _ => format!("x{}^{}", i + 1, e),
            })
            .collect();
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join("*"))
        }
    }
}

impl FromStr for Monomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Monomial::constant());
        }
        let bad = || Error::invalid(format!("cannot parse basis function {s:?}"));
        let mut exponents: Vec<u32> = Vec::new();
        for factor in s.split('*') {
            let factor = factor.trim();
            let rest = factor.strip_prefix('x').ok_or_else(bad)?;
            let (idx, pow) = match rest.split_once('^') {
                Some((i, p)) => (i, p.parse::<u32>().map_err(|_| bad())?),
                None => (rest, 1),
            };
            let idx: usize = idx.parse().map_err(|_| bad())?;
            if idx == 0 {
                return Err(bad());
            }
            if exponents.len() < idx {
                exponents.resize(idx, 0);
            }
            exponents[idx - 1] += pow;
        }
        Ok(Monomial::from_exponents(exponents))
    }
}

impl Serialize for Monomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Monomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered list of trend basis functions `f_1 .. f_p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Basis(Vec<Monomial>);

impl Basis {
    pub fn new(functions: Vec<Monomial>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::invalid("a trend basis needs at least one function"));
        }
        Ok(Basis(functions))
    }

    /// `f = (1)`.
    pub fn constant() -> Self {
        Basis(vec![Monomial::constant()])
    }

    /// `f = (1, x1, .., xd)`.
    pub fn linear(dim: usize) -> Self {
        let mut f = vec![Monomial::constant()];
        f.extend((0..dim).map(|i| Monomial::coordinate(i, 1)));
        Basis(f)
    }

    /// `f = (1, x, x^2, .., x^degree)` in one dimension.
    pub fn polynomial_1d(degree: u32) -> Self {
        Basis(
            (0..=degree)
                .map(|p| Monomial::from_exponents(vec![p]))
                .collect(),
        )
    }

    pub fn functions(&self) -> &[Monomial] {
        &self.0
    }

    /// Number of basis functions `p`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_dimension(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|m| m.min_dimension() > d) {
            Some(m) => Err(Error::invalid(format!(
                "basis function {m} needs at least {} coordinates, data has {d}",
                m.min_dimension()
            ))),
            None => Ok(()),
        }
    }

    /// `f(x)` as a p-vector.
    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|m| m.eval(x)))
    }

    /// Design matrix `M` with `M[i, j] = f_j(X_i)`.
    pub fn matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dimension(x.ncols())?;
        let pts = super::rows(x);
        Ok(DMatrix::from_fn(x.nrows(), self.0.len(), |i, j| {
            self.0[j].eval(&pts[i])
        }))
    }
}

/// Gaussian prior on trend coefficients, or its zero-precision limit.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BasisPrior {
    #[default]
    Noninformative,
    Gaussian {
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    },
}

/// Linear trend `m(x) = f(x)^T beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMean {
    pub basis: Basis,
    /// Fixed coefficients. When absent the trend must be estimated.
    pub beta: Option<DVector<f64>>,
    pub prior: BasisPrior,
}

impl BasisMean {
    pub fn unknown(basis: Basis) -> Self {
        BasisMean {
            basis,
            beta: None,
            prior: BasisPrior::Noninformative,
        }
    }

    pub fn known(basis: Basis, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: beta.len(),
            });
        }
        Ok(BasisMean {
            basis,
            beta: Some(DVector::from_vec(beta)),
            prior: BasisPrior::Noninformative,
        })
    }

    pub fn with_prior(mut self, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let p = self.basis.len();
        if mean.len() != p || covariance.shape() != (p, p) {
            return Err(Error::invalid(format!(
                "prior must be a {p}-vector with a {p}x{p} covariance"
            )));
        }
        self.prior = BasisPrior::Gaussian { mean, covariance };
        Ok(self)
    }
}

/// Shared closure behind [`KnownMean::Function`].
pub type MeanFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A mean function that is fully known.
#[derive(Clone)]
pub enum KnownMean {
    Constant(f64),
    Function(MeanFn),
}

impl fmt::Debug for KnownMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KnownMean::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            KnownMean::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Mean structure of the random field.
#[derive(Debug, Clone)]
pub enum MeanSpec {
    Known(KnownMean),
    /// `m(x) = c` with `c` unknown. Equivalent to a basis `f = (1)` without
    /// coefficients.
    ConstantUnknown,
    Basis(BasisMean),
}

impl MeanSpec {
    pub fn zero() -> Self {
        MeanSpec::Known(KnownMean::Constant(0.0))
    }

    pub fn constant(c: f64) -> Self {
        MeanSpec::Known(KnownMean::Constant(c))
    }

    pub fn function(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        MeanSpec::Known(KnownMean::Function(Arc::new(f)))
    }

    /// True when `m(x)` can be evaluated without estimating anything.
    pub fn is_identified(&self) -> bool {
        match self {
            MeanSpec::Known(_) => true,
            MeanSpec::ConstantUnknown => false,
            MeanSpec::Basis(b) => b.beta.is_some(),
        }
    }

    /// Trend basis for the unknown-mean variants (`ConstantUnknown` maps to `f = (1)`).
    pub fn basis(&self) -> Option<Basis> {
        match self {
            MeanSpec::Known(_) => None,
            MeanSpec::ConstantUnknown => Some(Basis::constant()),
            MeanSpec::Basis(b) => Some(b.basis.clone()),
        }
    }

    /// `m(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            MeanSpec::Known(KnownMean::Constant(c)) => Ok(*c),
            MeanSpec::Known(KnownMean::Function(f)) => Ok(f(x)),
            MeanSpec::ConstantUnknown => Err(Error::MeanNotIdentified(
                "constant mean is unknown; estimate it by GLS first".into(),
            )),
            MeanSpec::Basis(b) => {
                b.basis.check_dimension(x.len())?;
                let beta = b.beta.as_ref().ok_or_else(|| {
                    Error::MeanNotIdentified(
                        "trend coefficients are unknown; estimate them by GLS first".into(),
                    )
                })?;
                Ok(b.basis.eval(x).dot(beta))
            }
        }
    }

    /// `m(X)` over the rows of `x`.
    pub fn eval_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let vals = super::rows(x)
            .iter()
            .map(|r| self.eval(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }
}

/// `m(x)` for an identified mean.
pub fn eval_mean(mean: &MeanSpec, x: &[f64]) -> Result<f64> {
    mean.eval(x)
}

/// `M[i, j] = f_j(X_i)`. `ConstantUnknown` yields the all-ones column.
pub fn basis_matrix(mean: &MeanSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    mean.basis()
        .ok_or_else(|| Error::invalid("a known mean has no trend basis"))?
        .matrix(x)
}

#[derive(Serialize, Deserialize)]
struct PriorDocument {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum MeanDocument {
    Known {
        value: f64,
    },
    ConstantUnknown,
    Basis {
        functions: Basis,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior: Option<PriorDocument>,
    },
}

impl TryFrom<MeanDocument> for MeanSpec {
    type Error = Error;

    fn try_from(doc: MeanDocument) -> Result<Self> {
        Ok(match doc {
            MeanDocument::Known { value } => MeanSpec::constant(value),
            MeanDocument::ConstantUnknown => MeanSpec::ConstantUnknown,
            MeanDocument::Basis {
                functions,
                beta,
                prior,
            } => {
                let functions = Basis::new(functions.0)?;
                let mut b = match beta {
                    Some(beta) => BasisMean::known(functions, beta)?,
                    None => BasisMean::unknown(functions),
                };
                if let Some(p) = prior {
                    let k = p.covariance.len();
                    if p.covariance.iter().any(|r| r.len() != k) {
                        return Err(Error::invalid("prior covariance must be square"));
                    }
                    let cov = DMatrix::from_fn(k, k, |i, j| p.covariance[i][j]);
                    b = b.with_prior(DVector::from_vec(p.mean), cov)?;
                }
                MeanSpec::Basis(b)
            }
        })
    }
}

impl Serialize for MeanSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = match self {
            MeanSpec::Known(KnownMean::Constant(c)) => MeanDocument::Known { value: *c },
            MeanSpec::Known(KnownMean::Function(_)) => {
                return Err(serde::ser::Error::custom(
                    "mean given as a function cannot be serialized",
                ))
            }
            MeanSpec::ConstantUnknown => MeanDocument::ConstantUnknown,
            MeanSpec::Basis(b) => MeanDocument::Basis {
                functions: b.basis.clone(),
                beta: b.beta.as_ref().map(|v| v.iter().copied().collect()),
                prior: match &b.prior {
                    BasisPrior::Noninformative => None,
                    BasisPrior::Gaussian { mean, covariance } => Some(PriorDocument {
                        mean: mean.iter().copied().collect(),
                        covariance: covariance
                            .row_iter()
                            .map(|r| r.iter().copied().collect())
                            .collect(),
                    }),
                },
            },
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeanSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MeanDocument::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}
