use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{serde_q, Q};
use crate::tropical::TropicalExpr;

/// Affine form `offset + exponents . x`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TropicalMonomial {
    #[serde(with = "serde_q")]
    pub offset: Q,
    pub exponents: Vec<i64>,
}

impl TropicalMonomial {
    pub fn new(offset: Q, exponents: Vec<i64>) -> Self {
        TropicalMonomial { offset, exponents }
    }

    /// The tropical unit `0`.
    pub fn unit(arity: usize) -> Self {
        TropicalMonomial::new(Q::from_integer(0.into()), vec![0; arity])
    }

    pub fn constant(offset: Q, arity: usize) -> Self {
        TropicalMonomial::new(offset, vec![0; arity])
    }

    pub fn variable(index: usize, arity: usize) -> Self {
        let mut e = vec![0; arity];
        e[index] = 1;
        TropicalMonomial::new(Q::from_integer(0.into()), e)
    }

    pub fn arity(&self) -> usize {
        self.exponents.len()
    }

    /// Tropical product: offsets and exponents add.
    pub fn times(&self, other: &TropicalMonomial) -> TropicalMonomial {
        let exponents = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .map(|(a, b)| a + b)
            .collect();
        TropicalMonomial::new(&self.offset + &other.offset, exponents)
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        self.exponents
            .iter()
            .zip(x)
            .filter(|(e, _)| **e != 0)
            .fold(self.offset.clone(), |acc, (e, xi)| {
                acc + Q::from_integer((*e).into()) * xi
            })
    }
}

/// Tropical product of two monomial multisets: every pair, multiplicities
/// multiplied.
pub fn tropical_product(a: &[TropicalMonomial], b: &[TropicalMonomial]) -> Vec<TropicalMonomial> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x.times(y));
        }
    }
    out
}

fn eval_max(ms: &[TropicalMonomial], x: &[Q]) -> Q {
    ms.iter().map(|m| m.eval(x)).max().expect("nonempty polynomial")
}

fn sorted(ms: &[TropicalMonomial]) -> Vec<TropicalMonomial> {
    let mut v = ms.to_vec();
    v.sort();
    v
}

/// `max(numerator) - max(denominator)` with both sides kept as multisets.
///
/// Repeated monomials are data, not noise: they survive normalization and
/// become integer coefficients after dequantization. Equality compares the
/// two multisets and ignores order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TropicalRational {
    pub arity: usize,
    pub numerator: Vec<TropicalMonomial>,
    pub denominator: Vec<TropicalMonomial>,
}

impl PartialEq for TropicalRational {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity
            && sorted(&self.numerator) == sorted(&other.numerator)
            && sorted(&self.denominator) == sorted(&other.denominator)
    }
}

impl Eq for TropicalRational {}

impl TropicalRational {
    pub fn new(arity: usize, numerator: Vec<TropicalMonomial>, denominator: Vec<TropicalMonomial>) -> Result<Self> {
        if numerator.is_empty() || denominator.is_empty() {
            return Err(Error::InvalidArgument(
                "numerator and denominator must be nonempty".into(),
            ));
        }
        if let Some(m) = numerator.iter().chain(&denominator).find(|m| m.arity() != arity) {
            return Err(Error::DimensionMismatch {
                expected: arity,
                actual: m.arity(),
            });
        }
        Ok(TropicalRational {
            arity,
            numerator,
            denominator,
        })
    }

    /// A max-plus polynomial over the unit denominator.
    pub fn polynomial(arity: usize, numerator: Vec<TropicalMonomial>) -> Result<Self> {
        Self::new(arity, numerator, vec![TropicalMonomial::unit(arity)])
    }

    pub fn eval(&self, x: &[Q]) -> Result<Q> {
        self.check_point(x)?;
        Ok(eval_max(&self.numerator, x) - eval_max(&self.denominator, x))
    }

    pub fn eval_numerator(&self, x: &[Q]) -> Result<Q> {
        self.check_point(x)?;
        Ok(eval_max(&self.numerator, x))
    }

    pub fn eval_denominator(&self, x: &[Q]) -> Result<Q> {
        self.check_point(x)?;
        Ok(eval_max(&self.denominator, x))
    }

    fn check_point(&self, x: &[Q]) -> Result<()> {
        if x.len() != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// True when the denominator is the single unit monomial.
    pub fn is_polynomial(&self) -> bool {
        self.denominator.len() == 1 && self.denominator[0] == TropicalMonomial::unit(self.arity)
    }

    /// Monomial counts with multiplicity: `(|P|, |Q|)`.
    pub fn counts(&self) -> (usize, usize) {
        (self.numerator.len(), self.denominator.len())
    }

    /// Explicit opt-in pass merging repeated monomials (`max(a, a) = a`).
    /// Never applied by [`normalize`].
    pub fn simplify(&self) -> TropicalRational {
        let mut p = sorted(&self.numerator);
        p.dedup();
        let mut q = sorted(&self.denominator);
        q.dedup();
        TropicalRational {
            arity: self.arity,
            numerator: p,
            denominator: q,
        }
    }

    pub fn negate(&self) -> TropicalRational {
        TropicalRational {
            arity: self.arity,
            numerator: self.denominator.clone(),
            denominator: self.numerator.clone(),
        }
    }

    /// `(P1 - Q1) + (P2 - Q2) = (P1 (x) P2) - (Q1 (x) Q2)`.
    pub fn add(&self, other: &TropicalRational) -> TropicalRational {
        TropicalRational {
            arity: self.arity,
            numerator: tropical_product(&self.numerator, &other.numerator),
            denominator: tropical_product(&self.denominator, &other.denominator),
        }
    }

    /// `max(P1 - Q1, P2 - Q2)`.
    ///
    /// With a shared denominator the numerators are concatenated; otherwise
    /// the result is `(P1 (x) Q2 u P2 (x) Q1) - (Q1 (x) Q2)`.
    pub fn max(&self, other: &TropicalRational) -> TropicalRational {
        if sorted(&self.denominator) == sorted(&other.denominator) {
            let mut numerator = self.numerator.clone();
            numerator.extend(other.numerator.iter().cloned());
            return TropicalRational {
                arity: self.arity,
                numerator,
                denominator: self.denominator.clone(),
            };
        }
        let mut numerator = tropical_product(&self.numerator, &other.denominator);
        numerator.extend(tropical_product(&other.numerator, &self.denominator));
        TropicalRational {
            arity: self.arity,
            numerator,
            denominator: tropical_product(&self.denominator, &other.denominator),
        }
    }
}

/// Rewrites an expression into `max(P) - max(Q)` form.
pub fn normalize(e: &TropicalExpr, arity: usize) -> Result<TropicalRational> {
    e.check_arity(arity)?;
    Ok(normalize_node(e, arity))
}

fn normalize_node(e: &TropicalExpr, arity: usize) -> TropicalRational {
    let unit = || vec![TropicalMonomial::unit(arity)];
    match e {
        TropicalExpr::Const(c) => TropicalRational {
            arity,
            numerator: vec![TropicalMonomial::constant(c.clone(), arity)],
            denominator: unit(),
        },
        TropicalExpr::Var(i) => TropicalRational {
            arity,
            numerator: vec![TropicalMonomial::variable(*i, arity)],
            denominator: unit(),
        },
        TropicalExpr::Neg(c) => normalize_node(c, arity).negate(),
        TropicalExpr::Sum(cs) => cs
            .iter()
            .map(|c| normalize_node(c, arity))
            .reduce(|a, b| a.add(&b))
            .expect("sum has children"),
        TropicalExpr::Max(cs) => cs
            .iter()
            .map(|c| normalize_node(c, arity))
            .reduce(|a, b| a.max(&b))
            .expect("max has children"),
    }
}
