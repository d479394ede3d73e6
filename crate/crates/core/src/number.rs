use std::fmt;

use serde::{Serialize, Serializer};

use crate::exact::Q;
use crate::real::Real;

/// A sample that is either exact or a rounded binary float carrying its
/// precision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Number {
    Exact(Q),
    Approx(Real),
}

impl Number {
    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            Number::Exact(q) => Some(q),
            Number::Approx(_) => None,
        }
    }

    pub fn to_real(&self, prec: u32) -> Real {
        match self {
            Number::Exact(q) => Real::from_rational(q, prec),
            Number::Approx(r) => r.with_precision(prec),
        }
    }

    /// Decimal text rounded to `bits` of binary precision.
    pub fn to_decimal(&self, bits: u32) -> String {
        self.to_real(bits).to_decimal_string(Real::decimal_digits(bits))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(q) => write!(f, "{q}"),
            Number::Approx(r) => write!(f, "{r}"),
        }
    }
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl From<Q> for Number {
    fn from(q: Q) -> Self {
        Number::Exact(q)
    }
}

impl From<Real> for Number {
    fn from(r: Real) -> Self {
        Number::Approx(r)
    }
}
