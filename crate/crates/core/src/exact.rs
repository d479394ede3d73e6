//! Exact rational helpers shared by every module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact rational number.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `p`, `-p`, `p/q` or a plain decimal such as `-1.25`.
pub fn parse_rational(text: &str) -> Result<Q> {
    let s = text.trim();
    let bad = || Error::InvalidArgument(format!("not a rational number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if !den.is_positive() {
            return Err(Error::InvalidArgument(format!(
                "denominator must be positive in {text:?}"
            )));
        }
        return Ok(Q::new(num, den));
    }
    if let Some((int, fracpart)) = s.split_once('.') {
        let negative = int.trim_start().starts_with('-');
        let int_digits = int.trim().trim_start_matches(['-', '+']);
        if !fracpart.chars().all(|c| c.is_ascii_digit())
            || !int_digits.chars().all(|c| c.is_ascii_digit())
            || (int_digits.is_empty() && fracpart.is_empty())
        {
            return Err(bad());
        }
        let digits = format!("{int_digits}{fracpart}");
        let mag: BigInt = if digits.is_empty() {
            BigInt::zero()
        } else {
            digits.parse().map_err(|_| bad())?
        };
        let den = num_traits::pow(BigInt::from(10), fracpart.len());
        let v = Q::new(mag, den);
        return Ok(if negative { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

/// Parses a comma separated list of rationals.
pub fn parse_rational_list(text: &str) -> Result<Vec<Q>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(parse_rational).collect()
}

/// `p/q` form, or `p` for integers.
pub fn format_rational(v: &Q) -> String {
    v.to_string()
}

pub fn max_of<'a>(values: impl IntoIterator<Item = &'a Q>) -> Option<Q> {
    values.into_iter().max().cloned()
}

/// `base^exponent` for an integer exponent of either sign.
pub fn pow_int(base: &Q, exponent: &BigInt) -> Result<Q> {
    let e: i32 = i32::try_from(exponent.clone())
        .map_err(|_| Error::InvalidArgument(format!("exponent {exponent} too large")))?;
    if e < 0 && base.is_zero() {
        return Err(Error::InvalidArgument("zero raised to a negative power".into()));
    }
    Ok(num_traits::Pow::pow(base, e))
}

/// Returns the integer value of `v` if it has denominator one.
pub fn as_integer(v: &Q) -> Option<BigInt> {
    v.is_integer().then(|| v.to_integer())
}

pub fn is_one(v: &Q) -> bool {
    v.is_one()
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_q {
    use super::{format_rational, parse_rational, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<Q>`.
pub mod serde_q_vec {
    use super::{format_rational, parse_rational, Q};
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&format_rational(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}
