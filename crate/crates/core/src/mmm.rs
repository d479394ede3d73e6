//! Leading coefficients of the Kontsevich cycles in the Miller-Morita-Mumford
//! classes:
//! `prod_i (1/n_i!) (2 (2k_i+1)! / ((-1)^{k_i+1} k_i!))^{n_i}`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::Q;

/// A multi-index `k_1^{n_1} ... k_r^{n_r}` with distinct `k_i` and `n_i >= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleIndex {
    parts: Vec<(u32, u32)>,
}

impl CycleIndex {
    pub fn new(parts: Vec<(u32, u32)>) -> Result<Self> {
        for (i, (k, n)) in parts.iter().enumerate() {
            if *n == 0 {
                return Err(Error::InvalidArgument(format!("multiplicity of {k} must be positive")));
            }
            if parts[..i].iter().any(|(k2, _)| k2 == k) {
                return Err(Error::InvalidArgument(format!("index {k} appears twice")));
            }
        }
        Ok(CycleIndex { parts })
    }

    pub fn parts(&self) -> &[(u32, u32)] {
        &self.parts
    }

    /// Union of two indices with disjoint `k`s.
    pub fn join(&self, other: &CycleIndex) -> Result<CycleIndex> {
        let mut parts = self.parts.clone();
        parts.extend_from_slice(&other.parts);
        CycleIndex::new(parts)
    }
}

impl FromStr for CycleIndex {
    type Err = Error;

    /// Space-separated `k^n` terms; a bare `k` means `k^1`.
    fn from_str(text: &str) -> Result<Self> {
        let mut parts = Vec::new();
        let mut offset = 0;
        for token in text.split_whitespace() {
            let pos = text[offset..].find(token).map_or(offset, |p| offset + p);
            offset = pos + token.len();
            let num = |s: &str, at: usize| {
                s.parse::<u32>()
                    .map_err(|_| Error::syntax(at, format!("`{s}` is not a nonnegative integer")))
            };
            let (k, n) = match token.split_once('^') {
                Some((k, n)) => (num(k, pos)?, num(n, pos + k.len() + 1)?),
                None => (num(token, pos)?, 1),
            };
            parts.push((k, n));
        }
        if parts.is_empty() {
            return Err(Error::syntax(0, "empty index"));
        }
        CycleIndex::new(parts)
    }
}

impl fmt::Display for CycleIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.parts.iter().map(|(k, n)| format!("{k}^{n}")).collect();
        f.write_str(&terms.join(" "))
    }
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * i)
}

/// `2 (2k+1)! / ((-1)^{k+1} k!)`, always an integer.
pub fn block_factor(k: u32) -> BigInt {
    let k = k as u64;
    let v = BigInt::from(2) * factorial(2 * k + 1) / factorial(k);
    if k.is_multiple_of(2) {
        -v
    } else {
        v
    }
}

/// Coefficient of `prod kappa~_{k_i}^{n_i}` in the leading term.
pub fn igusa_leading_coefficient(idx: &CycleIndex) -> Q {
    idx.parts.iter().fold(Q::one(), |acc, &(k, n)| {
        acc * Q::new(num_traits::pow(block_factor(k), n as usize), factorial(n as u64))
    })
}

/// `(-1)^{sum n_i (k_i + 1)}`.
pub fn expected_sign(idx: &CycleIndex) -> i32 {
    let e: u64 = idx.parts.iter().map(|&(k, n)| n as u64 * (k as u64 + 1)).sum();
    if e.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// True when the coefficient is nonzero with the expected sign.
pub fn sign_matches(idx: &CycleIndex) -> bool {
    let c = igusa_leading_coefficient(idx);
    !c.is_zero() && (c > Q::zero()) == (expected_sign(idx) > 0)
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn index() -> impl Strategy<Value = CycleIndex> {
        prop::collection::btree_map(0u32..=20, 1u32..=4, 1..5)
            .prop_map(|m: BTreeMap<u32, u32>| CycleIndex::new(m.into_iter().collect()).unwrap())
    }

    proptest! {
        #[test]
        fn coefficient_is_multiplicative(a in index(), b in index()) {
            prop_assume!(a.parts().iter().all(|(k, _)| b.parts().iter().all(|(k2, _)| k != k2)));
            let joined = a.join(&b).unwrap();
            prop_assert_eq!(
                igusa_leading_coefficient(&joined),
                igusa_leading_coefficient(&a) * igusa_leading_coefficient(&b)
            );
        }

        #[test]
        fn sign_follows_the_parity_rule(a in index()) {
            prop_assert!(sign_matches(&a));
        }

        #[test]
        fn order_of_terms_is_irrelevant(a in index()) {
            let mut rev = a.parts().to_vec();
            rev.reverse();
            let b = CycleIndex::new(rev).unwrap();
            prop_assert_eq!(igusa_leading_coefficient(&a), igusa_leading_coefficient(&b));
        }
    }
}
