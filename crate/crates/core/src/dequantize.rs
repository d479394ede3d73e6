//! Dequantization: a max-plus rational form `max(P) - max(Q)` becomes the
//! subtraction-free rational family `f_t = sum_P t^c z^e / sum_Q t^c z^e`,
//! and `phi_t = Log_t o f_t o exp_t` smooths the piecewise-linear map.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, serde_q, Q};
use crate::real::Real;
use crate::tropical::{TropicalMonomial, TropicalRational, VarNames};

/// `t^t_exponent * prod z_i^var_exponents[i]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FamilyMonomial {
    #[serde(with = "serde_q")]
    pub t_exponent: Q,
    pub var_exponents: Vec<i64>,
}

impl From<&TropicalMonomial> for FamilyMonomial {
    fn from(m: &TropicalMonomial) -> Self {
        FamilyMonomial {
            t_exponent: m.offset.clone(),
            var_exponents: m.exponents.clone(),
        }
    }
}

impl FamilyMonomial {
    fn eval_exact(&self, t: &Q, z: &[Q]) -> Result<Q> {
        let c = exact::as_integer(&self.t_exponent)
            .ok_or_else(|| Error::NonIntegerExponent(self.t_exponent.to_string()))?;
        let mut acc = exact::pow_int(t, &c)?;
        for (e, zi) in self.var_exponents.iter().zip(z) {
            if *e != 0 {
                acc *= exact::pow_int(zi, &BigInt::from(*e))?;
            }
        }
        Ok(acc)
    }

    fn eval_real(&self, scale: &LogScale, z: &[Real]) -> Result<Real> {
        let mut acc = if self.t_exponent.is_zero() {
            Real::one(scale.prec)
        } else {
            scale.pow(&Real::from_rational(&self.t_exponent, scale.prec))?
        };
        for (e, zi) in self.var_exponents.iter().zip(z) {
            for _ in 0..e.unsigned_abs() {
                acc = if *e > 0 { &acc * zi } else { &acc / zi };
            }
        }
        Ok(acc)
    }
}

/// The dequantized family `f_t` of a tropical rational form. Monomials are
/// kept one per source monomial, so repeated monomials appear repeatedly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RationalFamily {
    pub arity: usize,
    pub numerator: Vec<FamilyMonomial>,
    pub denominator: Vec<FamilyMonomial>,
}

fn sorted(ms: &[FamilyMonomial]) -> Vec<FamilyMonomial> {
    let mut v = ms.to_vec();
    v.sort();
    v
}

impl PartialEq for RationalFamily {
    /// Equality of presentations: monomial multisets on both sides.
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity
            && sorted(&self.numerator) == sorted(&other.numerator)
            && sorted(&self.denominator) == sorted(&other.denominator)
    }
}

impl Eq for RationalFamily {}

/// Maps each tropical monomial `(c, e)` to `t^c z^e`, preserving multiplicity.
pub fn dequantize(tr: &TropicalRational) -> RationalFamily {
    RationalFamily {
        arity: tr.arity,
        numerator: tr.numerator.iter().map(FamilyMonomial::from).collect(),
        denominator: tr.denominator.iter().map(FamilyMonomial::from).collect(),
    }
}

fn check_positive_exact(z: &[Q]) -> Result<()> {
    match z.iter().position(|v| !v.is_positive()) {
        Some(i) => Err(Error::NonPositive {
            index: i,
            value: z[i].to_string(),
        }),
        None => Ok(()),
    }
}

fn check_positive_real(z: &[Real]) -> Result<()> {
    match z.iter().position(|v| !v.is_positive()) {
        Some(i) => Err(Error::NonPositive {
            index: i,
            value: z[i].to_string(),
        }),
        None => Ok(()),
    }
}

impl RationalFamily {
    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                actual: n,
            });
        }
        Ok(())
    }

    /// True when every t-exponent is zero: the family does not depend on t.
    pub fn is_t_independent(&self) -> bool {
        self.numerator
            .iter()
            .chain(&self.denominator)
            .all(|m| m.t_exponent.is_zero())
    }

    pub fn has_integer_t_exponents(&self) -> bool {
        self.numerator
            .iter()
            .chain(&self.denominator)
            .all(|m| m.t_exponent.is_integer())
    }

    /// Exact value of `f_t(z)` for rational `t` and positive rational `z`.
    pub fn eval_exact(&self, t: &Q, z: &[Q]) -> Result<Q> {
        self.check_dim(z.len())?;
        check_positive_exact(z)?;
        let sum = |ms: &[FamilyMonomial]| -> Result<Q> { ms.iter().map(|m| m.eval_exact(t, z)).sum() };
        let num = sum(&self.numerator)?;
        let den = sum(&self.denominator)?;
        assert!(den.is_positive(), "subtraction-free denominator vanished");
        Ok(num / den)
    }

    /// `f_t(z)` in binary floating point at the scale's precision.
    pub fn eval_real(&self, scale: &LogScale, z: &[Real]) -> Result<Real> {
        self.check_dim(z.len())?;
        check_positive_real(z)?;
        let sum = |ms: &[FamilyMonomial]| -> Result<Real> {
            let mut acc = Real::zero(scale.prec);
            for m in ms {
                acc = acc + m.eval_real(scale, z)?;
            }
            Ok(acc)
        };
        let num = sum(&self.numerator)?;
        let den = sum(&self.denominator)?;
        assert!(den.is_positive(), "subtraction-free denominator vanished");
        Ok(num / den)
    }

    /// Renders every monomial separately, e.g. `(1 + w + 1) / (z)`.
    pub fn to_text(&self, names: &VarNames) -> String {
        format!(
            "({}) / ({})",
            side_text(&self.numerator, names, false),
            side_text(&self.denominator, names, false)
        )
    }

    /// Repeated monomials collected into integer coefficients, e.g.
    /// `(2 + w) / (z)`.
    pub fn to_collected_text(&self, names: &VarNames) -> String {
        format!(
            "({}) / ({})",
            side_text(&self.numerator, names, true),
            side_text(&self.denominator, names, true)
        )
    }
}

fn monomial_text(m: &FamilyMonomial, names: &VarNames) -> String {
    let mut factors = Vec::new();
    if !m.t_exponent.is_zero() {
        if m.t_exponent.is_one() {
            factors.push("t".to_string());
        } else if m.t_exponent.is_integer() && !m.t_exponent.is_negative() {
            factors.push(format!("t^{}", m.t_exponent));
        } else {
            factors.push(format!("t^({})", m.t_exponent));
        }
    }
    for (i, e) in m.var_exponents.iter().enumerate() {
        match e {
            0 => {}
            1 => factors.push(names.name(i)),
            e => factors.push(format!("{}^{}", names.name(i), e)),
        }
    }
    if factors.is_empty() {
        "1".to_string()
    } else {
        factors.join("*")
    }
}

fn side_text(ms: &[FamilyMonomial], names: &VarNames, collect: bool) -> String {
    if !collect {
        return ms
            .iter()
            .map(|m| monomial_text(m, names))
            .collect::<Vec<_>>()
            .join(" + ");
    }
    let mut groups: Vec<(FamilyMonomial, usize)> = Vec::new();
    for m in ms {
        match groups.iter_mut().find(|(g, _)| g == m) {
            Some((_, n)) => *n += 1,
            None => groups.push((m.clone(), 1)),
        }
    }
    groups
        .iter()
        .map(|(m, n)| {
            let body = monomial_text(m, names);
            match (n, body.as_str()) {
                (1, _) => body,
                (n, "1") => n.to_string(),
                (n, _) => format!("{n}*{body}"),
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

impl fmt::Display for RationalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text(&VarNames::default_for(self.arity)))
    }
}

/// The scale parameter `t > 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScaleParameter {
    Exact(Q),
    Approx(Real),
}

impl ScaleParameter {
    pub fn exact(t: Q) -> Result<Self> {
        if t <= Q::one() {
            return Err(Error::InvalidScale(t.to_string()));
        }
        Ok(ScaleParameter::Exact(t))
    }

    pub fn approx(t: Real) -> Result<Self> {
        if t <= Real::one(t.precision()) {
            return Err(Error::InvalidScale(t.to_string()));
        }
        Ok(ScaleParameter::Approx(t))
    }

    pub fn from_int(t: i64) -> Result<Self> {
        Self::exact(Q::from_integer(t.into()))
    }

    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            ScaleParameter::Exact(q) => Some(q),
            ScaleParameter::Approx(_) => None,
        }
    }

    pub fn to_real(&self, prec: u32) -> Real {
        match self {
            ScaleParameter::Exact(q) => Real::from_rational(q, prec),
            ScaleParameter::Approx(r) => r.with_precision(prec),
        }
    }
}

impl fmt::Display for ScaleParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleParameter::Exact(q) => write!(f, "{q}"),
            ScaleParameter::Approx(r) => write!(f, "{r}"),
        }
    }
}

/// `ln t` cached at extra precision for repeated `t^x` and `log_t`.
#[derive(Clone, Debug)]
pub struct LogScale {
    prec: u32,
    ln_t: Real,
}

const SCALE_GUARD: u32 = 64;

impl LogScale {
    pub fn new(t: &ScaleParameter, prec: u32) -> Result<Self> {
        let ln_t = t.to_real(prec + SCALE_GUARD).ln()?;
        Ok(LogScale { prec, ln_t })
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    /// `t^x`.
    pub fn pow(&self, x: &Real) -> Result<Real> {
        let hi = self.prec + SCALE_GUARD;
        Ok((&self.ln_t * x.with_precision(hi)).exp()?.with_precision(self.prec))
    }

    /// `ln z / ln t`.
    pub fn log(&self, z: &Real) -> Result<Real> {
        let hi = self.prec + SCALE_GUARD;
        Ok((z.with_precision(hi).ln()? / &self.ln_t).with_precision(self.prec))
    }
}

/// Componentwise `Log_t`.
pub fn log_t(z: &[Real], t: &ScaleParameter, prec: u32) -> Result<Vec<Real>> {
    check_positive_real(z)?;
    let scale = LogScale::new(t, prec)?;
    z.iter().map(|v| scale.log(v)).collect()
}

/// Componentwise `exp_t`, the inverse of [`log_t`].
pub fn exp_t(x: &[Real], t: &ScaleParameter, prec: u32) -> Result<Vec<Real>> {
    let scale = LogScale::new(t, prec)?;
    x.iter().map(|v| scale.pow(v)).collect()
}

/// `exp_t` without rounding when `t` is rational and every `x_i` is an
/// integer; `None` otherwise.
pub fn exp_t_exact(x: &[Q], t: &Q) -> Option<Vec<Q>> {
    x.iter()
        .map(|v| exact::as_integer(v).and_then(|n| exact::pow_int(t, &n).ok()))
        .collect()
}

/// `phi_t` evaluator: `Log_t(f_t(exp_t(x)))` with the family and `ln t`
/// prepared once.
#[derive(Clone, Debug)]
pub struct Smoothing {
    family: RationalFamily,
    scale: LogScale,
}

impl Smoothing {
    pub fn new(tr: &TropicalRational, t: &ScaleParameter, prec: u32) -> Result<Self> {
        Ok(Smoothing {
            family: dequantize(tr),
            scale: LogScale::new(t, prec)?,
        })
    }

    pub fn family(&self) -> &RationalFamily {
        &self.family
    }

    pub fn scale(&self) -> &LogScale {
        &self.scale
    }

    pub fn eval(&self, x: &[Real]) -> Result<Real> {
        let z: Vec<Real> = x.iter().map(|v| self.scale.pow(v)).collect::<Result<_>>()?;
        let f = self.family.eval_real(&self.scale, &z)?;
        self.scale.log(&f)
    }
}

/// `phi_t(x) = Log_t(f_t(exp_t(x)))`.
pub fn phi_t(tr: &TropicalRational, t: &ScaleParameter, x: &[Real], prec: u32) -> Result<Real> {
    Smoothing::new(tr, t, prec)?.eval(x)
}

/// `log_t |P| + log_t |Q|`, a sup-norm bound on `|phi_t - phi|` over all
/// inputs (each smoothed maximum overshoots by at most `log_t` of its
/// monomial count).
pub fn approx_error_bound(tr: &TropicalRational, t: &ScaleParameter, prec: u32) -> Result<Real> {
    let scale = LogScale::new(t, prec)?;
    let (p, q) = tr.counts();
    let lp = scale.log(&Real::from_int(p as i64, prec))?;
    let lq = scale.log(&Real::from_int(q as i64, prec))?;
    Ok(lp + lq)
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::tropical::normalize;
    use crate::tropical::strategies::{expr, point};
    use proptest::prelude::*;

    const ARITY: usize = 2;
    const P: u32 = 96;

    fn scale() -> impl Strategy<Value = ScaleParameter> {
        (2i64..=200).prop_map(|t| ScaleParameter::from_int(t).unwrap())
    }

    fn reals(p: &[Q]) -> Vec<Real> {
        p.iter().map(|v| Real::from_rational(v, P)).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn conjugacy_identity_holds_at_finite_t(e in expr(ARITY), x in point(ARITY), t in scale()) {
            let tr = normalize(&e, ARITY).unwrap();
            let s = Smoothing::new(&tr, &t, P).unwrap();
            let x = reals(&x);
            let z = exp_t(&x, &t, P).unwrap();
            let lhs = s.family().eval_real(s.scale(), &z).unwrap();
            let rhs = s.scale().pow(&s.eval(&x).unwrap()).unwrap();
            let rel = ((&lhs - &rhs) / &lhs).abs().to_f64();
            prop_assert!(rel < 1e-20, "relative gap {rel}");
        }

        #[test]
        fn smoothing_stays_within_the_bound(e in expr(ARITY), x in point(ARITY), t in scale()) {
            let tr = normalize(&e, ARITY).unwrap();
            let phi = Real::from_rational(&e.eval(&x).unwrap(), P);
            let smooth = phi_t(&tr, &t, &reals(&x), P).unwrap();
            let bound = approx_error_bound(&tr, &t, P).unwrap();
            let slack = Real::from_f64(1e-20, P);
            prop_assert!((smooth - phi).abs() <= bound + slack);
        }

        #[test]
        fn families_are_positive_on_the_orthant(e in expr(ARITY), x in point(ARITY), t in 2i64..50) {
            let tr = normalize(&e, ARITY).unwrap();
            let f = dequantize(&tr);
            let z: Vec<Real> = x.iter().map(|v| Real::from_rational(&(v.abs() + Q::from_integer(1.into())), P)).collect();
            let scale = LogScale::new(&ScaleParameter::from_int(t).unwrap(), P).unwrap();
            prop_assert!(f.eval_real(&scale, &z).unwrap().is_positive());
        }

        #[test]
        fn dequantize_is_faithful_to_presentations(a in expr(ARITY), b in expr(ARITY)) {
            let ta = normalize(&a, ARITY).unwrap();
            let tb = normalize(&b, ARITY).unwrap();
            prop_assert_eq!(ta == tb, dequantize(&ta) == dequantize(&tb));
        }
    }
}
