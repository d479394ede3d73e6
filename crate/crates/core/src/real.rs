//! Binary floating point with a configurable mantissa width.
//!
//! Values are `mantissa * 2^exponent` with `|mantissa| < 2^precision`,
//! rounded to nearest (ties to even) after every operation. The mantissa is
//! kept odd (or zero) so that structural equality is value equality.
//! `ln` and `exp` are evaluated in fixed point with guard bits and have an
//! absolute error of a few units in the last place of the result.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact::Q;

pub const DEFAULT_PRECISION: u32 = 128;
const GUARD_BITS: u32 = 40;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Real {
    mant: BigInt,
    exp: i64,
    prec: u32,
}

fn bits(m: &BigInt) -> i64 {
    m.bits() as i64
}

/// Shifts `m` right by `s` bits rounding to nearest, ties to even.
fn shift_round(m: &BigInt, s: u64) -> BigInt {
    if s == 0 {
        return m.clone();
    }
    let neg = m.is_negative();
    let mag = m.abs();
    let mut q: BigInt = &mag >> s;
    let rem: BigInt = &mag - (&q << s);
    let half = BigInt::one() << (s - 1);
    match rem.cmp(&half) {
        Ordering::Greater => q += 1,
        Ordering::Equal if q.is_odd() => q += 1,
        _ => {}
    }
    if neg {
        -q
    } else {
        q
    }
}

/// Multiplies by `2^s`, rounding when `s` is negative.
fn shift(m: &BigInt, s: i64) -> BigInt {
    if s >= 0 {
        m << (s as u64)
    } else {
        shift_round(m, (-s) as u64)
    }
}

impl Real {
    fn normalized(mut mant: BigInt, mut exp: i64, prec: u32) -> Real {
        assert!(prec >= 8, "precision below 8 bits");
        if mant.is_zero() {
            return Real { mant, exp: 0, prec };
        }
        let b = bits(&mant);
        if b > prec as i64 {
            let s = (b - prec as i64) as u64;
            mant = shift_round(&mant, s);
            exp += s as i64;
        }
        let tz = mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            mant >>= tz;
            exp += tz as i64;
        }
        Real { mant, exp, prec }
    }

    pub fn zero(prec: u32) -> Real {
        Real::normalized(BigInt::zero(), 0, prec)
    }

    pub fn one(prec: u32) -> Real {
        Real::from_int(1, prec)
    }

    pub fn from_int(v: i64, prec: u32) -> Real {
        Real::normalized(BigInt::from(v), 0, prec)
    }

    pub fn from_bigint(v: &BigInt, prec: u32) -> Real {
        Real::normalized(v.clone(), 0, prec)
    }

    /// Correctly rounded conversion of an exact rational.
    pub fn from_rational(v: &Q, prec: u32) -> Real {
        let num = v.numer();
        let den = v.denom();
        if num.is_zero() {
            return Real::zero(prec);
        }
        let s = (prec as i64 + 2 + bits(den) - bits(num)).max(0);
        let scaled = num.abs() << (s as u64);
        let (quot, rem) = scaled.div_rem(den);
        let mut mant: BigInt = quot * 2;
        if !rem.is_zero() {
            mant += 1;
        }
        if num.is_negative() {
            mant = -mant;
        }
        Real::normalized(mant, -s - 1, prec)
    }

    /// Nearest `Real` to an `f64` (exact for finite inputs at 53+ bits).
    pub fn from_f64(v: f64, prec: u32) -> Real {
        assert!(v.is_finite(), "non-finite f64");
        if v == 0.0 {
            return Real::zero(prec);
        }
        let bits = v.to_bits();
        let sign = if (bits >> 63) == 1 { -1i64 } else { 1 };
        let e = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1u64 << 52) - 1)) as i64;
        let (m, ex) = if e == 0 {
            (frac, -1074)
        } else {
            (frac | (1i64 << 52), e - 1075)
        };
        Real::normalized(BigInt::from(sign * m), ex, prec)
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn with_precision(&self, prec: u32) -> Real {
        Real::normalized(self.mant.clone(), self.exp, prec)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.mant.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn abs(&self) -> Real {
        Real {
            mant: self.mant.abs(),
            exp: self.exp,
            prec: self.prec,
        }
    }

    /// Exact value as a rational.
    pub fn to_rational(&self) -> Q {
        if self.exp >= 0 {
            Q::from_integer(&self.mant << (self.exp as u64))
        } else {
            Q::new(self.mant.clone(), BigInt::one() << ((-self.exp) as u64))
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let b = bits(&self.mant);
        let (m, e) = if b > 60 {
            (shift_round(&self.mant, (b - 60) as u64), self.exp + b - 60)
        } else {
            (self.mant.clone(), self.exp)
        };
        let m = m.to_f64().unwrap_or(f64::NAN);
        let e = e.clamp(-4000, 4000) as i32;
        // split the scaling so intermediate powers stay finite
        let half = e / 2;
        m * 2f64.powi(half) * 2f64.powi(e - half)
    }

    /// Position of the leading bit: `2^(top-1) <= |x| < 2^top`.
    fn top(&self) -> i64 {
        self.exp + bits(&self.mant)
    }

    fn combine_prec(&self, other: &Real) -> u32 {
        self.prec.max(other.prec)
    }

    fn add_impl(&self, other: &Real, prec: u32) -> Real {
        if self.is_zero() {
            return other.with_precision(prec);
        }
        if other.is_zero() {
            return self.with_precision(prec);
        }
        let (big, small) = if self.top() >= other.top() {
            (self, other)
        } else {
            (other, self)
        };
        if big.top() - small.top() > prec as i64 + 4 {
            // `small` only affects rounding: fold it in as a sticky unit
            let k = (prec as i64 + 4 - bits(&big.mant)).max(0);
            let mant = (&big.mant << (k as u64)) + BigInt::from(small.mant.sign().sign_i64());
            return Real::normalized(mant, big.exp - k, prec);
        }
        let e = self.exp.min(other.exp);
        let a = &self.mant << ((self.exp - e) as u64);
        let b = &other.mant << ((other.exp - e) as u64);
        Real::normalized(a + b, e, prec)
    }

    fn mul_impl(&self, other: &Real, prec: u32) -> Real {
        Real::normalized(&self.mant * &other.mant, self.exp + other.exp, prec)
    }

    fn div_impl(&self, other: &Real, prec: u32) -> Real {
        assert!(!other.is_zero(), "division by zero");
        if self.is_zero() {
            return Real::zero(prec);
        }
        let s = (prec as i64 + 2 + bits(&other.mant) - bits(&self.mant)).max(0);
        let (quot, rem): (BigInt, BigInt) = (self.mant.abs() << (s as u64)).div_rem(&other.mant.abs());
        let mut mant: BigInt = quot * 2;
        if !rem.is_zero() {
            mant += 1;
        }
        if self.mant.sign() != other.mant.sign() {
            mant = -mant;
        }
        Real::normalized(mant, self.exp - other.exp - s - 1, prec)
    }

    /// Value scaled to a fixed-point integer with `w` fractional bits.
    fn to_fixed(&self, w: u32) -> BigInt {
        shift(&self.mant, self.exp + w as i64)
    }

    fn from_fixed(v: BigInt, w: u32, prec: u32) -> Real {
        Real::normalized(v, -(w as i64), prec)
    }

    /// Natural logarithm. Fails for nonpositive input.
    pub fn ln(&self) -> Result<Real> {
        if !self.is_positive() {
            return Err(Error::NonPositive {
                index: 0,
                value: self.to_string(),
            });
        }
        let w = self.prec + GUARD_BITS;
        let b = bits(&self.mant);
        // self = m * 2^k with m in [1/2, 1)
        let mut k = self.exp + b;
        let mut m = shift(&self.mant, w as i64 - b);
        let one = BigInt::one() << w;
        // move m into [1/sqrt(2), sqrt(2))
        if &m * 10_000 < &one * 7_071 {
            m <<= 1;
            k -= 1;
        }
        let y = ((&m - &one) << w) / (&m + &one);
        let mut acc = atanh_fixed(&y, w) << 1;
        if k != 0 {
            let extra = 64 - k.unsigned_abs().leading_zeros() + 2;
            let ln2 = ln2_fixed(w + extra);
            acc += shift_round(&(ln2 * BigInt::from(k)), extra as u64);
        }
        Ok(Real::from_fixed(acc, w, self.prec))
    }

    /// `e^self`.
    pub fn exp(&self) -> Result<Real> {
        let prec = self.prec;
        if self.is_zero() {
            return Ok(Real::one(prec));
        }
        // reduce: self = n ln2 + r, |r| <= ln2/2
        let approx = self.to_f64() / std::f64::consts::LN_2;
        if !approx.is_finite() || approx.abs() > 1e15 {
            return Err(Error::InvalidArgument(format!(
                "exponent {self} outside the representable range"
            )));
        }
        let n = approx.round() as i64;
        let w = prec + GUARD_BITS;
        let extra = 64 - n.unsigned_abs().leading_zeros() + 2;
        let ln2 = ln2_fixed(w + extra);
        let x = self.to_fixed(w + extra);
        let r = shift_round(&(x - ln2 * BigInt::from(n)), extra as u64);
        // halve the argument a few times, then square back
        const HALVINGS: u32 = 12;
        let wr = w + HALVINGS;
        let one = BigInt::one() << wr;
        // `r` carries w fractional bits; read at wr bits it is r / 2^HALVINGS
        let mut sum = one.clone();
        let mut term = one.clone();
        let mut i = 1u32;
        loop {
            term = shift_round(&(&term * &r), wr as u64);
            term /= i;
            if term.is_zero() {
                break;
            }
            sum += &term;
            i += 1;
        }
        for _ in 0..HALVINGS {
            sum = shift_round(&(&sum * &sum), wr as u64);
        }
        Ok(Real::normalized(sum, n - wr as i64, prec))
    }

    /// `base^self` for `base > 0`.
    pub fn exp_base(base: &Real, x: &Real) -> Result<Real> {
        let prec = base.prec.max(x.prec);
        let hi = prec + 64;
        let lnb = base.with_precision(hi).ln()?;
        let y = lnb.mul_impl(&x.with_precision(hi), hi);
        Ok(y.exp()?.with_precision(prec))
    }

    /// `ln(self) / ln(base)`.
    pub fn log_base(&self, base: &Real) -> Result<Real> {
        let prec = self.prec.max(base.prec);
        let hi = prec + 32;
        let num = self.with_precision(hi).ln()?;
        let den = base.with_precision(hi).ln()?;
        if den.is_zero() {
            return Err(Error::InvalidScale(base.to_string()));
        }
        Ok(num.div_impl(&den, hi).with_precision(prec))
    }

    pub fn max(self, other: Real) -> Real {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Fixed notation with `frac_digits` digits after the point, rounded.
    pub fn to_fixed_string(&self, frac_digits: usize) -> String {
        let scaled = self.to_rational() * Q::from_integer(num_traits::pow(BigInt::from(10), frac_digits));
        let rounded = round_half_even(&scaled);
        insert_point(&rounded, frac_digits)
    }

    /// Decimal rendering with `sig` significant digits, trailing zeros trimmed.
    /// Uses fixed notation for magnitudes in `[1e-6, 1e21)` and scientific
    /// notation elsewhere.
    pub fn to_decimal_string(&self, sig: usize) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let sig = sig.max(1);
        let value = self.to_rational();
        // decimal exponent estimate, corrected below
        let mut e10 = ((self.top() - 1) as f64 * std::f64::consts::LOG10_2).floor() as i64;
        let digits = loop {
            let shift_by = sig as i64 - 1 - e10;
            let scaled = &value * pow10(shift_by);
            let r = round_half_even(&scaled).abs();
            let len = r.to_string().len() as i64;
            if len > sig as i64 {
                e10 += 1;
            } else if len < sig as i64 {
                e10 -= 1;
            } else {
                break r;
            }
        };
        let digits = digits.to_string();
        let sign = if self.is_negative() { "-" } else { "" };
        if (-6..21).contains(&e10) {
            let frac_digits = (sig as i64 - 1 - e10).max(0) as usize;
            let mut body = if e10 >= sig as i64 - 1 {
                let mut s = digits.clone();
                s.extend(std::iter::repeat_n('0', (e10 - (sig as i64 - 1)) as usize));
                s
            } else {
                insert_point(&digits.parse::<BigInt>().unwrap(), frac_digits)
            };
            if body.contains('.') {
                while body.ends_with('0') {
                    body.pop();
                }
                if body.ends_with('.') {
                    body.pop();
                }
            }
            format!("{sign}{body}")
        } else {
            let mut mantissa = format!("{}.{}", &digits[..1], &digits[1..]);
            while mantissa.ends_with('0') {
                mantissa.pop();
            }
            if mantissa.ends_with('.') {
                mantissa.pop();
            }
            format!("{sign}{mantissa}e{e10}")
        }
    }

    /// Number of decimal digits carried by `prec` bits.
    pub fn decimal_digits(prec: u32) -> usize {
        (prec as f64 * std::f64::consts::LOG10_2).ceil() as usize
    }
}

fn pow10(e: i64) -> Q {
    let p = num_traits::pow(BigInt::from(10), e.unsigned_abs() as usize);
    if e >= 0 {
        Q::from_integer(p)
    } else {
        Q::new(BigInt::one(), p)
    }
}

fn round_half_even(v: &Q) -> BigInt {
    let floor = v.floor();
    let diff = v - &floor;
    let half = Q::new(BigInt::one(), BigInt::from(2));
    let f = floor.to_integer();
    match diff.cmp(&half) {
        Ordering::Greater => f + 1,
        Ordering::Equal if f.is_odd() => f + 1,
        _ => f,
    }
}

fn insert_point(v: &BigInt, frac_digits: usize) -> String {
    let neg = v.is_negative();
    let mut s = v.abs().to_string();
    if frac_digits > 0 {
        if s.len() <= frac_digits {
            s = format!("{}{}", "0".repeat(frac_digits + 1 - s.len()), s);
        }
        s.insert(s.len() - frac_digits, '.');
    }
    if neg && v.sign() != Sign::NoSign {
        s.insert(0, '-');
    }
    s
}

/// `atanh(y)` for a fixed-point `y` with `w` fractional bits, `|y| < 1/2`.
fn atanh_fixed(y: &BigInt, w: u32) -> BigInt {
    let y2 = shift_round(&(y * y), w as u64);
    let mut term = y.clone();
    let mut acc = BigInt::zero();
    let mut k = 1u64;
    while !term.is_zero() {
        acc += &term / BigInt::from(k);
        term = shift_round(&(&term * &y2), w as u64);
        k += 2;
    }
    acc
}

/// `ln 2 = 2 atanh(1/3)` with `w` fractional bits.
fn ln2_fixed(w: u32) -> BigInt {
    let guard = 16;
    let third = (BigInt::one() << (w + guard)) / 3;
    shift_round(&(atanh_fixed(&third, w + guard) << 1), guard as u64)
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Real {
    fn cmp(&self, other: &Self) -> Ordering {
        let sa = self.mant.sign();
        let sb = other.mant.sign();
        if sa != sb {
            return sign_rank(sa).cmp(&sign_rank(sb));
        }
        if sa == Sign::NoSign {
            return Ordering::Equal;
        }
        let mag = if self.top() != other.top() {
            self.top().cmp(&other.top())
        } else {
            let e = self.exp.min(other.exp);
            let a = self.mant.abs() << ((self.exp - e) as u64);
            let b = other.mant.abs() << ((other.exp - e) as u64);
            a.cmp(&b)
        };
        if sa == Sign::Minus {
            mag.reverse()
        } else {
            mag
        }
    }
}

fn sign_rank(s: Sign) -> i8 {
    match s {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

trait SignI64 {
    fn sign_i64(&self) -> i64;
}

impl SignI64 for Sign {
    fn sign_i64(&self) -> i64 {
        match self {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = f.precision().unwrap_or_else(|| Real::decimal_digits(self.prec));
        f.write_str(&self.to_decimal_string(sig))
    }
}

impl serde::Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real {
            mant: -self.mant,
            exp: self.exp,
            prec: self.prec,
        }
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        -(self.clone())
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $imp:ident) => {
        impl $tr<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                let p = self.combine_prec(rhs);
                self.$imp(rhs, p)
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                (&self).$method(rhs)
            }
        }
        impl $tr<Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                self.$method(&rhs)
            }
        }
    };
}

impl Real {
    fn sub_impl(&self, other: &Real, prec: u32) -> Real {
        self.add_impl(&-other, prec)
    }
}

binop!(Add, add, add_impl);
binop!(Sub, sub, sub_impl);
binop!(Mul, mul, mul_impl);
binop!(Div, div, div_impl);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{frac, q};

    const P: u32 = 128;

    fn r(n: i64) -> Real {
        Real::from_int(n, P)
    }

    #[test]
    fn rational_round_trip_is_exact_for_dyadics() {
        let v = frac(-13, 16);
        assert_eq!(Real::from_rational(&v, P).to_rational(), v);
    }

    #[test]
    fn rounding_is_to_nearest() {
        let third = Real::from_rational(&frac(1, 3), 16);
        let err = (third.to_rational() - frac(1, 3)).abs();
        assert!(err <= Q::new(BigInt::one(), BigInt::one() << 17u32));
    }

    #[test]
    fn arithmetic_matches_rationals() {
        let a = Real::from_rational(&frac(7, 3), P);
        let b = Real::from_rational(&frac(-5, 11), P);
        let exact = frac(7, 3) * frac(-5, 11) + frac(7, 3) / frac(-5, 11);
        let got = (&a * &b + &a / &b).to_rational();
        let tol = Q::new(BigInt::one(), BigInt::one() << 120u32);
        assert!((got - exact).abs() < tol);
    }

    #[test]
    fn far_apart_addition_keeps_rounding() {
        let big = Real::from_int(1, 16);
        let tiny = Real::from_rational(&Q::new(BigInt::one(), BigInt::one() << 200u32), 16);
        assert_eq!(&big + &tiny, big);
        assert_eq!(&big - &tiny, big);
    }

    #[test]
    fn ln_and_exp_known_values() {
        // ln 2 = 0.693147180559945309417232121458176568075500134360255254120680...
        let ln2 = r(2).ln().unwrap();
        assert_eq!(ln2.to_fixed_string(36), "0.693147180559945309417232121458176568");
        // e = 2.718281828459045235360287471352662497757247093699959574966967...
        let e = r(1).exp().unwrap();
        assert_eq!(e.to_fixed_string(36), "2.718281828459045235360287471352662498");
        assert!(r(0).ln().is_err());
        assert!(r(-3).ln().is_err());
    }

    #[test]
    fn exp_inverts_ln() {
        for v in [frac(1, 1000), frac(3, 7), q(1), q(10), q(123_456_789)] {
            let x = Real::from_rational(&v, P);
            let back = x.ln().unwrap().exp().unwrap();
            let rel = ((back.to_rational() - &v) / &v).abs();
            assert!(rel < Q::new(BigInt::one(), BigInt::one() << 118u32), "{v}");
        }
    }

    #[test]
    fn log_base_of_power_is_integer() {
        let t = r(10);
        let v = r(1000).log_base(&t).unwrap();
        assert!(
            (v - r(3)).abs() < Real::from_rational(&Q::new(BigInt::one(), num_traits::pow(BigInt::from(10), 30)), P)
        );
    }

    #[test]
    fn ordering_and_display() {
        assert!(r(-3) < r(2));
        assert!(Real::from_rational(&frac(1, 3), P) < Real::from_rational(&frac(1, 2), P));
        assert_eq!(r(1000).to_decimal_string(10), "1000");
        assert_eq!(Real::from_rational(&frac(1, 4), P).to_decimal_string(5), "0.25");
        assert_eq!(Real::from_rational(&frac(-1, 3), P).to_decimal_string(4), "-0.3333");
        assert_eq!(
            Real::from_rational(&Q::from_integer(num_traits::pow(BigInt::from(10), 30)), P).to_decimal_string(3),
            "1e30"
        );
    }

    #[test]
    fn f64_conversions() {
        let x = Real::from_f64(0.1, 64);
        assert_eq!(x.to_f64(), 0.1);
        assert_eq!(r(-6).to_f64(), -6.0);
    }
}
