//! Higher-order scalar recurrences `x_n = rule(x_{n-k}, ..., x_{n-1})` in
//! piecewise-linear or dequantized rational mode, exact period detection,
//! and the finite-t conjugacy check between `phi_t` and `f_t`.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::dequantize::{dequantize, exp_t_exact, LogScale, RationalFamily, ScaleParameter, Smoothing};
use crate::error::{Error, Result};
use crate::exact::Q;
use crate::number::Number;
use crate::real::Real;
use crate::tropical::{TropicalExpr, TropicalRational};

/// Default cap on the bit length of exact samples.
pub const DEFAULT_BIT_BUDGET: u64 = 1 << 24;

#[derive(Clone, Debug)]
pub enum Rule {
    PiecewiseLinear(TropicalExpr),
    Rational { family: RationalFamily, t: ScaleParameter },
}

/// A recurrence of order `k` whose rule has arity `k`.
#[derive(Clone, Debug)]
pub struct Recurrence {
    order: usize,
    rule: Rule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitMode {
    PiecewiseLinear,
    RationalExact,
    RationalApprox,
}

impl Recurrence {
    pub fn piecewise_linear(rule: TropicalExpr, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("recurrence order must be at least 1".into()));
        }
        rule.check_arity(order)?;
        Ok(Recurrence {
            order,
            rule: Rule::PiecewiseLinear(rule),
        })
    }

    pub fn rational(family: RationalFamily, t: ScaleParameter) -> Result<Self> {
        if family.arity == 0 {
            return Err(Error::InvalidArgument("recurrence order must be at least 1".into()));
        }
        Ok(Recurrence {
            order: family.arity,
            rule: Rule::Rational { family, t },
        })
    }

    /// The dequantized recurrence `f_t` of a tropical rational form.
    pub fn dequantized(tr: &TropicalRational, t: ScaleParameter) -> Result<Self> {
        Self::rational(dequantize(tr), t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }

    pub fn mode(&self) -> OrbitMode {
        match &self.rule {
            Rule::PiecewiseLinear(_) => OrbitMode::PiecewiseLinear,
            Rule::Rational { family, t } => {
                if t.as_exact().is_some() && family.has_integer_t_exponents() {
                    OrbitMode::RationalExact
                } else {
                    OrbitMode::RationalApprox
                }
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        self.mode() != OrbitMode::RationalApprox
    }

    fn check_init(&self, init: &[Q]) -> Result<()> {
        if init.len() != self.order {
            return Err(Error::DimensionMismatch {
                expected: self.order,
                actual: init.len(),
            });
        }
        if let Rule::Rational { .. } = self.rule {
            if let Some(i) = init.iter().position(|v| !v.is_positive()) {
                return Err(Error::NonPositive {
                    index: i,
                    value: init[i].to_string(),
                });
            }
        }
        Ok(())
    }

    fn step_exact(&self, window: &[Q]) -> Result<Q> {
        match &self.rule {
            Rule::PiecewiseLinear(e) => e.eval(window),
            Rule::Rational { family, t } => {
                let t = t
                    .as_exact()
                    .ok_or_else(|| Error::InexactMode("scale parameter is not rational".into()))?;
                family.eval_exact(t, window)
            }
        }
    }
}

/// A finite record of iterates. `samples[..order]` is the initial window.
#[derive(Clone, Debug, Serialize)]
pub struct Orbit {
    pub mode: OrbitMode,
    pub order: usize,
    /// Binary precision of approximate samples; `None` when exact.
    pub precision_bits: Option<u32>,
    pub samples: Vec<Number>,
}

impl Orbit {
    pub fn initial_window(&self) -> &[Number] {
        &self.samples[..self.order]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn exact_values(&self) -> Option<Vec<Q>> {
        self.samples.iter().map(|s| s.as_exact().cloned()).collect()
    }

    /// `n,value,precision_bits` rows; exact samples are rounded to `bits`.
    pub fn to_csv(&self, bits: u32) -> String {
        let bits = self.precision_bits.unwrap_or(bits);
        let mut out = String::from("n,value,precision_bits\n");
        for (n, s) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{n},{},{bits}", s.to_decimal(bits));
        }
        out
    }
}

fn bit_size(q: &Q) -> u64 {
    q.numer().bits() + q.denom().bits()
}

/// Iterates until the orbit holds `len` samples (initial window included).
///
/// Exact modes never round. The rational mode falls back to `precision`-bit
/// floats when `t` is not rational or the family has fractional t-exponents.
pub fn iterate(rec: &Recurrence, init: &[Q], len: usize, precision: u32) -> Result<Orbit> {
    iterate_with_budget(rec, init, len, precision, DEFAULT_BIT_BUDGET)
}

pub fn iterate_with_budget(rec: &Recurrence, init: &[Q], len: usize, precision: u32, bit_budget: u64) -> Result<Orbit> {
    rec.check_init(init)?;
    let k = rec.order;
    if len < k {
        return Err(Error::InvalidArgument(format!(
            "orbit length {len} is shorter than the recurrence order {k}"
        )));
    }
    let mode = rec.mode();
    if rec.is_exact() {
        let mut values = init.to_vec();
        while values.len() < len {
            let next = rec.step_exact(&values[values.len() - k..])?;
            let size = bit_size(&next);
            if size > bit_budget {
                return Err(Error::PrecisionExhausted {
                    precision: bit_budget.min(u32::MAX as u64) as u32,
                    estimated_error: format!("exact sample needs {size} bits"),
                });
            }
            values.push(next);
        }
        return Ok(Orbit {
            mode,
            order: k,
            precision_bits: None,
            samples: values.into_iter().map(Number::Exact).collect(),
        });
    }
    let Rule::Rational { family, t } = &rec.rule else {
        unreachable!("piecewise-linear rules are always exact")
    };
    let scale = LogScale::new(t, precision)?;
    let mut values: Vec<Real> = init.iter().map(|v| Real::from_rational(v, precision)).collect();
    while values.len() < len {
        let next = family.eval_real(&scale, &values[values.len() - k..])?;
        values.push(next);
    }
    Ok(Orbit {
        mode,
        order: k,
        precision_bits: Some(precision),
        samples: values.into_iter().map(Number::Approx).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodReport {
    pub found: bool,
    /// First index whose state window recurs.
    pub transient: usize,
    pub period: usize,
    /// `(transient, transient + period)` when found.
    pub witness: Option<(usize, usize)>,
    /// Number of state windows examined.
    pub states_scanned: usize,
}

/// Scans the state windows `(x_n, ..., x_{n+k-1})` for the first exact
/// repetition. The first repeat of a deterministic sequence fixes both the
/// minimal transient and the minimal period; if it falls outside the bounds,
/// no pair within the bounds exists.
pub fn detect_period(rec: &Recurrence, init: &[Q], max_transient: usize, max_period: usize) -> Result<PeriodReport> {
    detect_period_with_budget(rec, init, max_transient, max_period, DEFAULT_BIT_BUDGET)
}

pub fn detect_period_with_budget(
    rec: &Recurrence,
    init: &[Q],
    max_transient: usize,
    max_period: usize,
    bit_budget: u64,
) -> Result<PeriodReport> {
    if !rec.is_exact() {
        return Err(Error::InexactMode(
            "period detection needs exact arithmetic: use a rational t and integer t-exponents".into(),
        ));
    }
    if max_period == 0 {
        return Err(Error::InvalidArgument("max_period must be at least 1".into()));
    }
    rec.check_init(init)?;
    let k = rec.order;
    let last_state = max_transient + max_period;
    let mut values = init.to_vec();
    // hashing confirms by full equality of the window key
    let mut seen: HashMap<Vec<Q>, usize> = HashMap::new();
    for n in 0..=last_state {
        while values.len() < n + k {
            let next = rec.step_exact(&values[values.len() - k..])?;
            if bit_size(&next) > bit_budget {
                return Err(Error::PrecisionExhausted {
                    precision: bit_budget.min(u32::MAX as u64) as u32,
                    estimated_error: format!("exact sample needs {} bits", bit_size(&next)),
                });
            }
            values.push(next);
        }
        let state = values[n..n + k].to_vec();
        if let Some(&m) = seen.get(&state) {
            let period = n - m;
            let within = m <= max_transient && period <= max_period;
            return Ok(PeriodReport {
                found: within,
                transient: if within { m } else { 0 },
                period: if within { period } else { 0 },
                witness: within.then_some((m, n)),
                states_scanned: n + 1,
            });
        }
        seen.insert(state, n);
    }
    Ok(PeriodReport {
        found: false,
        transient: 0,
        period: 0,
        witness: None,
        states_scanned: last_state + 1,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugacyReport {
    pub steps: usize,
    pub precision_bits: u32,
    /// `max_n |Log_t(z_n) - x_n|` between the pulled-back `f_t` orbit and the
    /// `phi_t` orbit.
    pub max_deviation: Number,
    /// Difference between the `phi_t` orbit and a rerun with 64 more bits.
    pub estimated_rounding_error: Number,
    /// Whether the `f_t` orbit was computed without rounding.
    pub rational_side_exact: bool,
    pub deviations: Vec<Number>,
}

impl ConjugacyReport {
    pub fn max_deviation_real(&self) -> Real {
        self.max_deviation.to_real(self.precision_bits)
    }
}

fn is_affine(tr: &TropicalRational) -> bool {
    tr.counts() == (1, 1)
}

/// `n` with `v = t^n`, if `v` is an integral power of the rational `t`.
fn exact_log(v: &Q, t: &Q) -> Option<Q> {
    if !v.is_positive() {
        return None;
    }
    let (base, invert) = if t > &Q::one() {
        (t.clone(), false)
    } else {
        (t.recip(), true)
    };
    let (mut rest, sign) = if v >= &Q::one() {
        (v.clone(), 1i64)
    } else {
        (v.recip(), -1)
    };
    let mut n = 0i64;
    while rest > Q::one() {
        rest /= &base;
        n += 1;
        if n > 1_000_000 {
            return None;
        }
    }
    if !rest.is_one() {
        return None;
    }
    let n = if invert { -n * sign } else { n * sign };
    Some(Q::from_integer(BigInt::from(n)))
}

/// Iterates `phi_t` on `init` and `f_t` on `exp_t(init)` for `steps` samples
/// and compares them through `Log_t`.
///
/// Fails with [`Error::PrecisionExhausted`] when rerunning `phi_t` with 64
/// extra bits moves the orbit by more than `2^(-precision/2)`.
pub fn conjugacy_check(
    tr: &TropicalRational,
    t: &ScaleParameter,
    init: &[Q],
    steps: usize,
    precision: u32,
) -> Result<ConjugacyReport> {
    let k = tr.arity;
    if init.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: init.len(),
        });
    }
    if steps < k {
        return Err(Error::InvalidArgument(format!(
            "steps {steps} shorter than the recurrence order {k}"
        )));
    }
    let family = dequantize(tr);
    let exact_t = t.as_exact().filter(|_| family.has_integer_t_exponents());
    let exact_start = exact_t.and_then(|tq| exp_t_exact(init, tq).map(|z| (tq.clone(), z)));

    // f_t side
    let scale = LogScale::new(t, precision)?;
    let mut pulled_back: Vec<Number> = Vec::with_capacity(steps);
    if let Some((tq, z0)) = &exact_start {
        let rec = Recurrence::rational(family.clone(), t.clone())?;
        let orbit = iterate(&rec, z0, steps, precision)?;
        for z in orbit.exact_values().expect("exact orbit") {
            pulled_back.push(match exact_log(&z, tq) {
                Some(n) => Number::Exact(n),
                None => Number::Approx(scale.log(&Real::from_rational(&z, precision))?),
            });
        }
    } else {
        let mut zs: Vec<Real> = init
            .iter()
            .map(|v| scale.pow(&Real::from_rational(v, precision)))
            .collect::<Result<_>>()?;
        while zs.len() < steps {
            let next = family.eval_real(&scale, &zs[zs.len() - k..])?;
            zs.push(next);
        }
        for z in &zs {
            pulled_back.push(Number::Approx(scale.log(z)?));
        }
    }

    // phi_t side
    let smoothed: Vec<Number> = if is_affine(tr) {
        let e = crate::tropical::TropicalExpr::Sum(vec![
            affine_expr(&tr.numerator[0]),
            crate::tropical::TropicalExpr::neg(affine_expr(&tr.denominator[0])),
        ]);
        let rec = Recurrence::piecewise_linear(e, k)?;
        iterate(&rec, init, steps, precision)?.samples
    } else {
        phi_t_orbit(tr, t, init, steps, precision)?
            .into_iter()
            .map(Number::Approx)
            .collect()
    };

    let rounding = if is_affine(tr) {
        Number::Exact(Q::zero())
    } else {
        let hi = phi_t_orbit(tr, t, init, steps, precision + 64)?;
        let est = smoothed
            .iter()
            .zip(&hi)
            .map(|(a, b)| (a.to_real(precision + 64) - b).abs())
            .max()
            .unwrap_or_else(|| Real::zero(precision));
        let budget = Real::from_rational(&Q::new(BigInt::one(), BigInt::one() << (precision / 2)), precision);
        if est > budget {
            return Err(Error::PrecisionExhausted {
                precision,
                estimated_error: est.to_decimal_string(6),
            });
        }
        Number::Approx(est.with_precision(precision))
    };

    let deviations: Vec<Number> = pulled_back
        .iter()
        .zip(&smoothed)
        .map(|(a, b)| match (a, b) {
            (Number::Exact(a), Number::Exact(b)) => Number::Exact((a - b).abs()),
            _ => Number::Approx((a.to_real(precision) - b.to_real(precision)).abs()),
        })
        .collect();
    let max_deviation = deviations
        .iter()
        .cloned()
        .reduce(|a, b| match (&a, &b) {
            (Number::Exact(x), Number::Exact(y)) => Number::Exact(x.max(y).clone()),
            _ => Number::Approx(a.to_real(precision).max(b.to_real(precision))),
        })
        .expect("steps >= order >= 1");
    Ok(ConjugacyReport {
        steps,
        precision_bits: precision,
        max_deviation,
        estimated_rounding_error: rounding,
        rational_side_exact: exact_start.is_some(),
        deviations,
    })
}

fn affine_expr(m: &crate::tropical::TropicalMonomial) -> TropicalExpr {
    let mut terms = vec![TropicalExpr::Const(m.offset.clone())];
    for (i, e) in m.exponents.iter().enumerate() {
        for _ in 0..e.unsigned_abs() {
            terms.push(if *e > 0 {
                TropicalExpr::Var(i)
            } else {
                TropicalExpr::neg(TropicalExpr::Var(i))
            });
        }
    }
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        TropicalExpr::Sum(terms)
    }
}

/// `x_n = phi_t(x_{n-k}, ..., x_{n-1})` at the given precision.
pub fn phi_t_orbit(
    tr: &TropicalRational,
    t: &ScaleParameter,
    init: &[Q],
    steps: usize,
    precision: u32,
) -> Result<Vec<Real>> {
    let k = tr.arity;
    let smoothing = Smoothing::new(tr, t, precision)?;
    let mut xs: Vec<Real> = init.iter().map(|v| Real::from_rational(v, precision)).collect();
    while xs.len() < steps {
        let next = smoothing.eval(&xs[xs.len() - k..])?;
        xs.push(next);
    }
    Ok(xs)
}

/// Exact orbit of the classical Lyness map `z_n = (a + z_{n-1}) / z_{n-2}`.
pub fn classic_lyness_oracle(a: &Q, init: &[Q], len: usize) -> Result<Orbit> {
    if !a.is_positive() {
        return Err(Error::NonPositive {
            index: 0,
            value: a.to_string(),
        });
    }
    if init.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: init.len(),
        });
    }
    if let Some(i) = init.iter().position(|v| !v.is_positive()) {
        return Err(Error::NonPositive {
            index: i,
            value: init[i].to_string(),
        });
    }
    if len < 2 {
        return Err(Error::InvalidArgument("orbit length must be at least 2".into()));
    }
    let mut z = init.to_vec();
    while z.len() < len {
        let n = z.len();
        z.push((a + &z[n - 1]) / &z[n - 2]);
    }
    Ok(Orbit {
        mode: OrbitMode::RationalExact,
        order: 2,
        precision_bits: None,
        samples: z.into_iter().map(Number::Exact).collect(),
    })
}
