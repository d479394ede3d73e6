//! The Lotka-Volterra cell automaton
//! `u^{s+1}_{n+1} = u^{s+1}_n + max(L, u^s_{n+1}) - max(L, u^s_{n+2})`,
//! its rational deformation
//! `z^{s+1}_{n+1} = z^{s+1}_n (t^L + z^s_{n+1}) / (t^L + z^s_{n+2})`,
//! their comparison through `Log_t`, relation A and its variety, and
//! soliton tracking.
//!
//! Rows are extended to the right by the background and every new row is
//! seeded with the background in cell 0.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::dequantize::{dequantize, exp_t_exact, FamilyMonomial, LogScale, RationalFamily, ScaleParameter};
use crate::error::{Error, Result};
use crate::exact::{as_integer, pow_int, serde_q, Q};
use crate::real::Real;
use crate::tropical::{normalize, TropicalExpr, VarNames};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeMode {
    PiecewiseLinear,
    Rational {
        #[serde(with = "serde_q")]
        t: Q,
    },
}

/// Values `u[s][n]` for `s in 0..=S`, `n in 0..N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LatticeField {
    pub mode: LatticeMode,
    #[serde(with = "serde_q")]
    pub l: Q,
    #[serde(with = "serde_q")]
    pub background: Q,
    #[serde(serialize_with = "serialize_rows")]
    rows: Vec<Vec<Q>>,
}

fn serialize_rows<S: serde::Serializer>(rows: &[Vec<Q>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for r in rows {
        let texts: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        seq.serialize_element(&texts)?;
    }
    seq.end()
}

impl LatticeField {
    /// Wraps externally produced rows, checking shape and positivity. Use
    /// [`audit`] to check the recurrence.
    pub fn from_rows(mode: LatticeMode, l: Q, background: Q, rows: Vec<Vec<Q>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if width == 0 {
            return Err(Error::InvalidArgument("a field needs at least one nonempty row".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: r.len(),
            });
        }
        if let LatticeMode::Rational { t } = &mode {
            check_scale(t)?;
            check_positive(&background, 0)?;
            for r in &rows {
                for (n, v) in r.iter().enumerate() {
                    check_positive(v, n)?;
                }
            }
        }
        Ok(LatticeField {
            mode,
            l,
            background,
            rows,
        })
    }

    pub fn rows(&self) -> &[Vec<Q>] {
        &self.rows
    }

    pub fn row(&self, s: usize) -> &[Q] {
        &self.rows[s]
    }

    pub fn steps(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    fn scale(&self) -> Option<&Q> {
        match &self.mode {
            LatticeMode::Rational { t } => Some(t),
            LatticeMode::PiecewiseLinear => None,
        }
    }

    /// One row per time step: `s,precision_bits,u_0,...`.
    pub fn to_csv(&self, bits: u32) -> String {
        let mut out = String::from("s,precision_bits");
        for n in 0..self.width() {
            let _ = write!(out, ",u{n}");
        }
        out.push('\n');
        for (s, r) in self.rows.iter().enumerate() {
            let _ = write!(out, "{s},{bits}");
            for v in r {
                let d = Real::from_rational(v, bits).to_decimal_string(Real::decimal_digits(bits));
                let _ = write!(out, ",{d}");
            }
            out.push('\n');
        }
        out
    }

    /// 8-bit grayscale image, one pixel row per time step. Rational fields
    /// are drawn through `Log_t`.
    pub fn to_pgm(&self) -> Result<(Vec<u8>, PgmMapping)> {
        const BITS: u32 = 64;
        let values: Vec<Vec<Q>> = match self.scale() {
            None => self.rows.clone(),
            Some(t) => {
                let scale = LogScale::new(&ScaleParameter::exact(t.clone())?, BITS)?;
                self.rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|v| Ok(scale.log(&Real::from_rational(v, BITS))?.to_rational()))
                            .collect::<Result<Vec<Q>>>()
                    })
                    .collect::<Result<_>>()?
            }
        };
        let min = values.iter().flatten().min().cloned().expect("nonempty");
        let max = values.iter().flatten().max().cloned().expect("nonempty");
        let range = &max - &min;
        let half = Q::new(BigInt::one(), BigInt::from(2));
        let (w, h) = (self.width(), self.rows.len());
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for r in &values {
            for v in r {
                let level = if range.is_zero() {
                    0u8
                } else {
                    let x = (v - &min) * Q::from_integer(255.into()) / &range + &half;
                    x.floor().to_integer().try_into().unwrap_or(255u8)
                };
                out.push(level);
            }
        }
        let mapping = PgmMapping {
            width: w,
            height: h,
            transform: if self.scale().is_some() { "log_t" } else { "identity" },
            min,
            max,
            formula: "floor(255 * (v - min) / (max - min) + 1/2), 0 when max = min",
        };
        Ok((out, mapping))
    }
}

/// Sidecar description of a PGM rendering.
#[derive(Clone, Debug, Serialize)]
pub struct PgmMapping {
    pub width: usize,
    pub height: usize,
    pub transform: &'static str,
    #[serde(with = "serde_q")]
    pub min: Q,
    #[serde(with = "serde_q")]
    pub max: Q,
    pub formula: &'static str,
}

fn check_scale(t: &Q) -> Result<()> {
    if t <= &Q::one() {
        return Err(Error::InvalidScale(format!("t = {t} must exceed 1")));
    }
    Ok(())
}

fn check_positive(v: &Q, index: usize) -> Result<()> {
    if !v.is_positive() {
        return Err(Error::NonPositive {
            index,
            value: v.to_string(),
        });
    }
    Ok(())
}

fn at<'a>(row: &'a [Q], n: usize, b: &'a Q) -> &'a Q {
    row.get(n).unwrap_or(b)
}

fn lvca_row(prev: &[Q], l: &Q, b: &Q) -> Vec<Q> {
    let m = |v: &Q| if v > l { v.clone() } else { l.clone() };
    let mut next = Vec::with_capacity(prev.len());
    next.push(b.clone());
    for n in 0..prev.len() - 1 {
        let v = &next[n] + m(at(prev, n + 1, b)) - m(at(prev, n + 2, b));
        next.push(v);
    }
    next
}

fn rational_row(prev: &[Q], tl: &Q, bz: &Q) -> Vec<Q> {
    let mut next = Vec::with_capacity(prev.len());
    next.push(bz.clone());
    for n in 0..prev.len() - 1 {
        let v = &next[n] * (tl + at(prev, n + 1, bz)) / (tl + at(prev, n + 2, bz));
        next.push(v);
    }
    next
}

pub fn evolve_lvca(row0: &[Q], l: &Q, steps: usize, background: &Q) -> Result<LatticeField> {
    if row0.is_empty() {
        return Err(Error::InvalidArgument("initial row is empty".into()));
    }
    let mut rows = vec![row0.to_vec()];
    for s in 0..steps {
        let next = lvca_row(&rows[s], l, background);
        rows.push(next);
    }
    Ok(LatticeField {
        mode: LatticeMode::PiecewiseLinear,
        l: l.clone(),
        background: background.clone(),
        rows,
    })
}

fn integer_l(l: &Q) -> Result<BigInt> {
    as_integer(l)
        .ok_or_else(|| Error::InexactMode(format!("t^L is irrational for non-integer L = {l}; use an integer L")))
}

/// Evolves the rational deformation. `background` is `b_z`; see
/// [`rational_background`] for the value matching a PL background.
pub fn evolve_rational_lv(row0: &[Q], l: &Q, t: &Q, steps: usize, background: &Q) -> Result<LatticeField> {
    if row0.is_empty() {
        return Err(Error::InvalidArgument("initial row is empty".into()));
    }
    check_scale(t)?;
    check_positive(background, 0)?;
    for (n, v) in row0.iter().enumerate() {
        check_positive(v, n)?;
    }
    let tl = pow_int(t, &integer_l(l)?)?;
    let mut rows = vec![row0.to_vec()];
    for s in 0..steps {
        let next = rational_row(&rows[s], &tl, background);
        rows.push(next);
    }
    Ok(LatticeField {
        mode: LatticeMode::Rational { t: t.clone() },
        l: l.clone(),
        background: background.clone(),
        rows,
    })
}

/// `t^b`, the rational background whose `Log_t` is the PL background `b`.
pub fn rational_background(t: &Q, b: &Q) -> Result<Q> {
    let e = as_integer(b).ok_or_else(|| Error::InexactMode(format!("t^b is irrational for b = {b}")))?;
    pow_int(t, &e)
}

/// Cell-wise `t^u` of an integer row.
pub fn exp_t_row(row: &[Q], t: &Q) -> Result<Vec<Q>> {
    check_scale(t)?;
    exp_t_exact(row, t).ok_or_else(|| Error::InexactMode("exp_t of a non-integer value is irrational".into()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub cells_checked: usize,
    /// `(s, n)` of every cell that fails its defining equation.
    pub violations: Vec<(usize, usize)>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks every cell of rows `1..=S` against the seed rule and the
/// recurrence, exactly.
pub fn audit(field: &LatticeField) -> Result<AuditReport> {
    let b = &field.background;
    let tl = match field.scale() {
        Some(t) => Some(pow_int(t, &integer_l(&field.l)?)?),
        None => None,
    };
    let m = |v: &Q| if v > &field.l { v.clone() } else { field.l.clone() };
    let mut violations = Vec::new();
    let mut cells = 0;
    for s in 1..field.rows.len() {
        let (prev, row) = (&field.rows[s - 1], &field.rows[s]);
        cells += 1;
        if &row[0] != b {
            violations.push((s, 0));
        }
        for n in 0..row.len() - 1 {
            cells += 1;
            let ok = match &tl {
                None => &row[n + 1] - &row[n] == m(at(prev, n + 1, b)) - m(at(prev, n + 2, b)),
                // cross-multiplied so no division happens
                Some(tl) => &row[n + 1] * (tl + at(prev, n + 2, b)) == &row[n] * (tl + at(prev, n + 1, b)),
            };
            if !ok {
                violations.push((s, n + 1));
            }
        }
    }
    Ok(AuditReport {
        cells_checked: cells,
        violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldComparison {
    pub precision_bits: u32,
    /// `max |Log_t(z) - u|` over all cells.
    pub max_deviation: Real,
    pub per_step: Vec<Real>,
}

/// Compares a rational field with a PL field cell-wise through `Log_t`.
pub fn compare_fields(fr: &LatticeField, fp: &LatticeField, precision: u32) -> Result<FieldComparison> {
    let t = fr
        .scale()
        .ok_or_else(|| Error::InvalidArgument("first field must be rational".into()))?;
    if fp.scale().is_some() {
        return Err(Error::InvalidArgument("second field must be piecewise linear".into()));
    }
    if fr.rows.len() != fp.rows.len() {
        return Err(Error::DimensionMismatch {
            expected: fp.rows.len(),
            actual: fr.rows.len(),
        });
    }
    if fr.width() != fp.width() {
        return Err(Error::DimensionMismatch {
            expected: fp.width(),
            actual: fr.width(),
        });
    }
    let scale = LogScale::new(&ScaleParameter::exact(t.clone())?, precision)?;
    let mut per_step = Vec::with_capacity(fr.rows.len());
    for (zr, ur) in fr.rows.iter().zip(&fp.rows) {
        let mut worst = Real::zero(precision);
        for (z, u) in zr.iter().zip(ur) {
            let d = (scale.log(&Real::from_rational(z, precision))? - Real::from_rational(u, precision)).abs();
            worst = worst.max(d);
        }
        per_step.push(worst);
    }
    let max_deviation = per_step.iter().cloned().max().expect("nonempty");
    Ok(FieldComparison {
        precision_bits: precision,
        max_deviation,
        per_step,
    })
}

/// Guaranteed bound on the `Log_t` deviation after `s` steps from matched
/// data: `(2^{s+1} - 2) log_t 2`. Each new cell is `b + M(u_1) - M(u_{n+1})`
/// with `M = max(L, .)`, whose smoothing is 1-Lipschitz and off by at most
/// `log_t 2`.
pub fn deviation_bound(t: &Q, steps: usize, precision: u32) -> Result<Real> {
    let scale = LogScale::new(&ScaleParameter::exact(t.clone())?, precision)?;
    let per = scale.log(&Real::from_int(2, precision))?;
    let factor = (BigInt::one() << (steps + 1)) - BigInt::from(2);
    Ok(Real::from_bigint(&factor, precision) * per)
}

/// Per-step `approx_error_bound` of the local LVCA map at `L`.
pub fn local_error_bound(l: &Q, t: &Q, precision: u32) -> Result<Real> {
    let tr = normalize(&lvca_local_map(l), 3)?;
    crate::dequantize::approx_error_bound(&tr, &ScaleParameter::exact(t.clone())?, precision)
}

/// `x + max(L, y) - max(L, z)` in the variables `(u_n, u_{n+1}, u_{n+2})`.
pub fn lvca_local_map(l: &Q) -> TropicalExpr {
    let c = || TropicalExpr::Const(l.clone());
    TropicalExpr::Sum(vec![
        TropicalExpr::Var(0),
        TropicalExpr::Max(vec![c(), TropicalExpr::Var(1)]),
        TropicalExpr::neg(TropicalExpr::Max(vec![c(), TropicalExpr::Var(2)])),
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseRow {
    /// Index of the row whose successive ratios are measured.
    pub s: usize,
    #[serde(with = "serde_q")]
    pub max_relative_difference: Q,
    /// `max(row s-1, b_z) / t^L`.
    #[serde(with = "serde_q")]
    pub bound: Q,
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseReport {
    pub rows: Vec<CollapseRow>,
    pub holds: bool,
}

/// Checks `|z^{s+1}_{n+1} / z^{s+1}_n - 1| <= max_n z^s_n / t^L` exactly.
/// The ratio minus one equals `(z_{n+1} - z_{n+2}) / (t^L + z_{n+2})` on the
/// previous row, which gives the bound.
pub fn collapse_report(fr: &LatticeField) -> Result<CollapseReport> {
    let t = fr
        .scale()
        .ok_or_else(|| Error::InvalidArgument("collapse needs a rational field".into()))?;
    let tl = pow_int(t, &integer_l(&fr.l)?)?;
    let mut rows = Vec::new();
    let mut holds = true;
    for s in 1..fr.rows.len() {
        let row = &fr.rows[s];
        let worst = row
            .windows(2)
            .map(|w| (&w[1] / &w[0] - Q::one()).abs())
            .max()
            .unwrap_or_else(Q::zero);
        let top = fr.rows[s - 1]
            .iter()
            .chain([&fr.background])
            .max()
            .expect("nonempty")
            .clone();
        let bound = top / &tl;
        holds &= worst <= bound;
        rows.push(CollapseRow {
            s,
            max_relative_difference: worst,
            bound,
        });
    }
    Ok(CollapseReport { rows, holds })
}

/// `V1 + max(0, V2 + V3) = V2 + max(0, V1 + V4)`.
pub fn check_ca_relation(v: &[Q; 4]) -> bool {
    let z = Q::zero();
    let lhs = &v[0] + (&v[1] + &v[2]).max(z.clone());
    let rhs = &v[1] + (&v[0] + &v[3]).max(z);
    lhs == rhs
}

/// `z2 + z1 z2 z4 = z1 + z1 z2 z3`, exactly.
pub fn variety_membership(z: &[Q; 4]) -> bool {
    let (lhs, rhs) = variety_sides(z);
    lhs == rhs
}

fn variety_sides(z: &[Q; 4]) -> (Q, Q) {
    let p = &z[0] * &z[1];
    (&z[1] + &p * &z[3], &z[0] + &p * &z[2])
}

/// Leading-order membership at scale `t`: the two sides of the variety
/// equation agree up to a factor of 2. For `z = t^V` with integer `V` and
/// `t > 4` this holds exactly when relation A holds at `V`, since each side
/// is a sum of two powers of `t`.
pub fn variety_membership_leading(z: &[Q; 4], t: &Q) -> Result<bool> {
    check_scale(t)?;
    for (i, v) in z.iter().enumerate() {
        check_positive(v, i)?;
    }
    let (lhs, rhs) = variety_sides(z);
    let two = Q::from_integer(2.into());
    let r = lhs / rhs;
    Ok(r <= two && r.recip() <= two)
}

/// Random integer points `V`, cycling through three families: uniform,
/// solved so that relation A holds, and the diagonal `V1 = V2, V3 = V4`
/// whose image `t^V` lies on the variety.
pub fn sample_relation_points(n: usize, seed: u64, range: i64) -> Result<Vec<[Q; 4]>> {
    use rand::{Rng, SeedableRng};
    if range < 1 {
        return Err(Error::InvalidArgument(format!("range {range} must be positive")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(-range..=range);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let [a, b, c, d] = [draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng)];
        let v = match i % 3 {
            0 => [a, b, c, d],
            1 => {
                // need max(0, V1 + V4) = V1 + max(0, V2 + V3) - V2
                let target = a + (b + c).max(0) - b;
                if target > 0 {
                    [a, b, c, target - a]
                } else if target == 0 {
                    [a, b, c, -a - d.abs()]
                } else {
                    [a, b, c, d]
                }
            }
            _ => [a, a, c, c],
        };
        out.push(v.map(|x| Q::from_integer(BigInt::from(x))));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrespondenceReport {
    #[serde(with = "serde_q")]
    pub t: Q,
    pub points: usize,
    pub relation_holds: usize,
    pub exact_members: usize,
    /// Points where relation A and leading-order membership of `t^V` agree.
    pub leading_agreements: usize,
    /// Exact members of the variety at which relation A fails.
    pub exact_without_relation: usize,
    pub disagreements: Vec<usize>,
}

impl CorrespondenceReport {
    pub fn consistent(&self) -> bool {
        self.leading_agreements == self.points && self.exact_without_relation == 0
    }
}

/// Checks relation A at each integer point against the variety at `t^V`.
pub fn correspondence_check(points: &[[Q; 4]], t: &Q) -> Result<CorrespondenceReport> {
    let mut report = CorrespondenceReport {
        t: t.clone(),
        points: points.len(),
        relation_holds: 0,
        exact_members: 0,
        leading_agreements: 0,
        exact_without_relation: 0,
        disagreements: Vec::new(),
    };
    for (i, v) in points.iter().enumerate() {
        let z = exp_t_row(v, t)?;
        let z = [z[0].clone(), z[1].clone(), z[2].clone(), z[3].clone()];
        let a = check_ca_relation(v);
        let exact = variety_membership(&z);
        report.relation_holds += a as usize;
        report.exact_members += exact as usize;
        if exact && !a {
            report.exact_without_relation += 1;
        }
        if a == variety_membership_leading(&z, t)? {
            report.leading_agreements += 1;
        } else {
            report.disagreements.push(i);
        }
    }
    Ok(report)
}

/// A polynomial equation `sum(lhs) = sum(rhs)`, sides kept as monomial
/// multisets.
#[derive(Clone, Debug, Serialize)]
pub struct PolynomialEquation {
    pub arity: usize,
    pub lhs: RationalFamily,
    pub rhs: RationalFamily,
}

impl PolynomialEquation {
    /// Same equation up to exchanging the sides.
    pub fn same_as(&self, other: &PolynomialEquation) -> bool {
        self.arity == other.arity
            && ((self.lhs == other.lhs && self.rhs == other.rhs) || (self.lhs == other.rhs && self.rhs == other.lhs))
    }

    pub fn to_text(&self, names: &VarNames) -> String {
        let side = |f: &RationalFamily| {
            let t = f.to_text(names);
            t.strip_suffix(" / (1)").unwrap_or(&t).to_string()
        };
        format!("{} = {}", side(&self.lhs), side(&self.rhs))
    }
}

/// Dequantizes an equation between two max-plus polynomials term by term:
/// each `max` becomes a sum of monomials and each `+` a product.
pub fn dequantize_relation(lhs: &TropicalExpr, rhs: &TropicalExpr, arity: usize) -> Result<PolynomialEquation> {
    let side = |e: &TropicalExpr| -> Result<RationalFamily> {
        let tr = normalize(e, arity)?;
        if !tr.is_polynomial() {
            return Err(Error::InvalidArgument(format!("`{e}` is not a max-plus polynomial")));
        }
        Ok(dequantize(&tr))
    };
    Ok(PolynomialEquation {
        arity,
        lhs: side(lhs)?,
        rhs: side(rhs)?,
    })
}

/// Relation A as two expressions in `(V1, V2, V3, V4)`.
pub fn relation_a() -> (TropicalExpr, TropicalExpr) {
    let names = variety_names();
    let lhs = TropicalExpr::parse_with("V1 + max(0, V2 + V3)", &names).expect("valid");
    let rhs = TropicalExpr::parse_with("V2 + max(0, V1 + V4)", &names).expect("valid");
    (lhs, rhs)
}

pub fn variety_names() -> VarNames {
    VarNames::custom(&["V1", "V2", "V3", "V4"]).expect("valid names")
}

/// `z2 + z1 z2 z4 = z1 + z1 z2 z3` written out monomial by monomial.
pub fn variety_equation() -> PolynomialEquation {
    let mono = |e: [i64; 4]| FamilyMonomial {
        t_exponent: Q::zero(),
        var_exponents: e.to_vec(),
    };
    let unit = vec![mono([0; 4])];
    PolynomialEquation {
        arity: 4,
        lhs: RationalFamily {
            arity: 4,
            numerator: vec![mono([0, 1, 0, 0]), mono([1, 1, 0, 1])],
            denominator: unit.clone(),
        },
        rhs: RationalFamily {
            arity: 4,
            numerator: vec![mono([1, 0, 0, 0]), mono([1, 1, 1, 0])],
            denominator: unit,
        },
    }
}

/// A maximal run of cells differing from the background.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    /// `sum |u - b|` over the block.
    #[serde(with = "serde_q")]
    pub mass: Q,
    #[serde(with = "serde_q")]
    pub centroid: Q,
    /// Sorted `|u - b|` values.
    #[serde(with = "crate::exact::serde_q_vec")]
    pub shape: Vec<Q>,
}

pub fn blocks(row: &[Q], background: &Q) -> Vec<Block> {
    let mut out = Vec::new();
    let mut n = 0;
    while n < row.len() {
        if &row[n] == background {
            n += 1;
            continue;
        }
        let start = n;
        while n < row.len() && &row[n] != background {
            n += 1;
        }
        let dev: Vec<Q> = row[start..n].iter().map(|v| (v - background).abs()).collect();
        let mass: Q = dev.iter().sum();
        let moment: Q = dev
            .iter()
            .enumerate()
            .map(|(i, d)| d * Q::from_integer(BigInt::from(start + i)))
            .sum();
        let mut shape = dev;
        shape.sort();
        out.push(Block {
            start,
            end: n - 1,
            centroid: moment / &mass,
            mass,
            shape,
        });
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SolitonTrack {
    pub start_step: usize,
    pub blocks: Vec<Block>,
    /// Least-squares slope of the centroid against time.
    #[serde(with = "serde_q")]
    pub speed: Q,
    /// Every step moves the centroid by the same integer.
    pub constant_speed: bool,
    pub shape_preserving: bool,
}

impl SolitonTrack {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    fn finish(start_step: usize, blocks: Vec<Block>) -> SolitonTrack {
        let steps: Vec<Q> = blocks.windows(2).map(|w| &w[1].centroid - &w[0].centroid).collect();
        let constant_speed = steps.windows(2).all(|w| w[0] == w[1]) && steps.first().is_none_or(|d| d.is_integer());
        let shape_preserving = blocks.windows(2).all(|w| w[0].shape == w[1].shape);
        SolitonTrack {
            start_step,
            speed: fit_speed(&blocks),
            constant_speed,
            shape_preserving,
            blocks,
        }
    }
}

fn fit_speed(blocks: &[Block]) -> Q {
    let n = blocks.len();
    if n < 2 {
        return Q::zero();
    }
    let nq = Q::from_integer(BigInt::from(n));
    let ts: Vec<Q> = (0..n).map(|i| Q::from_integer(BigInt::from(i))).collect();
    let tm: Q = ts.iter().sum::<Q>() / &nq;
    let cm: Q = blocks.iter().map(|b| b.centroid.clone()).sum::<Q>() / &nq;
    let mut num = Q::zero();
    let mut den = Q::zero();
    for (t, b) in ts.iter().zip(blocks) {
        num += (t - &tm) * (&b.centroid - &cm);
        den += (t - &tm) * (t - &tm);
    }
    num / den
}

/// Links blocks across steps by nearest centroid. A track continues only
/// into a block within one block width (plus one cell) of its last
/// centroid; a block claimed by two tracks ends both and starts afresh.
pub fn track_solitons(field: &LatticeField) -> Result<Vec<SolitonTrack>> {
    if field.scale().is_some() {
        return Err(Error::InvalidArgument("soliton tracking needs a PL field".into()));
    }
    let mut done: Vec<(usize, Vec<Block>)> = Vec::new();
    let mut active: Vec<(usize, Vec<Block>)> = Vec::new();
    for (s, row) in field.rows.iter().enumerate() {
        let found = blocks(row, &field.background);
        let mut claims: Vec<Vec<usize>> = vec![Vec::new(); found.len()];
        let mut unmatched = Vec::new();
        for (ti, (_, track)) in active.iter().enumerate() {
            let last = track.last().expect("tracks are nonempty");
            let reach = Q::from_integer(BigInt::from(last.end - last.start + 2));
            let best = found
                .iter()
                .enumerate()
                .map(|(bi, b)| (bi, (&b.centroid - &last.centroid).abs()))
                .filter(|(_, d)| d <= &reach)
                .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
            match best {
                Some((bi, _)) => claims[bi].push(ti),
                None => unmatched.push(ti),
            }
        }
        let mut old: Vec<Option<(usize, Vec<Block>)>> = active.drain(..).map(Some).collect();
        for ti in unmatched {
            done.push(old[ti].take().expect("unclaimed"));
        }
        for (bi, block) in found.into_iter().enumerate() {
            match claims[bi].as_slice() {
                [ti] => {
                    let (start, mut track) = old[*ti].take().expect("claimed once");
                    track.push(block);
                    active.push((start, track));
                }
                many => {
                    for ti in many {
                        done.push(old[*ti].take().expect("claimed once"));
                    }
                    active.push((s, vec![block]));
                }
            }
        }
    }
    done.extend(active);
    done.sort_by_key(|(start, blocks)| (*start, blocks[0].start));
    Ok(done
        .into_iter()
        .map(|(start, blocks)| SolitonTrack::finish(start, blocks))
        .collect())
}
