//! Two interval maps driven by a binary symbol sequence, the projection to
//! symbols, and detection of a finite-memory local rule.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{parse_rational, serde_q, serde_q_vec, Q};

/// `slope * x + intercept`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffinePiece {
    #[serde(with = "serde_q")]
    pub slope: Q,
    #[serde(with = "serde_q")]
    pub intercept: Q,
}

impl AffinePiece {
    pub fn new(slope: Q, intercept: Q) -> Self {
        AffinePiece { slope, intercept }
    }

    /// The affine map through `(a, fa)` and `(b, fb)`.
    pub fn through(a: &Q, fa: &Q, b: &Q, fb: &Q) -> Self {
        let slope = (fb - fa) / (b - a);
        let intercept = fa - &slope * a;
        AffinePiece { slope, intercept }
    }

    pub fn eval(&self, x: &Q) -> Q {
        &self.slope * x + &self.intercept
    }
}

/// A piecewise-affine self-map of `[0, 1]`.
///
/// Piece `i` lives on `[b_i, b_{i+1}]`; at an interior breakpoint the left
/// piece wins, so piece `0` covers `[0, b_1]` and piece `i > 0` covers
/// `(b_i, b_{i+1}]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntervalPLMap {
    #[serde(with = "serde_q_vec")]
    breakpoints: Vec<Q>,
    pieces: Vec<AffinePiece>,
}

impl IntervalPLMap {
    pub fn from_pieces(breakpoints: Vec<Q>, pieces: Vec<AffinePiece>) -> Result<Self> {
        let m = IntervalPLMap { breakpoints, pieces };
        m.validate()?;
        Ok(m)
    }

    /// The continuous map interpolating `values[i]` at `breakpoints[i]`.
    pub fn from_points(breakpoints: Vec<Q>, values: Vec<Q>) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::InvalidMap(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        check_breakpoints(&breakpoints)?;
        let pieces = (0..breakpoints.len() - 1)
            .map(|i| AffinePiece::through(&breakpoints[i], &values[i], &breakpoints[i + 1], &values[i + 1]))
            .collect();
        Self::from_pieces(breakpoints, pieces)
    }

    /// Pieces given by their values at the two ends of their interval.
    pub fn from_piece_values(breakpoints: Vec<Q>, ends: Vec<(Q, Q)>) -> Result<Self> {
        check_breakpoints(&breakpoints)?;
        if ends.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidMap(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                ends.len()
            )));
        }
        let pieces = ends
            .iter()
            .enumerate()
            .map(|(i, (fa, fb))| AffinePiece::through(&breakpoints[i], fa, &breakpoints[i + 1], fb))
            .collect();
        Self::from_pieces(breakpoints, pieces)
    }

    pub fn tent() -> Self {
        Self::from_points(vec![Q::zero(), half(), Q::one()], vec![Q::zero(), Q::one(), Q::zero()])
            .expect("tent map is valid")
    }

    /// `x / 2`, mapping into `[0, 1/2]`.
    pub fn lower_half() -> Self {
        Self::from_points(vec![Q::zero(), Q::one()], vec![Q::zero(), half()]).expect("valid")
    }

    /// `x / 2 + 1/2`, mapping into `[1/2, 1]`.
    pub fn upper_half() -> Self {
        Self::from_points(vec![Q::zero(), Q::one()], vec![half(), Q::one()]).expect("valid")
    }

    pub fn constant(c: Q) -> Result<Self> {
        Self::from_points(vec![Q::zero(), Q::one()], vec![c.clone(), c])
    }

    /// `tent`, `lower-half`, `upper-half`, `identity` or `constant:<q>`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "tent" => Ok(Self::tent()),
            "lower-half" => Ok(Self::lower_half()),
            "upper-half" => Ok(Self::upper_half()),
            "identity" => Self::from_points(vec![Q::zero(), Q::one()], vec![Q::zero(), Q::one()]),
            _ => match name.strip_prefix("constant:") {
                Some(c) => Self::constant(parse_rational(c)?),
                None => Err(Error::InvalidMap(format!("unknown built-in map `{name}`"))),
            },
        }
    }

    /// A built-in name or `pl:<b>:<v>,<b>:<v>,...`, the continuous map
    /// through the listed points.
    pub fn parse(text: &str) -> Result<Self> {
        let Some(spec) = text.strip_prefix("pl:") else {
            return Self::builtin(text);
        };
        let mut bs = Vec::new();
        let mut vs = Vec::new();
        for pair in spec.split(',') {
            let (b, v) = pair
                .split_once(':')
                .ok_or_else(|| Error::InvalidMap(format!("`{pair}` is not <breakpoint>:<value>")))?;
            bs.push(parse_rational(b)?);
            vs.push(parse_rational(v)?);
        }
        Self::from_points(bs, vs)
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    /// Values of piece `i` at the two ends of its interval.
    pub fn piece_ends(&self, i: usize) -> (Q, Q) {
        let p = &self.pieces[i];
        (p.eval(&self.breakpoints[i]), p.eval(&self.breakpoints[i + 1]))
    }

    fn validate(&self) -> Result<()> {
        check_breakpoints(&self.breakpoints)?;
        if self.pieces.len() + 1 != self.breakpoints.len() {
            return Err(Error::InvalidMap(format!(
                "{} breakpoints need {} pieces, got {}",
                self.breakpoints.len(),
                self.breakpoints.len() - 1,
                self.pieces.len()
            )));
        }
        let unit = Q::zero()..=Q::one();
        // an affine piece attains its extremes at the interval ends
        for i in 0..self.pieces.len() {
            let (a, b) = self.piece_ends(i);
            if !unit.contains(&a) || !unit.contains(&b) {
                return Err(Error::InvalidMap(format!(
                    "piece {i} leaves [0, 1]: values {a} and {b} at its ends"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &Q) -> Result<Q> {
        if x.is_negative() || x > &Q::one() {
            return Err(Error::InvalidArgument(format!("{x} is outside [0, 1]")));
        }
        let i = self.breakpoints[1..]
            .iter()
            .position(|b| x <= b)
            .expect("last breakpoint is 1");
        Ok(self.pieces[i].eval(x))
    }

    /// Largest `|f(x) - g(x)|` over `[0, 1]` for maps with the same
    /// breakpoints, checked at piece ends.
    pub fn sup_distance(&self, other: &IntervalPLMap) -> Result<Q> {
        if self.breakpoints != other.breakpoints {
            return Err(Error::InvalidArgument("maps have different breakpoints".into()));
        }
        let mut best = Q::zero();
        for i in 0..self.pieces.len() {
            let (a, b) = self.piece_ends(i);
            let (c, d) = other.piece_ends(i);
            best = best.max((a - c).abs()).max((b - d).abs());
        }
        Ok(best)
    }
}

fn half() -> Q {
    Q::new(BigInt::one(), BigInt::from(2))
}

fn check_breakpoints(b: &[Q]) -> Result<()> {
    if b.len() < 2 || !b[0].is_zero() || !b[b.len() - 1].is_one() {
        return Err(Error::InvalidMap("breakpoints must run from 0 to 1".into()));
    }
    if b.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidMap("breakpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// A finite prefix of a one-sided binary sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SymbolSequence(Vec<u8>);

impl SymbolSequence {
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if let Some(i) = symbols.iter().position(|s| *s > 1) {
            return Err(Error::InvalidArgument(format!(
                "symbol {} at position {i} is not 0 or 1",
                symbols[i]
            )));
        }
        Ok(SymbolSequence(symbols))
    }

    /// Parses a string of `0` and `1` characters.
    pub fn parse(text: &str) -> Result<Self> {
        text.trim()
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::syntax(i, format!("`{c}` is not a binary symbol"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(SymbolSequence)
    }

    /// Uniform random symbols from a seeded generator.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(len, &mut rng)
    }

    pub fn random_with(len: usize, rng: &mut impl Rng) -> Self {
        SymbolSequence((0..len).map(|_| rng.gen_range(0..=1u8)).collect())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, len: usize) -> SymbolSequence {
        SymbolSequence(self.0[..len.min(self.0.len())].to_vec())
    }
}

impl fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(if *s == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl Serialize for SymbolSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

fn check_unit(x: &Q) -> Result<()> {
    if x.is_negative() || x > &Q::one() {
        return Err(Error::InvalidArgument(format!("starting point {x} is outside [0, 1]")));
    }
    Ok(())
}

/// `h^0(x), ..., h^L(x)` with `h^l = f_{k_l} o ... o f_{k_0}`.
pub fn compose_stream(f0: &IntervalPLMap, f1: &IntervalPLMap, ks: &SymbolSequence, x: &Q) -> Result<Vec<Q>> {
    check_unit(x)?;
    let mut out = Vec::with_capacity(ks.len());
    let mut v = x.clone();
    for &k in ks.as_slice() {
        v = if k == 0 { f0.eval(&v)? } else { f1.eval(&v)? };
        out.push(v.clone());
    }
    Ok(out)
}

/// `0` on `[0, 1/2)`, `1` on `(1/2, 1]`; undefined at `1/2`.
pub fn project(v: &Q) -> Result<u8> {
    match v.cmp(&half()) {
        std::cmp::Ordering::Less => Ok(0),
        std::cmp::Ordering::Greater => Ok(1),
        std::cmp::Ordering::Equal => Err(Error::Midpoint { index: None }),
    }
}

/// The output symbols `pi(h^l(x))`.
pub fn interaction_map(f0: &IntervalPLMap, f1: &IntervalPLMap, x: &Q, ks: &SymbolSequence) -> Result<SymbolSequence> {
    let h = compose_stream(f0, f1, ks, x)?;
    let mut out = Vec::with_capacity(h.len());
    for (l, v) in h.iter().enumerate() {
        out.push(project(v).map_err(|_| Error::Midpoint { index: Some(l) })?);
    }
    Ok(SymbolSequence(out))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConflictWitness {
    pub m: usize,
    /// Position (in the concatenated streams) where the clash was found.
    pub position: usize,
    pub first_position: usize,
    pub window: String,
    /// Output seen first, then the conflicting output.
    pub outputs: (u8, u8),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub m: usize,
    pub observed_windows: usize,
    pub possible_windows: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    pub minimal_m: Option<usize>,
    /// Rule for the minimal `m`, keyed by the window `k_{j-m} .. k_j`.
    pub rule: BTreeMap<String, u8>,
    /// One witness per rejected window size.
    pub conflicts: Vec<ConflictWitness>,
    pub coverage: Vec<Coverage>,
}

fn window_text(w: &[u8]) -> String {
    w.iter().map(|s| if *s == 0 { '0' } else { '1' }).collect()
}

/// Smallest `m <= m_max` for which one position-independent rule
/// `(k_{j-m}, ..., k_j) -> k'_j` explains every observed `j >= m`.
pub fn detect_memory(inputs: &SymbolSequence, outputs: &SymbolSequence, m_max: usize) -> Result<MemoryReport> {
    detect_memory_multi(&[(inputs.clone(), outputs.clone())], m_max)
}

/// Like [`detect_memory`] but one rule must explain all streams at once.
pub fn detect_memory_multi(streams: &[(SymbolSequence, SymbolSequence)], m_max: usize) -> Result<MemoryReport> {
    if streams.is_empty() {
        return Err(Error::InvalidArgument("no streams given".into()));
    }
    for (i, (a, b)) in streams.iter().enumerate() {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        if a.len() <= m_max {
            return Err(Error::InvalidArgument(format!(
                "stream {i} has length {} but m_max is {m_max}",
                a.len()
            )));
        }
    }
    let mut conflicts = Vec::new();
    let mut coverage = Vec::new();
    for m in 0..=m_max {
        let mut table: HashMap<&[u8], (u8, usize)> = HashMap::new();
        let mut clash = None;
        let mut offset = 0;
        'streams: for (input, output) in streams {
            let (ks, out) = (input.as_slice(), output.as_slice());
            for j in m..ks.len() {
                let w = &ks[j - m..=j];
                match table.get(w) {
                    Some(&(o, first)) if o != out[j] => {
                        clash = Some(ConflictWitness {
                            m,
                            position: offset + j,
                            first_position: first,
                            window: window_text(w),
                            outputs: (o, out[j]),
                        });
                        break 'streams;
                    }
                    Some(_) => {}
                    None => {
                        table.insert(w, (out[j], offset + j));
                    }
                }
            }
            offset += ks.len();
        }
        coverage.push(Coverage {
            m,
            observed_windows: table.len(),
            possible_windows: 1u128 << (m + 1).min(127),
        });
        match clash {
            Some(c) => conflicts.push(c),
            None => {
                let rule = table.into_iter().map(|(w, (o, _))| (window_text(w), o)).collect();
                return Ok(MemoryReport {
                    minimal_m: Some(m),
                    rule,
                    conflicts,
                    coverage,
                });
            }
        }
    }
    Ok(MemoryReport {
        minimal_m: None,
        rule: BTreeMap::new(),
        conflicts,
        coverage,
    })
}

/// Moves every piece end value by `epsilon * r / 1000` with `r` drawn
/// uniformly from `-1000..=1000`, then clamps into `[0, 1]`. Ends shared by
/// two pieces of a continuous junction move together.
pub fn perturb(f: &IntervalPLMap, epsilon: &Q, seed: u64) -> Result<IntervalPLMap> {
    if epsilon.is_negative() {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} is negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let r: i64 = rng.gen_range(-1000..=1000);
        epsilon * Q::new(BigInt::from(r), BigInt::from(1000))
    };
    let clamp = |v: Q| v.max(Q::zero()).min(Q::one());
    let n = f.pieces.len();
    let mut ends = Vec::with_capacity(n);
    let mut carried: Option<(Q, Q)> = None;
    for i in 0..n {
        let (a, b) = f.piece_ends(i);
        let left = match carried.take() {
            Some((prev_right, moved)) if prev_right == a => moved,
            _ => clamp(a + draw()),
        };
        let right = clamp(b.clone() + draw());
        carried = Some((b, right.clone()));
        ends.push((left, right));
    }
    IntervalPLMap::from_piece_values(f.breakpoints.clone(), ends)
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityTrial {
    pub trial: usize,
    #[serde(with = "serde_q")]
    pub x: Q,
    pub resamples: usize,
    pub minimal_m: Option<usize>,
    /// First witness against the memoryless rule, if any.
    pub witness: Option<ConflictWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    #[serde(with = "serde_q")]
    pub epsilon: Q,
    pub seed: u64,
    pub stream_length: usize,
    pub m_max: usize,
    pub trials: Vec<StabilityTrial>,
    pub trials_with_conflict: usize,
}

/// One perturbation trial: perturb both maps, drive them with a random
/// stream from a random start and run the detector. Starting points landing
/// an iterate on `1/2` are resampled.
pub fn stability_trial(
    f0: &IntervalPLMap,
    f1: &IntervalPLMap,
    epsilon: &Q,
    seed: u64,
    trial: usize,
    stream_length: usize,
    m_max: usize,
) -> Result<StabilityTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let g0 = perturb(f0, epsilon, rng.gen())?;
    let g1 = perturb(f1, epsilon, rng.gen())?;
    let ks = SymbolSequence::random_with(stream_length, &mut rng);
    let mut resamples = 0;
    loop {
        let x = Q::new(BigInt::from(rng.gen_range(1..(1u32 << 20))), BigInt::from(1u32 << 20));
        match interaction_map(&g0, &g1, &x, &ks) {
            Ok(out) => {
                let report = detect_memory(&ks, &out, m_max)?;
                let witness = report.conflicts.iter().find(|c| c.m == 0).cloned();
                return Ok(StabilityTrial {
                    trial,
                    x,
                    resamples,
                    minimal_m: report.minimal_m,
                    witness,
                });
            }
            Err(Error::Midpoint { .. }) if resamples < 1000 => resamples += 1,
            Err(e) => return Err(e),
        }
    }
}

pub fn stability_experiment(
    f0: &IntervalPLMap,
    f1: &IntervalPLMap,
    epsilon: &Q,
    seed: u64,
    trials: usize,
    stream_length: usize,
    m_max: usize,
) -> Result<StabilityReport> {
    let trials = (0..trials)
        .map(|i| stability_trial(f0, f1, epsilon, seed, i, stream_length, m_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_stability(epsilon, seed, stream_length, m_max, trials))
}

pub fn assemble_stability(
    epsilon: &Q,
    seed: u64,
    stream_length: usize,
    m_max: usize,
    trials: Vec<StabilityTrial>,
) -> StabilityReport {
    let trials_with_conflict = trials.iter().filter(|t| t.witness.is_some()).count();
    StabilityReport {
        epsilon: epsilon.clone(),
        seed,
        stream_length,
        m_max,
        trials,
        trials_with_conflict,
    }
}
