//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tropdyn::dequantize::{approx_error_bound, phi_t, ScaleParameter};
use tropdyn::dynamics::{conjugacy_check, detect_period, iterate, Recurrence};
use tropdyn::exact::{frac, q};
use tropdyn::interaction::{detect_memory, interaction_map, stability_experiment, IntervalPLMap, SymbolSequence};
use tropdyn::lattice::{
    audit, check_ca_relation, collapse_report, compare_fields, correspondence_check, dequantize_relation, evolve_lvca,
    evolve_rational_lv, exp_t_row, rational_background, relation_a, sample_relation_points, track_solitons,
    variety_equation, variety_membership,
};
use tropdyn::mmm::{igusa_leading_coefficient, CycleIndex};
use tropdyn::tropical::{normalize, TropicalExpr, VarNames};
use tropdyn::{Real, Q};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn lyness_expr() -> TropicalExpr {
    TropicalExpr::parse("max(max(0,y)-x, -x)", 2).unwrap()
}

/// Independent evaluation of the PL Lyness step.
fn lyness_step(x: &Q, y: &Q) -> Q {
    (y.clone().max(Q::zero()) - x).max(-x.clone())
}

fn random_rational(rng: &mut ChaCha8Rng) -> Q {
    let den: i64 = rng.gen_range(1..=50);
    let num: i64 = rng.gen_range(-10 * den..=10 * den);
    frac(num, den)
}

fn ac1() -> Check {
    let rec = Recurrence::piecewise_linear(lyness_expr(), 2).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut inits: Vec<[Q; 2]> = (0..99)
        .map(|_| [random_rational(&mut rng), random_rational(&mut rng)])
        .collect();
    inits.push([q(0), q(0)]);
    let start = Instant::now();
    let mut ones = 0;
    for [x, y] in &inits {
        let r = detect_period(&rec, &[x.clone(), y.clone()], 200, 50).map_err(|e| e.to_string())?;
        ensure(r.found, format!("no period from ({x}, {y})"))?;
        let fixed = x.is_zero() && y.is_zero();
        if r.period == 1 {
            ensure(fixed, format!("period 1 from ({x}, {y})"))?;
            ones += 1;
        } else {
            ensure(r.period == 5, format!("period {} from ({x}, {y})", r.period))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    // oracle: x_{n+5} = x_n for the hand-rolled step
    for [x, y] in &inits {
        let mut seq = vec![x.clone(), y.clone()];
        for n in 0..10 {
            let next = lyness_step(&seq[n], &seq[n + 1]);
            seq.push(next);
        }
        ensure(
            (0..7).all(|n| seq[n] == seq[n + 5]),
            format!("oracle disagrees at ({x}, {y})"),
        )?;
    }
    Ok(format!("100 starts, period 5 ({ones} fixed point), {elapsed:?}"))
}

fn ac2() -> Check {
    let tr = normalize(&lyness_expr(), 2).map_err(|e| e.to_string())?;
    // the presentation has no t dependence: every scale gives (2 + w) / z
    let rec = Recurrence::dequantized(&tr, ScaleParameter::from_int(2).unwrap()).map_err(|e| e.to_string())?;
    let init = [q(1), q(1)];
    let r = detect_period(&rec, &init, 200, 50).map_err(|e| e.to_string())?;
    ensure(
        !r.found,
        format!("unexpected period {} after {}", r.period, r.transient),
    )?;
    let orbit = iterate(&rec, &init, 6, 128).map_err(|e| e.to_string())?;
    let values = orbit.exact_values().ok_or("orbit is not exact")?;
    let expected = [q(1), q(1), q(3), q(5), frac(7, 3), frac(13, 15)];
    ensure(values == expected, format!("iterates {values:?}"))?;
    // oracle: direct recurrence
    let mut z = vec![q(1), q(1)];
    for n in 0..4 {
        let next = (q(2) + &z[n + 1]) / &z[n];
        z.push(next);
    }
    ensure(z == expected, "oracle disagrees")?;
    Ok(format!("no period in {} states; 3, 5, 7/3, 13/15", r.states_scanned))
}

fn ac3() -> Check {
    let tr = normalize(&lyness_expr(), 2).map_err(|e| e.to_string())?;
    let tol = Real::from_f64(1e-20, 128);
    let mut worst = Vec::new();
    for t in [2, 10, 100] {
        let r = conjugacy_check(&tr, &ScaleParameter::from_int(t).unwrap(), &[q(1), q(2)], 20, 128)
            .map_err(|e| e.to_string())?;
        let d = r.max_deviation_real();
        ensure(d <= tol, format!("t={t}: deviation {d}"))?;
        worst.push(format!("t={t}: {}", d.to_decimal_string(3)));
    }
    Ok(worst.join(", "))
}

fn ac4() -> Check {
    let tr = normalize(&lyness_expr(), 2).map_err(|e| e.to_string())?;
    const P: u32 = 128;
    let mut sups = Vec::new();
    for t in [10i64, 100, 10_000] {
        let scale = ScaleParameter::from_int(t).unwrap();
        let bound = approx_error_bound(&tr, &scale, P).map_err(|e| e.to_string())?;
        // ln 3 / ln t
        let oracle_bound = (3f64).ln() / (t as f64).ln();
        ensure(
            (bound.to_f64() - oracle_bound).abs() < 1e-15,
            format!("bound {bound} at t={t}"),
        )?;
        let slack = Real::from_f64(2f64.powi(-100), P);
        let mut sup = Real::zero(P);
        for i in 0..21 {
            for j in 0..21 {
                let x = frac(-10 + i, 2);
                let y = frac(-10 + j, 2);
                let exact = lyness_step(&x, &y);
                let point = [Real::from_rational(&x, P), Real::from_rational(&y, P)];
                let smooth = phi_t(&tr, &scale, &point, P).map_err(|e| e.to_string())?;
                let d = (smooth.clone() - Real::from_rational(&exact, P)).abs();
                ensure(
                    d <= bound.clone() + slack.clone(),
                    format!("t={t} at ({x}, {y}): {d} > {bound}"),
                )?;
                // oracle: log_t(2 + t^y) - x in double precision
                let xf = ratio_f64(&x);
                let yf = ratio_f64(&y);
                let o = (2.0 + (t as f64).powf(yf)).ln() / (t as f64).ln() - xf;
                ensure((smooth.to_f64() - o).abs() < 1e-9, format!("oracle disagrees at t={t}"))?;
                sup = sup.max(d);
            }
        }
        sups.push(sup);
    }
    ensure(sups.windows(2).all(|w| w[1] < w[0]), "sup is not decreasing")?;
    Ok(format!(
        "sups {}",
        sups.iter()
            .map(|s| s.to_decimal_string(6))
            .collect::<Vec<_>>()
            .join(" > ")
    ))
}

fn ratio_f64(v: &Q) -> f64 {
    let n: f64 = v.numer().to_string().parse().unwrap();
    let d: f64 = v.denom().to_string().parse().unwrap();
    n / d
}

fn row_with_block(width: usize, b: i64, at: usize, block: &[i64]) -> Vec<Q> {
    let mut row = vec![q(b); width];
    for (i, v) in block.iter().enumerate() {
        row[at + i] = q(*v);
    }
    row
}

fn ac5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut fields = 0;
    for _ in 0..20 {
        let row: Vec<Q> = (0..12).map(|_| q(rng.gen_range(-3..=3))).collect();
        let l = q(rng.gen_range(-1..=1));
        let b = q(rng.gen_range(-1..=2));
        let f = evolve_lvca(&row, &l, 15, &b).map_err(|e| e.to_string())?;
        ensure(audit(&f).map_err(|e| e.to_string())?.passed(), "PL audit failed")?;
        let t = q(3);
        let z = exp_t_row(&row, &t).map_err(|e| e.to_string())?;
        let bz = rational_background(&t, &b).map_err(|e| e.to_string())?;
        let fr = evolve_rational_lv(&z, &l, &t, 6, &bz).map_err(|e| e.to_string())?;
        ensure(audit(&fr).map_err(|e| e.to_string())?.passed(), "rational audit failed")?;
        fields += 2;
    }
    let f = evolve_lvca(&row_with_block(80, 2, 70, &[3, 4, 3]), &q(0), 60, &q(2)).map_err(|e| e.to_string())?;
    ensure(audit(&f).map_err(|e| e.to_string())?.passed(), "block audit failed")?;
    fields += 1;
    let tracks = track_solitons(&f).map_err(|e| e.to_string())?;
    ensure(tracks.len() == 1, format!("{} tracks", tracks.len()))?;
    let tr = &tracks[0];
    ensure(tr.len() > 50, format!("track covers {} steps", tr.len()))?;
    ensure(tr.constant_speed && tr.shape_preserving, "track changes speed or shape")?;
    Ok(format!(
        "{fields} fields audited; one track over {} rows, speed {}",
        tr.len(),
        tr.speed
    ))
}

fn ac6() -> Check {
    let t = q(1_000_000);
    let u0 = row_with_block(12, 0, 5, &[1, 2, 1]);
    let z = exp_t_row(&u0, &t).map_err(|e| e.to_string())?;
    let fr = evolve_rational_lv(&z, &q(1), &t, 8, &q(1)).map_err(|e| e.to_string())?;
    let c = collapse_report(&fr).map_err(|e| e.to_string())?;
    ensure(c.holds, "collapse bound violated")?;
    // oracle: recompute the ratios by hand
    for row in &c.rows {
        let r = fr.row(row.s);
        let worst = r.windows(2).map(|w| (&w[1] / &w[0] - Q::one()).abs()).max().unwrap();
        ensure(worst == row.max_relative_difference, "ratio mismatch")?;
    }

    let u0 = [0, 0, 1, 2, 1, 0, 0, 0].map(q);
    let fp = evolve_lvca(&u0, &q(0), 6, &q(0)).map_err(|e| e.to_string())?;
    let mut devs = Vec::new();
    for k in [1u32, 2, 4] {
        let t = Q::from_integer(BigInt::from(10).pow(k));
        let z = exp_t_row(&u0, &t).map_err(|e| e.to_string())?;
        let fr = evolve_rational_lv(&z, &q(0), &t, 6, &q(1)).map_err(|e| e.to_string())?;
        devs.push(compare_fields(&fr, &fp, 128).map_err(|e| e.to_string())?.max_deviation);
    }
    ensure(devs.windows(2).all(|w| w[1] < w[0]), "sweep is not strictly decreasing")?;
    Ok(format!(
        "t=10^6 bound holds on {} rows; sweep {}",
        c.rows.len(),
        devs.iter()
            .map(|d| d.to_decimal_string(4))
            .collect::<Vec<_>>()
            .join(" > ")
    ))
}

fn ac7() -> Check {
    let (lhs, rhs) = relation_a();
    let eq = dequantize_relation(&lhs, &rhs, 4).map_err(|e| e.to_string())?;
    let z_names = VarNames::custom(&["z1", "z2", "z3", "z4"]).unwrap();
    let text = eq.to_text(&z_names);
    ensure(eq.same_as(&variety_equation()), format!("got {text}"))?;
    let points = sample_relation_points(1000, 7, 6).map_err(|e| e.to_string())?;
    let t = q(10);
    let r = correspondence_check(&points, &t).map_err(|e| e.to_string())?;
    ensure(r.consistent(), format!("disagreements at {:?}", r.disagreements))?;
    // oracle: both sides written out by hand
    let z = |v: &Q| pow10(v);
    for v in &points {
        let a = &v[0] + (&v[1] + &v[2]).max(Q::zero()) == &v[1] + (&v[0] + &v[3]).max(Q::zero());
        ensure(a == check_ca_relation(v), "relation oracle disagrees")?;
        let [z1, z2, z3, z4] = [z(&v[0]), z(&v[1]), z(&v[2]), z(&v[3])];
        let member = &z2 + &z1 * &z2 * &z4 == &z1 + &z1 * &z2 * &z3;
        ensure(
            member == variety_membership(&[z1, z2, z3, z4]),
            "membership oracle disagrees",
        )?;
        if member {
            ensure(a, "member without relation")?;
        }
    }
    Ok(format!(
        "{text}; {} points, {} with A, {} exact members, all agree",
        r.points, r.relation_holds, r.exact_members
    ))
}

fn pow10(v: &Q) -> Q {
    let e = v.to_integer();
    let p = Q::from_integer(BigInt::from(10).pow(e.abs().try_into().unwrap()));
    if e.is_negative() {
        p.recip()
    } else {
        p
    }
}

fn ac8() -> Check {
    let f0 = IntervalPLMap::lower_half();
    let f1 = IntervalPLMap::upper_half();
    let mut lines = Vec::new();
    for seed in [1u64, 2] {
        let ks = SymbolSequence::random(10_000, seed);
        let out = interaction_map(&f0, &f1, &frac(1, 3), &ks).map_err(|e| e.to_string())?;
        ensure(out == ks, "k' differs from k")?;
        let m = detect_memory(&ks, &out, 3).map_err(|e| e.to_string())?;
        let identity: BTreeMap<String, u8> = [("0".to_string(), 0), ("1".to_string(), 1)].into();
        ensure(
            m.minimal_m == Some(0) && m.rule == identity,
            format!("memory {:?}", m.minimal_m),
        )?;
    }
    lines.push("halving pair: k'=k, m=0 identity".to_string());

    let ks = SymbolSequence::random(10_000, 3);
    let s = ks.as_slice();
    let xor: Vec<u8> = (0..s.len())
        .map(|j| if j == 0 { s[0] } else { s[j] ^ s[j - 1] })
        .collect();
    let m = detect_memory(&ks, &SymbolSequence::new(xor).map_err(|e| e.to_string())?, 3).map_err(|e| e.to_string())?;
    ensure(m.minimal_m == Some(1), format!("xor memory {:?}", m.minimal_m))?;
    lines.push("xor: m=1".into());

    // perturbed slopes grow the denominators every step, so trials use
    // shorter streams
    let r = stability_experiment(&f0, &f1, &frac(1, 100), 0, 20, 512, 3).map_err(|e| e.to_string())?;
    ensure(r.trials_with_conflict >= 1, "no conflict witness in 20 trials")?;
    lines.push(format!(
        "eps=1/100: {}/20 trials with a witness",
        r.trials_with_conflict
    ));
    Ok(lines.join("; "))
}

/// `2 (k+1)(k+2)...(2k+1)` with sign `(-1)^{k+1}`.
fn block_oracle(k: u32) -> BigInt {
    let v: BigInt = (k + 1..=2 * k + 1).map(BigInt::from).product::<BigInt>() * 2;
    if k.is_multiple_of(2) {
        -v
    } else {
        v
    }
}

fn ac9() -> Check {
    let idx = |s: &str| s.parse::<CycleIndex>().unwrap();
    for (s, v) in [("1^1", 12), ("0^1", -2), ("1^2", 72)] {
        let c = igusa_leading_coefficient(&idx(s));
        ensure(c == q(v), format!("{s} -> {c}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let mut ks: Vec<u32> = (0..=20).collect();
        let mut parts = Vec::new();
        let r = rng.gen_range(2..=4);
        for _ in 0..r {
            let k = ks.swap_remove(rng.gen_range(0..ks.len()));
            parts.push((k, rng.gen_range(1..=3u32)));
        }
        let split = rng.gen_range(1..parts.len());
        let a = CycleIndex::new(parts[..split].to_vec()).map_err(|e| e.to_string())?;
        let b = CycleIndex::new(parts[split..].to_vec()).map_err(|e| e.to_string())?;
        let whole = a.join(&b).map_err(|e| e.to_string())?;
        let c = igusa_leading_coefficient(&whole);
        ensure(
            c == igusa_leading_coefficient(&a) * igusa_leading_coefficient(&b),
            format!("{whole} not multiplicative"),
        )?;
        let oracle = parts.iter().fold(Q::one(), |acc, &(k, n)| {
            let fact: BigInt = (1..=n).map(BigInt::from).product();
            acc * Q::new(num_traits::pow(block_oracle(k), n as usize), fact)
        });
        ensure(c == oracle, format!("{whole}: {c} vs oracle {oracle}"))?;
    }
    Ok("12, -2, 72; 50 random indices multiplicative and match the product formula".into())
}

const SUITE: &str = r#"
[[experiment]]
kind = "period"
expr = "max(max(0,y)-x, -x)"
init = "3/7,-2"

[[experiment]]
kind = "orbit"
name = "rational-orbit"
expr = "max(max(0,y)-x, -x)"
init = "1,1"
mode = "rational"
t = "2"
steps = 12

[[experiment]]
kind = "conjugacy"
expr = "max(max(0,y)-x, -x)"
init = "1,2"

[[experiment]]
kind = "lvca"
L = 0
background = "2"
init = "2,2,2,2,2,3,4,3,2,2"
steps = 8

[[experiment]]
kind = "compare"
init = "0,0,1,2,1,0,0,0"
steps = 6

[[experiment]]
kind = "memory"
epsilon = "1/100"
trials = 4
length = 256

[[experiment]]
kind = "variety"
random = 200
seed = 3

[[experiment]]
kind = "igusa"
index = "0^2 1 3^2"
"#;

fn run_suite(dir: &Path, config: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tropdyn"))
        .arg("--out")
        .arg(dir)
        .arg("run")
        .arg("--config")
        .arg(config)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
    Ok(out.stdout)
}

fn ac10() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("suite.toml");
    std::fs::write(&config, SUITE).map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let sa = run_suite(&a, &config)?;
    let sb = run_suite(&b, &config)?;
    ensure(sa == sb, "stdout differs")?;
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut kinds = 0;
    for name in &names {
        let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(name)).map_err(|e| format!("{name:?} missing in second run: {e}"))?;
        ensure(x == y, format!("{name:?} differs"))?;
        kinds += name.to_string_lossy().ends_with(".csv") as usize;
    }
    ensure(
        names.len() == std::fs::read_dir(&b).unwrap().count(),
        "file sets differ",
    )?;
    ensure(kinds > 0, "no CSV written")?;
    Ok(format!("{} artifacts byte-identical across two runs", names.len()))
}

/// Goes to the process stdout directly so the lines survive output capture.
fn report(line: String) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("1 period-5 reproduction", ac1),
        ("2 naive-limit failure", ac2),
        ("3 finite-t conjugacy", ac3),
        ("4 convergence bound", ac4),
        ("5 LVCA audit and soliton", ac5),
        ("6 collapse", ac6),
        ("7 tropicalization coherence", ac7),
        ("8 interaction and memory", ac8),
        ("9 Igusa coefficients", ac9),
        ("10 reproducibility", ac10),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        match result {
            Ok(detail) => report(format!("PASS  {name} [{took:.2?}]: {detail}")),
            Err(why) => {
                report(format!("FAIL  {name} [{took:.2?}]: {why}"));
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
