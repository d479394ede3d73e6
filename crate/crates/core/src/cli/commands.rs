use serde_json::{json, Value};

use super::{
    to_value, Artifacts, CompareArgs, ConjugacyArgs, DequantizeArgs, EvalArgs, Experiment, ExprArgs, IgusaArgs,
    InteractArgs, LvRationalArgs, LvcaArgs, MemoryArgs, Mode, OrbitArgs, PeriodArgs, StreamArgs, VarietyArgs,
};
use crate::dequantize::{approx_error_bound, dequantize, phi_t, ScaleParameter};
use crate::dynamics::{conjugacy_check, detect_period, iterate, Recurrence};
use crate::error::{Error, Result};
use crate::exact::{parse_rational, parse_rational_list, Q};
use crate::interaction::{
    assemble_stability, compose_stream, detect_memory, interaction_map, stability_trial, IntervalPLMap, SymbolSequence,
};
use crate::lattice::{
    audit, collapse_report, compare_fields, correspondence_check, dequantize_relation, deviation_bound, evolve_lvca,
    evolve_rational_lv, exp_t_row, rational_background, relation_a, sample_relation_points, track_solitons,
    variety_membership, variety_membership_leading, LatticeField,
};
use crate::mmm::{expected_sign, igusa_leading_coefficient, CycleIndex};
use crate::real::Real;
use crate::sweep::{default_threads, par_map};
use crate::tropical::{normalize, TropicalExpr, VarNames};

type Run = Box<dyn FnOnce() -> Result<Artifacts> + Send>;

pub(super) fn prepare(exp: Experiment) -> Result<(Experiment, Run)> {
    Ok(match exp {
        Experiment::Eval(mut a) => {
            let run = eval(&mut a)?;
            (Experiment::Eval(a), run)
        }
        Experiment::Dequantize(mut a) => {
            let run = dequantize_cmd(&mut a)?;
            (Experiment::Dequantize(a), run)
        }
        Experiment::Orbit(mut a) => {
            let run = orbit(&mut a)?;
            (Experiment::Orbit(a), run)
        }
        Experiment::Period(mut a) => {
            let run = period(&mut a)?;
            (Experiment::Period(a), run)
        }
        Experiment::Conjugacy(mut a) => {
            let run = conjugacy(&mut a)?;
            (Experiment::Conjugacy(a), run)
        }
        Experiment::Interact(mut a) => {
            let run = interact(&mut a)?;
            (Experiment::Interact(a), run)
        }
        Experiment::Memory(mut a) => {
            let run = memory(&mut a)?;
            (Experiment::Memory(a), run)
        }
        Experiment::Lvca(a) => {
            let run = lvca(&a, false)?;
            (Experiment::Lvca(a), run)
        }
        Experiment::LvRational(mut a) => {
            let run = lv_rational(&mut a)?;
            (Experiment::LvRational(a), run)
        }
        Experiment::Compare(a) => {
            let run = compare(&a)?;
            (Experiment::Compare(a), run)
        }
        Experiment::Solitons(a) => {
            let run = lvca(&a, true)?;
            (Experiment::Solitons(a), run)
        }
        Experiment::Variety(a) => {
            let run = variety(&a)?;
            (Experiment::Variety(a), run)
        }
        Experiment::Igusa(a) => {
            let run = igusa(&a)?;
            (Experiment::Igusa(a), run)
        }
    })
}

fn text_list(v: &[Q]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

/// Parses the expression, fixing the arity: explicit names, `--arity`, the
/// length of the accompanying point, or the largest variable used.
fn expression(a: &mut ExprArgs, fallback: Option<usize>) -> Result<(TropicalExpr, VarNames)> {
    let names = if let Some(vars) = &a.vars {
        let list: Vec<&str> = vars.split(',').collect();
        let names = VarNames::custom(&list)?;
        if a.arity.is_some_and(|n| n != names.arity()) {
            return Err(Error::Config(format!(
                "--arity {} disagrees with {} variable names",
                a.arity.unwrap_or(0),
                names.arity()
            )));
        }
        names
    } else if let Some(n) = a.arity.or(fallback) {
        VarNames::default_for(n)
    } else {
        let n = match TropicalExpr::parse(&a.expr, 4) {
            Ok(e) => e.max_var().map_or(1, |i| i + 1),
            Err(Error::VariableOutOfRange { index, .. }) => index + 1,
            Err(e) => return Err(e),
        };
        VarNames::default_for(n)
    };
    a.arity = Some(names.arity());
    let e = TropicalExpr::parse_with(&a.expr, &names)?;
    Ok((e, names))
}

fn scale(text: &str) -> Result<ScaleParameter> {
    ScaleParameter::exact(parse_rational(text)?)
}

fn scale_list(text: &str) -> Result<Vec<ScaleParameter>> {
    parse_rational_list(text)?
        .into_iter()
        .map(ScaleParameter::exact)
        .collect()
}

fn eval(a: &mut EvalArgs) -> Result<Run> {
    let point = a.point.as_deref().map(parse_rational_list).transpose()?;
    let (e, names) = expression(&mut a.expr, point.as_ref().map(Vec::len))?;
    let arity = names.arity();
    Ok(Box::new(move || {
        let nf = normalize(&e, arity)?;
        let value = point.as_ref().map(|p| e.eval(p)).transpose()?;
        Artifacts::json(json!({
            "expr": e.to_text(&names),
            "arity": arity,
            "normal_form": nf,
            "counts": nf.counts(),
            "value": value.map(|v| v.to_string()),
        }))
    }))
}

fn dequantize_cmd(a: &mut DequantizeArgs) -> Result<Run> {
    let point = a.point.as_deref().map(parse_rational_list).transpose()?;
    let (e, names) = expression(&mut a.expr, point.as_ref().map(Vec::len))?;
    let t = a.t.as_deref().map(scale).transpose()?;
    if point.is_some() && t.is_none() {
        return Err(Error::Config("--point needs --t".into()));
    }
    let prec = a.precision;
    let arity = names.arity();
    Ok(Box::new(move || {
        let tr = normalize(&e, arity)?;
        let family = dequantize(&tr);
        let mut result = json!({
            "expr": e.to_text(&names),
            "family": family.to_text(&names),
            "collected": family.to_collected_text(&names),
            "monomials": family,
        });
        if let Some(t) = &t {
            result["error_bound"] = to_value(approx_error_bound(&tr, t, prec)?)?;
            if let Some(p) = &point {
                let x: Vec<Real> = p.iter().map(|v| Real::from_rational(v, prec)).collect();
                result["phi_t"] = to_value(phi_t(&tr, t, &x, prec)?)?;
                result["phi"] = json!(tr.eval(p)?.to_string());
            }
        }
        Artifacts::json(result)
    }))
}

fn recurrence(e: TropicalExpr, arity: usize, mode: Mode, t: &Option<String>) -> Result<Recurrence> {
    match mode {
        Mode::Pl => Recurrence::piecewise_linear(e, arity),
        Mode::Rational => {
            let t = t
                .as_deref()
                .ok_or_else(|| Error::Config("--t is required in rational mode".into()))?;
            Recurrence::dequantized(&normalize(&e, arity)?, scale(t)?)
        }
    }
}

fn orbit(a: &mut OrbitArgs) -> Result<Run> {
    let init = parse_rational_list(&a.init)?;
    let (e, names) = expression(&mut a.expr, Some(init.len()))?;
    let rec = recurrence(e, names.arity(), a.mode, &a.t)?;
    let (steps, prec) = (a.steps, a.precision);
    Ok(Box::new(move || {
        let orbit = iterate(&rec, &init, steps, prec)?;
        Ok(Artifacts {
            result: to_value(&orbit)?,
            files: vec![("csv".into(), orbit.to_csv(prec).into_bytes())],
        })
    }))
}

fn period(a: &mut PeriodArgs) -> Result<Run> {
    let init = parse_rational_list(&a.init)?;
    let (e, names) = expression(&mut a.expr, Some(init.len()))?;
    let rec = recurrence(e, names.arity(), a.mode, &a.t)?;
    let (mt, mp) = (a.max_transient, a.max_period);
    Ok(Box::new(move || Artifacts::json(detect_period(&rec, &init, mt, mp)?)))
}

fn conjugacy(a: &mut ConjugacyArgs) -> Result<Run> {
    let init = parse_rational_list(&a.init)?;
    let (e, names) = expression(&mut a.expr, Some(init.len()))?;
    let tr = normalize(&e, names.arity())?;
    let ts = scale_list(&a.t)?;
    let (steps, prec) = (a.steps, a.precision);
    Ok(Box::new(move || {
        let reports = par_map(&ts, default_threads(), |t| conjugacy_check(&tr, t, &init, steps, prec));
        let mut out = Vec::new();
        for (t, r) in ts.iter().zip(reports) {
            out.push(json!({"t": t.to_string(), "report": to_value(r?)?}));
        }
        Artifacts::json(out)
    }))
}

fn interval_map(text: &str) -> Result<IntervalPLMap> {
    IntervalPLMap::parse(text)
}

struct Stream {
    f0: IntervalPLMap,
    f1: IntervalPLMap,
    x: Q,
    ks: SymbolSequence,
}

fn stream(a: &mut StreamArgs) -> Result<Stream> {
    let f0 = interval_map(&a.f0)?;
    let f1 = interval_map(&a.f1)?;
    let x = parse_rational(&a.x)?;
    let ks = match &a.symbols {
        Some(s) => {
            let ks = SymbolSequence::parse(s)?;
            a.length = ks.len();
            ks
        }
        None => SymbolSequence::random(a.length, a.seed),
    };
    Ok(Stream { f0, f1, x, ks })
}

fn interact(a: &mut InteractArgs) -> Result<Run> {
    let s = stream(&mut a.stream)?;
    let with_iterates = a.iterates;
    Ok(Box::new(move || {
        let out = interaction_map(&s.f0, &s.f1, &s.x, &s.ks)?;
        let mut result = json!({
            "inputs": s.ks.to_string(),
            "outputs": out.to_string(),
            "outputs_equal_inputs": out == s.ks,
        });
        if with_iterates {
            result["iterates"] = json!(text_list(&compose_stream(&s.f0, &s.f1, &s.ks, &s.x)?));
        }
        Artifacts::json(result)
    }))
}

fn memory(a: &mut MemoryArgs) -> Result<Run> {
    let m_max = a.m_max;
    if let Some(eps) = &a.epsilon {
        let eps = parse_rational(eps)?;
        if a.inputs.is_some() {
            return Err(Error::Config(
                "--epsilon drives the interval maps; drop --inputs".into(),
            ));
        }
        let f0 = interval_map(&a.stream.f0)?;
        let f1 = interval_map(&a.stream.f1)?;
        let (seed, trials, len) = (a.stream.seed, a.trials, a.stream.length);
        if len <= m_max {
            return Err(Error::Config(format!("--length {len} must exceed --m-max {m_max}")));
        }
        return Ok(Box::new(move || {
            let idx: Vec<usize> = (0..trials).collect();
            let results = par_map(&idx, default_threads(), |&i| {
                stability_trial(&f0, &f1, &eps, seed, i, len, m_max)
            });
            let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
            Artifacts::json(assemble_stability(&eps, seed, len, m_max, trials))
        }));
    }
    if let (Some(i), Some(o)) = (&a.inputs, &a.outputs) {
        let (ks, out) = (SymbolSequence::parse(i)?, SymbolSequence::parse(o)?);
        return Ok(Box::new(move || Artifacts::json(detect_memory(&ks, &out, m_max)?)));
    }
    let s = stream(&mut a.stream)?;
    Ok(Box::new(move || {
        let out = interaction_map(&s.f0, &s.f1, &s.x, &s.ks)?;
        Artifacts::json(detect_memory(&s.ks, &out, m_max)?)
    }))
}

fn field_files(field: &LatticeField, bits: u32) -> Result<Vec<(String, Vec<u8>)>> {
    let (pgm, mapping) = field.to_pgm()?;
    let sidecar = serde_json::to_string_pretty(&mapping).expect("mapping serializes") + "\n";
    Ok(vec![
        ("csv".into(), field.to_csv(bits).into_bytes()),
        ("pgm".into(), pgm),
        ("pgm.json".into(), sidecar.into_bytes()),
    ])
}

fn lvca(a: &LvcaArgs, solitons: bool) -> Result<Run> {
    let l = parse_rational(&a.l)?;
    let init = parse_rational_list(&a.init)?;
    let b = parse_rational(&a.background)?;
    let (steps, bits) = (a.steps, a.precision);
    Ok(Box::new(move || {
        let field = evolve_lvca(&init, &l, steps, &b)?;
        let report = audit(&field)?;
        if solitons {
            let tracks = track_solitons(&field)?;
            let summary: Vec<Value> = tracks
                .iter()
                .map(|tr| {
                    json!({
                        "start_step": tr.start_step,
                        "length": tr.len(),
                        "speed": tr.speed.to_string(),
                        "constant_speed": tr.constant_speed,
                        "shape_preserving": tr.shape_preserving,
                        "mass": tr.blocks[0].mass.to_string(),
                        "shape": text_list(&tr.blocks[0].shape),
                        "centroids": tr.blocks.iter().map(|b| b.centroid.to_string()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            return Artifacts::json(json!({"audit": report, "tracks": summary}));
        }
        Ok(Artifacts {
            result: json!({"audit": report, "field": to_value(&field)?}),
            files: field_files(&field, bits)?,
        })
    }))
}

fn lv_rational(a: &mut LvRationalArgs) -> Result<Run> {
    let l = parse_rational(&a.l)?;
    let t = parse_rational(&a.t)?;
    let init = parse_rational_list(&a.init)?;
    let (row, bz) = if a.raw {
        let bz = parse_rational(a.background.get_or_insert_with(|| "1".into()))?;
        (init, bz)
    } else {
        let b = parse_rational(a.background.get_or_insert_with(|| "0".into()))?;
        (exp_t_row(&init, &t)?, rational_background(&t, &b)?)
    };
    let (steps, bits) = (a.steps, a.precision);
    Ok(Box::new(move || {
        let field = evolve_rational_lv(&row, &l, &t, steps, &bz)?;
        Ok(Artifacts {
            result: json!({
                "audit": audit(&field)?,
                "collapse": collapse_report(&field)?,
                "field": to_value(&field)?,
            }),
            files: field_files(&field, bits)?,
        })
    }))
}

fn compare(a: &CompareArgs) -> Result<Run> {
    let l = parse_rational(&a.l)?;
    let ts = parse_rational_list(&a.t)?;
    let init = parse_rational_list(&a.init)?;
    let b = parse_rational(&a.background)?;
    for t in &ts {
        exp_t_row(&init, t)?;
        rational_background(t, &b)?;
    }
    let (steps, prec) = (a.steps, a.precision);
    Ok(Box::new(move || {
        let u = evolve_lvca(&init, &l, steps, &b)?;
        let rows = par_map(&ts, default_threads(), |t| -> Result<(Value, Real)> {
            let z = evolve_rational_lv(&exp_t_row(&init, t)?, &l, t, steps, &rational_background(t, &b)?)?;
            let c = compare_fields(&z, &u, prec)?;
            let row = json!({
                "t": t.to_string(),
                "audit_passed": audit(&z)?.passed(),
                "max_deviation": c.max_deviation,
                "per_step": c.per_step,
                "guaranteed_bound": deviation_bound(t, steps, prec)?,
            });
            Ok((row, c.max_deviation))
        });
        let (rows, devs): (Vec<Value>, Vec<Real>) = rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
        Artifacts::json(json!({
            "pl_audit_passed": audit(&u)?.passed(),
            "sweep": rows,
            "strictly_decreasing": devs.windows(2).all(|w| w[1] < w[0]),
        }))
    }))
}

fn variety(a: &VarietyArgs) -> Result<Run> {
    let t = parse_rational(&a.t)?;
    let point = a.point.as_deref().map(parse_rational_list).transpose()?;
    let (random, seed, range) = (a.random, a.seed, a.range);
    let v = match (&point, random) {
        (Some(p), None) => {
            let v: [Q; 4] = p.clone().try_into().map_err(|p: Vec<Q>| Error::DimensionMismatch {
                expected: 4,
                actual: p.len(),
            })?;
            Some(v)
        }
        (None, Some(_)) => None,
        _ => return Err(Error::Config("give exactly one of --point and --random".into())),
    };
    Ok(Box::new(move || {
        let (lhs, rhs) = relation_a();
        let eq = dequantize_relation(&lhs, &rhs, 4)?;
        let names = VarNames::custom(&["z1", "z2", "z3", "z4"])?;
        let mut result = json!({"dequantized_relation": eq.to_text(&names)});
        match v {
            Some(v) => {
                result["relation_a"] = json!(crate::lattice::check_ca_relation(&v));
                if let Ok(z) = exp_t_row(&v, &t) {
                    let z: [Q; 4] = z.try_into().expect("four coordinates");
                    result["z"] = json!(text_list(&z));
                    result["variety_exact"] = json!(variety_membership(&z));
                    result["variety_leading"] = json!(variety_membership_leading(&z, &t)?);
                }
            }
            None => {
                let pts = sample_relation_points(random.unwrap_or(0), seed, range)?;
                let report = correspondence_check(&pts, &t)?;
                result["consistent"] = json!(report.consistent());
                result["report"] = to_value(report)?;
            }
        }
        Artifacts::json(result)
    }))
}

fn igusa(a: &IgusaArgs) -> Result<Run> {
    let idx: CycleIndex = a.index.parse()?;
    Ok(Box::new(move || {
        Artifacts::json(json!({
            "index": idx.to_string(),
            "coefficient": igusa_leading_coefficient(&idx).to_string(),
            "expected_sign": expected_sign(&idx),
        }))
    }))
}
