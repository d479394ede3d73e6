use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tropdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tropdyn")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error(out: &Output) -> (i32, Value) {
    let line = String::from_utf8_lossy(&out.stderr);
    let last = line.lines().last().unwrap();
    (out.status.code().unwrap(), serde_json::from_str(last).unwrap())
}

const LYNESS: &str = "max(max(0,y)-x, -x)";

#[test]
fn eval_reports_value_and_normal_form() {
    let v = json(&tropdyn(&["eval", "--expr", "max(x,y)-x", "--point", "1,3"]));
    assert_eq!(v["tool"], "tropdyn");
    assert_eq!(v["result"]["value"], "2");
    assert_eq!(v["result"]["counts"], serde_json::json!([2, 1]));
}

#[test]
fn period_and_orbit() {
    let v = json(&tropdyn(&["period", "--expr", LYNESS, "--init", "1,2"]));
    assert_eq!(v["result"]["period"], 5);
    let v = json(&tropdyn(&[
        "period", "--expr", LYNESS, "--init", "1,1", "--mode", "rational", "--t", "2",
    ]));
    assert_eq!(v["result"]["found"], false);
    let v = json(&tropdyn(&[
        "orbit", "--expr", LYNESS, "--init", "1,1", "--mode", "rational", "--t", "2", "--steps", "6",
    ]));
    let text = v.to_string();
    assert!(text.contains("\"13/15\""), "{text}");
}

#[test]
fn dequantize_lyness() {
    let v = json(&tropdyn(&[
        "dequantize",
        "--expr",
        LYNESS,
        "--t",
        "10",
        "--point",
        "1,2",
    ]));
    assert_eq!(v["result"]["collected"], "(2 + y) / (x)");
}

#[test]
fn igusa_and_variety() {
    let v = json(&tropdyn(&["igusa", "--index", "1^2"]));
    assert_eq!(v["result"]["coefficient"], "72");
    let v = json(&tropdyn(&["variety", "--random", "50", "--seed", "1"]));
    assert!(v.to_string().contains("consistent"));
}

#[test]
fn artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    json(&tropdyn(&[
        "--out",
        d,
        "--name",
        "demo",
        "lvca",
        "--init",
        "0,0,1,0,0",
        "--steps",
        "2",
    ]));
    let csv = std::fs::read_to_string(dir.path().join("demo.csv")).unwrap();
    assert_eq!(
        csv.lines().collect::<Vec<_>>(),
        [
            "s,precision_bits,u0,u1,u2,u3,u4",
            "0,64,0,0,1,0,0",
            "1,64,0,-1,0,0,0",
            "2,64,0,0,0,0,0"
        ]
    );
    for f in ["demo.json", "demo.pgm", "demo.pgm.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let pgm = std::fs::read(dir.path().join("demo.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n5 3\n255\n"));
}

#[test]
fn errors_have_codes_and_reports() {
    let (code, e) = error(&tropdyn(&["eval", "--expr", "max(x,", "--point", "1"]));
    assert_eq!(code, 2);
    assert_eq!(e["error"], "syntax");
    assert_eq!(e["position"], 6);

    let (code, e) = error(&tropdyn(&["interact", "--symbols", "01", "--x", "1"]));
    assert_eq!(code, 4);
    assert_eq!(e["index"], 0);

    let (code, _) = error(&tropdyn(&["lv-rational", "--L", "1/2", "--t", "10", "--init", "0,1,0"]));
    assert_eq!(code, 3);

    let (code, e) = error(&tropdyn(&[
        "period", "--expr", LYNESS, "--init", "1,1", "--mode", "rational",
    ]));
    assert_eq!(code, 2);
    assert_eq!(e["error"], "config");

    let (code, e) = error(&tropdyn(&["bogus"]));
    assert_eq!(code, 2);
    assert_eq!(e["error"], "usage");

    assert!(tropdyn(&["--help"]).status.success());
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn config_runs_all_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!(
            "out = {:?}\n[[experiment]]\nkind = \"igusa\"\nindex = \"0^1\"\n\n[[experiment]]\nkind = \"period\"\nname = \"p\"\nexpr = \"{LYNESS}\"\ninit = [3, -1]\n",
            out.to_str().unwrap()
        ),
    );
    let v = json(&tropdyn(&["run", "--config", &cfg]));
    let records = v.as_array().unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["result"]["coefficient"], "-2");
    assert_eq!(records[1]["result"]["period"], 5);
    assert!(out.join("igusa.json").exists());
    assert!(out.join("p.json").exists());
}

#[test]
fn bad_config_runs_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(
        dir.path(),
        "c.toml",
        "[[experiment]]\nkind = \"igusa\"\nindex = \"1\"\n\n[[experiment]]\nkind = \"igusa\"\nindex = \"1^\"\n",
    );
    let (code, _) = error(&tropdyn(&["--out", out.to_str().unwrap(), "run", "--config", &cfg]));
    assert_eq!(code, 2);
    assert!(!out.exists());

    let cfg = write(
        dir.path(),
        "d.toml",
        "[[experiment]]\nkind = \"igusa\"\nindex = \"1\"\n[[experiment]]\nkind = \"igusa\"\nindex = \"2\"\n",
    );
    let (code, e) = error(&tropdyn(&["run", "--config", &cfg]));
    assert_eq!(code, 2);
    assert_eq!(e["error"], "config");
}
