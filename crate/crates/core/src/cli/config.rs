//! Config files: TOML with one `[[experiment]]` table per run.
//!
//! ```toml
//! out = "results"
//!
//! [[experiment]]
//! kind = "period"
//! name = "lyness"
//! expr = "max(max(0,y)-x, -x)"
//! init = "1,2"
//! ```
//!
//! Keys are the long flags of the matching subcommand (`max_transient` or
//! `max-transient`), so a config entry validates exactly like a command line.

use std::path::PathBuf;

use clap::Parser;
use toml::Value;

use super::{Cli, Command, Experiment};
use crate::error::{Error, Result};

pub struct ParsedConfig {
    pub out: Option<PathBuf>,
    pub experiments: Vec<(Experiment, Option<String>)>,
}

fn scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        other => Err(Error::Config(format!("key `{key}`: unsupported value {other}"))),
    }
}

pub fn experiments_from_toml(text: &str) -> Result<ParsedConfig> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let mut out = None;
    let mut tables = Vec::new();
    for (key, value) in &doc {
        match (key.as_str(), value) {
            ("out", Value::String(s)) => out = Some(PathBuf::from(s)),
            ("experiment", Value::Array(items)) => {
                for item in items {
                    match item {
                        Value::Table(t) => tables.push(t),
                        _ => return Err(Error::Config("`experiment` entries must be tables".into())),
                    }
                }
            }
            _ => return Err(Error::Config(format!("unexpected top-level key `{key}`"))),
        }
    }
    if tables.is_empty() {
        return Err(Error::Config("no [[experiment]] sections".into()));
    }
    let experiments = tables
        .into_iter()
        .enumerate()
        .map(|(i, t)| experiment(i, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedConfig { out, experiments })
}

fn experiment(index: usize, table: &toml::Table) -> Result<(Experiment, Option<String>)> {
    let kind = match table.get("kind") {
        Some(Value::String(k)) => k.clone(),
        _ => return Err(Error::Config(format!("experiment {index} needs a string `kind`"))),
    };
    let mut name = None;
    let mut argv = vec!["tropdyn".to_string(), kind.clone()];
    for (key, value) in table {
        if key == "kind" {
            continue;
        }
        if key == "name" {
            name = Some(scalar(key, value)?);
            continue;
        }
        let flag = if key == "L" {
            "--L".to_string()
        } else {
            format!("--{}", key.replace('_', "-"))
        };
        match value {
            Value::Boolean(true) => argv.push(flag),
            Value::Boolean(false) => {}
            Value::Array(items) => {
                let parts = items.iter().map(|v| scalar(key, v)).collect::<Result<Vec<_>>>()?;
                argv.push(flag);
                argv.push(parts.join(","));
            }
            v => {
                argv.push(flag);
                argv.push(scalar(key, v)?);
            }
        }
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| {
        let msg = e.to_string();
        let first = msg
            .lines()
            .next()
            .unwrap_or("invalid experiment")
            .trim_start_matches("error: ");
        Error::Config(format!("experiment {index} ({kind}): {first}"))
    })?;
    match cli.command {
        Command::Experiment(exp) => Ok((exp, name)),
        Command::Run(_) => Err(Error::Config(format!("experiment {index}: `run` cannot be nested"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_become_experiments() {
        let cfg = experiments_from_toml(
            r#"
            out = "o"
            [[experiment]]
            kind = "period"
            expr = "max(max(0,y)-x, -x)"
            init = [1, 2]
            max_transient = 10

            [[experiment]]
            kind = "igusa"
            name = "twelve"
            index = "1^1"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.out, Some(PathBuf::from("o")));
        assert_eq!(cfg.experiments.len(), 2);
        match &cfg.experiments[0].0 {
            Experiment::Period(p) => {
                assert_eq!(p.init, "1,2");
                assert_eq!(p.max_transient, 10);
                assert_eq!(p.max_period, 50);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(cfg.experiments[1].1.as_deref(), Some("twelve"));
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for text in [
            "",
            "x = 1",
            "[[experiment]]\nexpr = \"x\"",
            "[[experiment]]\nkind = \"nope\"",
            "[[experiment]]\nkind = \"igusa\"\nbogus = 1",
            "[[experiment]]\nkind = \"igusa\"",
            "[[experiment]\n",
        ] {
            assert!(matches!(experiments_from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn lattice_parameter_key() {
        let cfg = experiments_from_toml("[[experiment]]\nkind = \"lvca\"\nL = 1\ninit = \"0,1,0\"").unwrap();
        match &cfg.experiments[0].0 {
            Experiment::Lvca(a) => assert_eq!(a.l, "1"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
