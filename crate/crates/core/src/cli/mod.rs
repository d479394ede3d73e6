//! Command-line front end. Every subcommand prints one JSON record that
//! embeds its resolved configuration and the library version; `--out DIR`
//! also writes the record and any CSV/PGM artifacts to disk.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub use config::experiments_from_toml;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(
    name = "tropdyn",
    version,
    about = "Max-plus dynamics, their dequantizations and related experiments"
)]
pub struct Cli {
    /// Directory receiving the JSON record and CSV/PGM artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base file name for artifacts; defaults to the subcommand name.
    #[arg(long, global = true)]
    pub name: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run every experiment of a TOML config file.
    Run(RunArgs),
    #[command(flatten)]
    Experiment(Experiment),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    /// Evaluate an expression exactly and print its normal form.
    Eval(EvalArgs),
    /// Print the dequantized family, optionally evaluating phi_t.
    Dequantize(DequantizeArgs),
    /// Iterate a recurrence.
    Orbit(OrbitArgs),
    /// Exact period detection.
    Period(PeriodArgs),
    /// Compare the phi_t orbit with the pulled-back f_t orbit.
    Conjugacy(ConjugacyArgs),
    /// Drive two interval maps with a symbol stream.
    Interact(InteractArgs),
    /// Finite-memory detection, or the perturbation experiment with --epsilon.
    Memory(MemoryArgs),
    /// Evolve the Lotka-Volterra cell automaton.
    Lvca(LvcaArgs),
    /// Evolve its rational deformation.
    LvRational(LvRationalArgs),
    /// Compare both evolutions through Log_t over a sweep of t.
    Compare(CompareArgs),
    /// Track blocks of the automaton across time.
    Solitons(LvcaArgs),
    /// Relation A, the variety and their correspondence.
    Variety(VarietyArgs),
    /// Leading coefficient of a Kontsevich cycle.
    Igusa(IgusaArgs),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Eval(_) => "eval",
            Experiment::Dequantize(_) => "dequantize",
            Experiment::Orbit(_) => "orbit",
            Experiment::Period(_) => "period",
            Experiment::Conjugacy(_) => "conjugacy",
            Experiment::Interact(_) => "interact",
            Experiment::Memory(_) => "memory",
            Experiment::Lvca(_) => "lvca",
            Experiment::LvRational(_) => "lv-rational",
            Experiment::Compare(_) => "compare",
            Experiment::Solitons(_) => "solitons",
            Experiment::Variety(_) => "variety",
            Experiment::Igusa(_) => "igusa",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExprArgs {
    /// Max-plus expression, e.g. "max(max(0,y)-x, -x)".
    #[arg(long)]
    pub expr: String,
    /// Comma-separated variable names; defaults to x,y,z,w (or v0,v1,...).
    #[arg(long)]
    pub vars: Option<String>,
    /// Number of variables; inferred when omitted.
    #[arg(long)]
    pub arity: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub expr: ExprArgs,
    /// Comma-separated rational point.
    #[arg(long)]
    pub point: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DequantizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub expr: ExprArgs,
    /// Scale parameter t > 1 for evaluating phi_t.
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long)]
    pub point: Option<String>,
    #[arg(long, default_value_t = 128)]
    pub precision: u32,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// The max-plus recurrence itself.
    Pl,
    /// Its dequantization f_t.
    Rational,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OrbitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub expr: ExprArgs,
    /// Comma-separated initial window.
    #[arg(long)]
    pub init: String,
    /// Orbit length, initial window included.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = Mode::Pl)]
    pub mode: Mode,
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long, default_value_t = 128)]
    pub precision: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PeriodArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub expr: ExprArgs,
    #[arg(long)]
    pub init: String,
    #[arg(long, default_value_t = 200)]
    pub max_transient: usize,
    #[arg(long, default_value_t = 50)]
    pub max_period: usize,
    #[arg(long, value_enum, default_value_t = Mode::Pl)]
    pub mode: Mode,
    #[arg(long)]
    pub t: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConjugacyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub expr: ExprArgs,
    #[arg(long)]
    pub init: String,
    /// Comma-separated list of scale parameters.
    #[arg(long, default_value = "2,10,100")]
    pub t: String,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value_t = 128)]
    pub precision: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StreamArgs {
    /// Map for symbol 0: tent, lower-half, upper-half, identity,
    /// constant:<q> or pl:<b>:<v>,<b>:<v>,...
    #[arg(long, default_value = "lower-half")]
    pub f0: String,
    #[arg(long, default_value = "upper-half")]
    pub f1: String,
    /// Starting point in [0, 1].
    #[arg(long, default_value = "1/3")]
    pub x: String,
    /// Explicit input symbols such as 0110; otherwise random.
    #[arg(long)]
    pub symbols: Option<String>,
    #[arg(long, default_value_t = 64)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InteractArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub stream: StreamArgs,
    /// Include the exact iterates h^l(x) in the record.
    #[arg(long)]
    pub iterates: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MemoryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub stream: StreamArgs,
    #[arg(long, default_value_t = 4)]
    pub m_max: usize,
    /// Input stream; with --outputs, bypasses the interval maps.
    #[arg(long, requires = "outputs")]
    pub inputs: Option<String>,
    #[arg(long, requires = "inputs")]
    pub outputs: Option<String>,
    /// Perturbation size; switches to the stability experiment.
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LvcaArgs {
    #[arg(long = "L", default_value = "0")]
    #[serde(rename = "L")]
    pub l: String,
    /// Comma-separated initial row.
    #[arg(long)]
    pub init: String,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value = "0")]
    pub background: String,
    #[arg(long, default_value_t = 64)]
    pub precision: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LvRationalArgs {
    #[arg(long = "L", default_value = "0")]
    #[serde(rename = "L")]
    pub l: String,
    #[arg(long)]
    pub t: String,
    /// Initial row; read as exponents u with z = t^u unless --raw.
    #[arg(long)]
    pub init: String,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Background, in the same units as --init.
    #[arg(long)]
    pub background: Option<String>,
    /// Treat --init and --background as positive z values.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, default_value_t = 64)]
    pub precision: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CompareArgs {
    #[arg(long = "L", default_value = "0")]
    #[serde(rename = "L")]
    pub l: String,
    #[arg(long, default_value = "10,100,10000")]
    pub t: String,
    /// Integer initial row of the automaton.
    #[arg(long)]
    pub init: String,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value = "0")]
    pub background: String,
    #[arg(long, default_value_t = 128)]
    pub precision: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VarietyArgs {
    /// Comma-separated V1..V4; z = t^V.
    #[arg(long)]
    pub point: Option<String>,
    #[arg(long, default_value = "10")]
    pub t: String,
    /// Number of random integer points to check instead of --point.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random coordinates are drawn from -range..=range.
    #[arg(long, default_value_t = 6)]
    pub range: i64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IgusaArgs {
    /// Space-separated k^n terms, e.g. "1^2 3".
    #[arg(long)]
    pub index: String,
}

/// A validated experiment ready to run.
pub struct Job {
    pub kind: &'static str,
    pub name: String,
    pub config: Value,
    run: Box<dyn FnOnce() -> Result<Artifacts> + Send>,
}

impl Job {
    pub fn execute(self) -> Result<Output> {
        let artifacts = (self.run)()?;
        let record = json!({
            "tool": "tropdyn",
            "version": VERSION,
            "kind": self.kind,
            "config": self.config,
            "result": artifacts.result,
        });
        Ok(Output {
            name: self.name,
            record,
            files: artifacts.files,
        })
    }
}

/// What a job computes: the JSON result plus extra files keyed by suffix.
pub struct Artifacts {
    pub result: Value,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn json(result: impl Serialize) -> Result<Self> {
        Ok(Artifacts {
            result: to_value(result)?,
            files: Vec::new(),
        })
    }
}

pub(crate) fn to_value(v: impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))
}

pub struct Output {
    pub name: String,
    pub record: Value,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Output {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", self.name)), render(&self.record))?;
        for (suffix, bytes) in &self.files {
            std::fs::write(dir.join(format!("{}.{suffix}", self.name)), bytes)?;
        }
        Ok(())
    }
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values always serialize");
    s.push('\n');
    s
}

/// Validates an experiment and returns the job that runs it.
pub fn prepare(exp: Experiment, name: Option<String>) -> Result<Job> {
    let kind = exp.kind();
    let name = name.unwrap_or_else(|| kind.to_string());
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(Error::Config(format!("invalid artifact name {name:?}")));
    }
    let (exp, run) = commands::prepare(exp)?;
    Ok(Job {
        kind,
        name,
        config: to_value(&exp)?,
        run,
    })
}

fn error_record(e: &Error) -> Value {
    let mut v = json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    });
    if let Error::Midpoint { index: Some(i) } = e {
        v["index"] = json!(i);
    }
    if let Error::Syntax { position, .. } = e {
        v["position"] = json!(position);
    }
    v
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(stdout, "{e}");
            } else {
                let _ = write!(stderr, "{e}");
                let report = json!({"error": "usage", "message": e.kind().to_string(), "exit_code": 2});
                let _ = writeln!(stderr, "{report}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_record(&e));
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let single = matches!(cli.command, Command::Experiment(_));
    let (jobs, out) = match cli.command {
        Command::Experiment(exp) => (vec![prepare(exp, cli.name)?], cli.out),
        Command::Run(args) => {
            let text = std::fs::read_to_string(&args.config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
            let parsed = experiments_from_toml(&text)?;
            let out = cli.out.or(parsed.out);
            // everything is validated before anything runs
            let jobs = parsed
                .experiments
                .into_iter()
                .map(|(exp, name)| prepare(exp, name))
                .collect::<Result<Vec<_>>>()?;
            let mut names: Vec<&str> = jobs.iter().map(|j| j.name.as_str()).collect();
            names.sort();
            if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Config(format!(
                    "two experiments write artifacts named {:?}; set distinct `name` keys",
                    w[0]
                )));
            }
            (jobs, out)
        }
    };
    let mut records = Vec::new();
    for job in jobs {
        let output = job.execute()?;
        if let Some(dir) = &out {
            output.write_to(dir)?;
        }
        records.push(output.record);
    }
    let shown = if single {
        records.pop().expect("one record")
    } else {
        Value::Array(records)
    };
    stdout.write_all(render(&shown).as_bytes())?;
    Ok(())
}
