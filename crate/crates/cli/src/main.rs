//! `vpclt`: runs one experiment pipeline and writes a JSON report plus CSV
//! tables into the output directory.
//!
//! Exit codes: 0 on success, 1 on invalid configuration or input, 2 on a
//! numerical failure. Failures print a JSON error object on stderr.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use commands::Output;
use config::*;

#[derive(Debug, Parser)]
#[command(name = "vpclt", version = vpclt::VERSION, about = "Vallée-Poussin approximation, series criteria and Monte-Carlo bands")]
struct Cli {
    /// Master seed; overrides `seed` in the config file.
    #[arg(long, global = true, env = "VPCLT_SEED")]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "vpclt-out")]
    out_dir: PathBuf,

    /// JSON config document for the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Dot-path override, e.g. `--set process.delta=0.2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Vallée-Poussin errors against the best-approximation bound.
    Approx,
    /// Sample paths of a process or of its normalized sums.
    Simulate,
    /// Block U terms and the series trend verdict.
    Criterion,
    /// Series tails uniformly over normalized sums.
    Equiconv,
    /// Entropy profile and Dudley check of a metric sample.
    Entropy,
    /// Entropy probe of the `eta0` process.
    Probe41,
    /// Uniform confidence band for a parametric integral.
    Band,
    /// KS distance between sup|ζ_n| and the Gaussian-limit sup.
    CltTest,
    /// Decay series trend check.
    DecayCheck,
    /// End-to-end worked examples.
    Demo {
        #[arg(value_enum)]
        example: Example,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Example {
    /// `eta0` sampling, entropy probe and Dudley verdict.
    Example1,
    /// Uniform band for `cos(t) · β` with coverage.
    Example2,
    /// Moments of the sequence-space process.
    Example3,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Approx => "approx".into(),
            Command::Simulate => "simulate".into(),
            Command::Criterion => "criterion".into(),
            Command::Equiconv => "equiconv".into(),
            Command::Entropy => "entropy".into(),
            Command::Probe41 => "probe41".into(),
            Command::Band => "band".into(),
            Command::CltTest => "clt-test".into(),
            Command::DecayCheck => "decay-check".into(),
            Command::Demo { example } => format!(
                "demo-{}",
                example.to_possible_value().expect("named").get_name()
            ),
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(vpclt::Error),
}

impl From<vpclt::Error> for CliError {
    fn from(e: vpclt::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }

    fn to_json(&self) -> Value {
        use vpclt::Error as E;
        let (kind, field, message) = match self {
            CliError::Config(m) => ("config", None, m.clone()),
            CliError::Lib(e) => {
                let kind = match e {
                    E::InvalidParameter { .. } => "invalid_parameter",
                    E::Aliasing { .. } => "aliasing",
                    E::IndexOutOfRange { .. } => "index_out_of_range",
                    E::NotPositiveSemidefinite { .. } => "not_positive_semidefinite",
                    E::InsufficientData(_) => "insufficient_data",
                    E::Resolution { .. } => "resolution",
                    E::TriangleInequality { .. } => "triangle_inequality",
                    E::Parse { .. } => "parse",
                    E::Io(_) => "io",
                    E::Csv(_) => "csv",
                };
                let field = match e {
                    E::InvalidParameter { field, .. } => Some(field.clone()),
                    _ => None,
                };
                (kind, field, e.to_string())
            }
        };
        json!({
            "error": {
                "kind": kind,
                "field": field,
                "message": message,
                "exit_code": self.exit_code(),
            }
        })
    }
}

/// User-supplied layers over the command defaults, in increasing priority.
struct Layers {
    file: Value,
    overrides: Vec<String>,
    seed: Option<u64>,
}

/// Resolves the config, runs the pipeline and writes `<command>.json`.
fn execute<C, F>(
    name: &str,
    layers: Layers,
    out: &mut Output,
    fix: impl FnOnce(&mut C),
    run: F,
) -> Result<Value, CliError>
where
    C: DeserializeOwned + Serialize + Default,
    F: FnOnce(&C, &mut Output) -> vpclt::Result<Value>,
{
    let mut doc = serde_json::to_value(C::default()).expect("configs serialize");
    merge(&mut doc, layers.file);
    for o in &layers.overrides {
        apply_override(&mut doc, o)?;
    }
    if let Some(seed) = layers.seed {
        doc["seed"] = json!(seed);
    }
    let mut cfg: C = resolve(doc)?;
    fix(&mut cfg);
    let result = run(&cfg, out)?;
    let report_name = format!("{name}.json");
    out.files.push(report_name.clone());
    let report = json!({
        "command": name,
        "version": vpclt::VERSION,
        "config": serde_json::to_value(&cfg).expect("configs serialize"),
        "result": result,
        "files": out.files,
    });
    out.files.pop();
    out.json(&report_name, &report)?;
    Ok(report)
}

fn run(cli: Cli) -> Result<Value, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let doc = Layers {
        file: load_document(cli.config.as_deref())?,
        overrides: cli.overrides,
        seed: cli.seed,
    };
    let name = cli.command.name();
    let mut out = Output::new(&cli.out_dir)?;
    let out = &mut out;
    match cli.command {
        Command::Approx => execute(&name, doc, out, |_: &mut ApproxConfig| {}, commands::approx),
        Command::Simulate => execute(
            &name,
            doc,
            out,
            |_: &mut SimulateConfig| {},
            commands::simulate,
        ),
        Command::Criterion => execute(
            &name,
            doc,
            out,
            |_: &mut CriterionConfig| {},
            commands::criterion,
        ),
        Command::Equiconv => execute(
            &name,
            doc,
            out,
            |_: &mut EquiconvConfig| {},
            commands::equiconv,
        ),
        Command::Entropy => execute(
            &name,
            doc,
            out,
            |_: &mut EntropyConfig| {},
            commands::entropy,
        ),
        Command::Probe41 => execute(
            &name,
            doc,
            out,
            |_: &mut Probe41Config| {},
            commands::probe41,
        ),
        Command::Band => execute(
            &name,
            doc,
            out,
            |_: &mut BandCommandConfig| {},
            commands::band,
        ),
        Command::CltTest => execute(
            &name,
            doc,
            out,
            |_: &mut CltCommandConfig| {},
            commands::clt_test,
        ),
        Command::DecayCheck => execute(
            &name,
            doc,
            out,
            |_: &mut DecayCheckConfig| {},
            commands::decay_check,
        ),
        Command::Demo { example } => match example {
            Example::Example1 => execute(
                &name,
                doc,
                out,
                |_: &mut Example1Config| {},
                commands::example1,
            ),
            Example::Example2 => execute(
                &name,
                doc,
                out,
                |_: &mut Example2Config| {},
                commands::example2,
            ),
            // the run seed drives the moments
            Example::Example3 => execute(
                &name,
                doc,
                out,
                |c: &mut Example3Config| c.moments.seed = c.seed,
                commands::example3,
            ),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            // a closed stdout is not a failure; the report is already on disk
            let text = serde_json::to_string_pretty(&report).expect("reports serialize");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
