//! `bellcheck` command-line tool.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage
//! errors (bad flags, unknown models, malformed manifests).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use bellcheck::harness::battery::BatteryConfig;
use bellcheck::harness::manifest::{
    default_seed, EnsembleSpec, ExperimentManifest, ModelSpec, OutputFormat, OutputSpec, SettingsSpec, Task,
    SEED_ENV,
};
use bellcheck::harness::{cmd_curve, delta_grid, full, run_manifest, write_record, ResultRecord};
use bellcheck::Model;

#[derive(Parser)]
#[command(name = "bellcheck", version, about = "Verify Bell-type hidden-variable models against quantum statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random stream of the run.
    #[arg(long, env = SEED_ENV, global = true)]
    seed: Option<u64>,
    /// Read angle flags as degrees instead of radians.
    #[arg(long, global = true)]
    deg: bool,
    /// Write the result record to this path.
    #[arg(long, global = true)]
    record: Option<PathBuf>,
    /// Record format.
    #[arg(long, global = true, value_parser = ["json", "csv"], default_value = "json")]
    format: String,
    /// Write the manifest of this run to this path.
    #[arg(long, global = true)]
    emit_manifest: Option<PathBuf>,
    /// Include wall time in the result record.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Args, Clone)]
struct ModelArg {
    /// qm, simplistic, hall, baseline or signaling.
    #[arg(long)]
    model: String,
    /// Remote-setting coupling of the signaling test model.
    #[arg(long)]
    coupling: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact joint distribution at one pair of settings, optionally simulated.
    Joint {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        /// Also simulate this many trials.
        #[arg(long)]
        n: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// CHSH value at four settings.
    Chsh {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        a_prime: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        b_prime: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Maximize |S| over all settings.
    Scan {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 16)]
        grid_n: usize,
        #[arg(long, default_value_t = 50)]
        refine: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Mutual information between λ and the settings.
    Mi {
        #[command(flatten)]
        model: ModelArg,
        /// `quadruple` or `grid:N`.
        #[arg(long, default_value = "quadruple")]
        ensemble: String,
        #[command(flatten)]
        common: Common,
    },
    /// Largest marginal shift caused by the remote setting.
    Nosignal {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 16)]
        probes: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate trials and compare with the exact distribution.
    Sample {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        /// Write every trial as `a,b,lambda,A,B` to this file.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the full verification battery.
    Verify {
        /// Manifest describing the battery (task must be `verify`).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Add the signaling test model to the no-signaling checks.
        #[arg(long)]
        inject_signaling: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Correlator E versus a − b as CSV, one column per model.
    Curve {
        /// Comma-separated model names.
        #[arg(long, value_delimiter = ',', default_value = "qm,baseline")]
        models: Vec<String>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2, allow_hyphen_values = true)]
        stop: f64,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        /// Write the table here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run any task from a manifest file.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Usage(String),
    Verification,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn angle(common: &Common, x: f64) -> f64 {
    if common.deg {
        x.to_radians()
    } else {
        x
    }
}

fn base_manifest(model: &ModelArg, task: Task, common: &Common) -> ExperimentManifest {
    let mut m = ExperimentManifest::new(&model.model, task);
    m.model = ModelSpec::named(&model.model);
    if let Some(c) = model.coupling {
        m.model.params.insert("coupling".into(), c);
    }
    m.seed = common.seed.unwrap_or_else(default_seed);
    m.options.record_timing = common.timing;
    m
}

fn read_manifest(path: &PathBuf) -> Result<ExperimentManifest, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(ExperimentManifest::from_json(&text)?)
}

fn parse_ensemble(s: &str) -> Result<EnsembleSpec, Failure> {
    match s {
        "quadruple" | "chsh" => Ok(EnsembleSpec::ChshQuadruple),
        _ => match s.strip_prefix("grid:").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => Ok(EnsembleSpec::Grid(n)),
            _ => Err(Failure::Usage(format!("unknown ensemble `{s}` (use `quadruple` or `grid:N`)"))),
        },
    }
}

fn print_record(record: &ResultRecord) {
    print_values("", &record.values);
    for c in &record.checks {
        println!("{}", c.summary());
    }
}

fn print_values(prefix: &str, v: &Value) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                print_values(&key, v);
            }
        }
        Value::Array(items) if items.iter().any(|x| x.is_object()) => {
            for (i, item) in items.iter().enumerate() {
                print_values(&format!("{prefix}[{i}]"), item);
            }
        }
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            println!("{prefix} = [{}]", parts.join(", "));
        }
        other => println!("{prefix} = {}", scalar(other)),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => full(n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

fn finish(manifest: &ExperimentManifest, common: &Common) -> Result<(), Failure> {
    let mut manifest = manifest.clone();
    if let Some(path) = &common.record {
        let format = if common.format == "csv" { OutputFormat::Csv } else { OutputFormat::Json };
        manifest.output = Some(OutputSpec { path: path.clone(), format });
    }
    if let Some(path) = &common.emit_manifest {
        std::fs::write(path, manifest.to_json() + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    execute(&manifest)
}

fn execute(manifest: &ExperimentManifest) -> Result<(), Failure> {
    let record = run_manifest(manifest)?;
    print_record(&record);
    if let Some(out) = &manifest.output {
        write_record(&record, out)?;
    }
    if record.all_passed() {
        Ok(())
    } else {
        for c in record.failures() {
            eprintln!("failed: {}", c.name);
        }
        Err(Failure::Verification)
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Joint { model, a, b, n, common } => {
            let mut m = base_manifest(&model, Task::Joint, &common);
            m.settings = Some(SettingsSpec::Pairs(vec![[angle(&common, a), angle(&common, b)]]));
            m.trials = n;
            finish(&m, &common)
        }
        Command::Chsh { model, a, a_prime, b, b_prime, common } => {
            let mut m = base_manifest(&model, Task::Chsh, &common);
            m.settings = Some(SettingsSpec::Chsh {
                a: angle(&common, a),
                a_prime: angle(&common, a_prime),
                b: angle(&common, b),
                b_prime: angle(&common, b_prime),
            });
            finish(&m, &common)
        }
        Command::Scan { model, grid_n, refine, common } => {
            let mut m = base_manifest(&model, Task::Scan, &common);
            m.options.grid_n = Some(grid_n);
            m.options.refine_iters = Some(refine);
            finish(&m, &common)
        }
        Command::Mi { model, ensemble, common } => {
            let mut m = base_manifest(&model, Task::Mi, &common);
            m.options.ensemble = Some(parse_ensemble(&ensemble)?);
            finish(&m, &common)
        }
        Command::Nosignal { model, probes, common } => {
            let mut m = base_manifest(&model, Task::Nosignal, &common);
            m.options.probes = Some(probes);
            finish(&m, &common)
        }
        Command::Sample { model, a, b, n, log, common } => {
            let mut m = base_manifest(&model, Task::Sample, &common);
            m.settings = Some(SettingsSpec::Pairs(vec![[angle(&common, a), angle(&common, b)]]));
            m.trials = Some(n);
            m.options.trial_log = log;
            finish(&m, &common)
        }
        Command::Verify { manifest, inject_signaling, common } => {
            let mut m = match &manifest {
                Some(path) => {
                    let m = read_manifest(path)?;
                    if m.task != Task::Verify {
                        return Err(Failure::Usage("verify needs a manifest with task `verify`".into()));
                    }
                    m
                }
                None => {
                    let mut m = ExperimentManifest::new("all", Task::Verify);
                    m.seed = common.seed.unwrap_or_else(default_seed);
                    m
                }
            };
            if inject_signaling {
                m.options.battery.get_or_insert_with(BatteryConfig::default).inject_signaling = true;
            }
            m.options.record_timing |= common.timing;
            finish(&m, &common)
        }
        Command::Curve { models, start, stop, steps, output, common } => {
            let models: Vec<Model> = models.iter().map(|n| Model::by_name(n.trim(), None)).collect::<Result<_, _>>()?;
            let deltas = delta_grid(angle(&common, start), angle(&common, stop), steps);
            let table = cmd_curve(&models, &deltas)?;
            match output {
                Some(path) => std::fs::write(&path, table).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::Run { manifest, common } => {
            let m = read_manifest(&manifest)?;
            finish(&m, &common)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
