use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiments::{prepare, run as run_experiment, Outcome};
use crate::output::{csv, num};

/// Exit code when more than half the replicas overflowed.
pub const EXIT_OVERFLOW: i32 = 4;

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: PathBuf,
    pub workers: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Add wall time to the JSON summary (which then differs between runs).
    pub timing: bool,
}

/// Paths of the two files a run writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
}

impl OutputPaths {
    fn resolve(args: &RunArgs, exp: &ExperimentConfig) -> Self {
        let csv = match (&args.out, &exp.output) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => PathBuf::from(p),
            (None, None) => {
                let stem = args.config.file_stem().map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
                PathBuf::from(format!("{stem}.csv"))
            }
        };
        let json = csv.with_extension("json");
        OutputPaths { csv, json }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn summary(exp: &ExperimentConfig, outcome: &Outcome, wall_time: Option<f64>) -> Value {
    let mut m = Map::new();
    m.insert("experiment".into(), json!(exp.experiment.name()));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("seed".into(), json!(exp.seed));
    m.insert("config".into(), exp.echo());
    m.insert("replicas".into(), json!(outcome.replicas));
    m.insert("overflowed".into(), json!(outcome.overflowed));
    m.insert("results".into(), Value::Object(outcome.results.clone()));
    if let Some(w) = wall_time {
        m.insert("wall_time_seconds".into(), num(w));
    }
    Value::Object(m)
}

/// Parses, validates, runs and writes outputs, returning the paths and
/// the outcome.
pub fn execute(args: &RunArgs) -> Result<(OutputPaths, Outcome, Value), CliError> {
    let started = Instant::now();
    if args.workers == 0 {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    let mut exp = ExperimentConfig::parse(&read(&args.config)?)?;
    if let Some(seed) = args.seed {
        exp.seed = seed;
    }
    let paths = OutputPaths::resolve(args, &exp);
    let setup = prepare(exp, args.workers)?;
    log::info!("running {} on {} with {} workers", setup.exp.experiment, setup.exp.model.name(), args.workers);
    let outcome = run_experiment(&setup)?;
    let elapsed = started.elapsed().as_secs_f64();
    log::info!("finished in {elapsed:.2} s");
    let summary = summary(&setup.exp, &outcome, args.timing.then_some(elapsed));
    write(&paths.csv, &csv(&outcome.header, &outcome.rows))?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(&paths.json, &format!("{text}\n"))?;
    Ok((paths, outcome, summary))
}

/// Runs one config and returns the process exit code.
pub fn run(args: &RunArgs) -> i32 {
    match execute(args) {
        Ok((_, outcome, summary)) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            if outcome.overflowed * 2 > outcome.replicas {
                eprintln!(
                    "error: population overflow in {} of {} replicas (raise max_population)",
                    outcome.overflowed, outcome.replicas
                );
                EXIT_OVERFLOW
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
