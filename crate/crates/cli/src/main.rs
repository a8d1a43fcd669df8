use std::path::PathBuf;
use std::process::ExitCode;

use branchlln_cli::{run, RunArgs};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "branch-lln", version, about = "Simulate branching Markov processes with absorption")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Parallel worker threads; outputs do not depend on it.
        #[arg(long, env = "BRANCH_LLN_WORKERS")]
        workers: Option<usize>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV path; the JSON summary goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall time in the JSON summary.
        #[arg(long)]
        timing: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run { config, workers, seed, out, timing } = cli.command;
    let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    ExitCode::from(run(&RunArgs { config, workers, seed, out, timing }) as u8)
}
