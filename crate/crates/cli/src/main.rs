use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vexlab_cli::{run, RunOptions, Scenario};

/// Numerical experiments for -div(|grad u|^{p(x)-2} grad u) = |u|^{q(x)-2} u.
#[derive(Debug, Parser)]
#[command(name = "vexlab", version)]
struct Args {
    scenario: Scenario,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: the config's "out", else ./vexlab-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        scenario: args.scenario,
        config: args.config,
        out: args.out,
        seed: args.seed,
    };
    match run(&opts) {
        Ok(summary) => {
            for path in &summary.written {
                println!("{}", path.display());
            }
            if summary.exit_code != 0 {
                eprintln!("vexlab: {} finished with exit code {}", opts.scenario, summary.exit_code);
            }
            ExitCode::from(summary.exit_code as u8)
        }
        Err(e) => {
            eprintln!("vexlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
