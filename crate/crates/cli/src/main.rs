use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use subfair_cli::config::ExperimentConfig;
use subfair_cli::{runner, sweep, verify};
use subfair_cli::{EXIT_CHECK_FAILED, EXIT_CONFIG_ERROR, EXIT_OK};

/// Regret-minimization experiments over overlapping subgroups.
#[derive(Parser)]
#[command(name = "subfair", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config; writes trajectory_<seed>.csv and
    /// summary_<seed>.json per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cross product of an axis and a seed range; writes sweep.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Axis spec, e.g. t=4096,8192,16384 (supported: t, eta).
        #[arg(long)]
        axis: String,
        /// Number of seeds (runs seeds 1..=K per cell).
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite and print one line per check.
    Verify {
        /// One of: regret-bounds, ic-counterexample, mw-ic, impossibility,
        /// estimators, all.
        #[arg(long)]
        suite: String,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, i32> {
    ExperimentConfig::from_path(path).map_err(|e| {
        eprintln!("config error: {e}");
        EXIT_CONFIG_ERROR
    })
}

fn run() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out } => {
            let config = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match runner::run_to_dir(&config, &out, seed) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    EXIT_CHECK_FAILED
                }
            }
        }
        Command::Sweep { config, axis, seeds, out } => {
            let config = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let axis = match sweep::parse_axis(&axis) {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return EXIT_CONFIG_ERROR;
                }
            };
            if seeds == 0 {
                eprintln!("config error: sweep needs at least one seed");
                return EXIT_CONFIG_ERROR;
            }
            match sweep::sweep_to_dir(&config, &axis, seeds, &out) {
                Ok(path) => {
                    println!("wrote {}", path.display());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("sweep failed: {e}");
                    EXIT_CHECK_FAILED
                }
            }
        }
        Command::Verify { suite } => match verify::run_suite(&suite) {
            Ok(checks) => {
                let mut failures = 0;
                for check in &checks {
                    let verdict = if check.pass { "PASS" } else { "FAIL" };
                    println!("{verdict} {} {}: {}", check.id, check.name, check.detail);
                    if !check.pass {
                        failures += 1;
                    }
                }
                println!(
                    "{} checks, {} failed",
                    checks.len(),
                    failures
                );
                if failures == 0 {
                    EXIT_OK
                } else {
                    EXIT_CHECK_FAILED
                }
            }
            Err(e) => {
                eprintln!("config error: {e}");
                EXIT_CONFIG_ERROR
            }
        },
    }
}

fn main() -> ExitCode {
    ExitCode::from(run() as u8)
}
