use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frodo_lab::compare::{compare, Better};
use frodo_lab::{exit, run, ExperimentConfig, LabError, Overrides};

#[derive(Debug, Parser)]
#[command(name = "frodo-lab", version, about = "Multi-seed runs of online target discovery on toy problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run an experiment for every seed and write per-seed and aggregate CSVs
    Run {
        /// TOML file with any of the flags below (snake_case keys); flags win
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare final-window means; exits 0 iff the candidate beats every baseline
    Compare {
        /// Baseline CSV; repeat to compare against the best of several
        #[arg(long, required = true)]
        baseline: Vec<PathBuf>,
        /// Candidate CSV
        #[arg(long)]
        candidate: PathBuf,
        /// Column to compare (`<metric>_mean` is used for aggregate files)
        #[arg(long, default_value = "episode_return_mean")]
        metric: String,
        /// Trailing fraction of rows forming the final window
        #[arg(long, default_value_t = 0.1)]
        window: f64,
        /// `higher` or `lower`; inferred from the metric name when absent
        #[arg(long)]
        better: Option<String>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn report(e: &LabError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        LabError::Config(_) => code(exit::CONFIG),
        _ => code(exit::RUNTIME),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return code(exit::SUCCESS);
        }
        Err(e) => {
            let _ = e.print();
            return code(exit::CONFIG);
        }
    };
    match cli.command {
        Command::Run { config, overrides } => {
            let file = match config.as_deref().map(Overrides::from_toml_file).transpose() {
                Ok(f) => f.unwrap_or_default(),
                Err(e) => return report(&e),
            };
            let config = match ExperimentConfig::resolve(overrides, file) {
                Ok(c) => c,
                Err(e) => return report(&e),
            };
            match run(&config) {
                Ok(summary) => {
                    for c in &summary.conditions {
                        let diverged = c.runs.iter().filter(|r| r.diverged).count();
                        println!(
                            "{}: {} seeds written to {} ({} with diverged updates)",
                            config.experiment,
                            c.runs.len(),
                            c.dir.display(),
                            diverged
                        );
                    }
                    if summary.all_diverged() {
                        eprintln!("every seed diverged");
                        code(exit::DIVERGED)
                    } else {
                        code(exit::SUCCESS)
                    }
                }
                Err(e) => report(&e),
            }
        }
        Command::Compare {
            baseline,
            candidate,
            metric,
            window,
            better,
        } => {
            let better = match better.as_deref().map(str::parse::<Better>).transpose() {
                Ok(b) => b,
                Err(e) => return report(&e),
            };
            match compare(&baseline, &candidate, &metric, window, better) {
                Ok(r) => {
                    println!("{r}");
                    code(if r.candidate_wins() { exit::SUCCESS } else { exit::NOT_BETTER })
                }
                Err(e @ LabError::Data(_)) => {
                    eprintln!("error: {e}");
                    code(exit::CONFIG)
                }
                Err(e) => report(&e),
            }
        }
    }
}
