use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kwising::{run, ExperimentConfig, RunOptions};

const EXIT_INVALID: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "kwising", version, about = "Variational simulation of the Ising chain with a duality defect")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Directory for outputs and record.json.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Write each Hamiltonian in the line-oriented Pauli text format.
        #[arg(long)]
        dump_hamiltonian: bool,
        /// Write each measured state as little-endian f64 re/im pairs.
        #[arg(long)]
        dump_state: bool,
    },
    /// Check a config file and list every problem found.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per circuit.
    #[arg(long, allow_negative_numbers = true)]
    shots: Option<i64>,
    /// Infinite-shot mode: exact means and zero standard errors.
    #[arg(long)]
    analytic: bool,
}

impl Overrides {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(s) = self.shots {
            c.shots = Some(s);
        }
        if self.analytic {
            c.analytic = true;
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, ExitCode> {
    match ExperimentConfig::load(path) {
        Ok(mut c) => {
            overrides.apply(&mut c);
            Ok(c)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            Err(ExitCode::from(EXIT_INVALID))
        }
    }
}

fn report_diagnostics(config: &ExperimentConfig) -> bool {
    let diags = config.validate();
    for d in &diags {
        eprintln!("invalid: {d}");
    }
    diags.is_empty()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config, overrides } => {
            let c = match load(&config, &overrides) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if report_diagnostics(&c) {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INVALID)
            }
        }
        Command::Run {
            config,
            overrides,
            out_dir,
            dump_hamiltonian,
            dump_state,
        } => {
            let c = match load(&config, &overrides) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if !report_diagnostics(&c) {
                return ExitCode::from(EXIT_INVALID);
            }
            let opts = RunOptions {
                out_dir,
                dump_hamiltonian,
                dump_state,
            };
            match run(&c, &opts) {
                Ok(record) => {
                    print!("{}", record.summary_table());
                    println!("outputs_hash {}", record.outputs_hash);
                    println!("wall_time_s {:.3}", record.wall_time_s);
                    if record.converged {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("warning: optimization did not reach the target error");
                        ExitCode::from(EXIT_NOT_CONVERGED)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_INTERNAL)
                }
            }
        }
    }
}
