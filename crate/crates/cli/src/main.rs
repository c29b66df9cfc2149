use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swe_core::config::load_config;
use swe_core::verification::{run_suite, Suite};
use swe_core::{run, Error};

#[derive(Parser)]
#[command(name = "swe", version, about = "Well-balanced shallow-water solver with convex limiting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a configuration file.
    Run {
        config: PathBuf,
        /// Output directory for snapshots, probes and the report.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        cfl: Option<f64>,
        /// Cells per mesh unit (overrides `[mesh] cells`).
        #[arg(long)]
        mesh: Option<usize>,
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Run an acceptance suite: all, quick, or a single criterion name.
    Verify { suite: String },
}

const EXIT_TOLERANCE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::UnknownScheme(_) | Error::UnknownScenario(_) | Error::Io { .. } => {
            EXIT_CONFIG
        }
        _ => EXIT_TOLERANCE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output, cfl, mesh, scheme } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code(&e));
                }
            };
            if output.is_some() {
                cfg.output_dir = output;
            }
            if cfl.is_some() {
                cfg.cfl = cfl;
            }
            if mesh.is_some() {
                cfg.cells = mesh;
            }
            if let Some(s) = scheme {
                cfg.scheme = s;
            }
            match cfg.validate().and_then(|_| run(&cfg)) {
                Ok(report) => {
                    print!("{}", report.to_text());
                    println!();
                    print!("{}", report.to_key_value());
                    if report.min_depth >= 0.0 {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("error: final state is not admissible (min depth {:e})", report.min_depth);
                        ExitCode::from(EXIT_TOLERANCE)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e))
                }
            }
        }
        Command::Verify { suite } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let results = run_suite(suite, &mut |r| println!("{r}"));
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} passed, {} failed", results.len() - failed, failed);
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_TOLERANCE)
            }
        }
    }
}
