use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ptmatch_cli::config::CONFIG_HELP;
use ptmatch_cli::run::{EXIT_OK, EXIT_PARSE, EXIT_RUNTIME};
use ptmatch_cli::{parse_config, run, Command, ExperimentConfig};

/// Simulation and rate computations for template matching between point
/// processes.
#[derive(Debug, Parser)]
#[command(name = "ptmatch", version, after_long_help = CONFIG_HELP)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory, overriding PTMATCH_OUT and the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return exit(code);
        }
    };
    let mut cfg = match &cli.config {
        None => ExperimentConfig::default(),
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return exit(EXIT_RUNTIME);
                }
            };
            match parse_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error in {}: {e}", path.display());
                    return exit(EXIT_PARSE);
                }
            }
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("PTMATCH_OUT").map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cfg.out = Some(out.clone());
    let workers = cli
        .workers
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1);

    match run(cli.command, &cfg, &out, workers) {
        Ok(o) => {
            println!("{}", o.manifest_path.display());
            exit(EXIT_OK)
        }
        Err(e) => {
            eprintln!("{e}");
            exit(e.exit_code())
        }
    }
}
