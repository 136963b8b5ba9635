use std::path::PathBuf;
use std::process::ExitCode;

use bridgekernel_cli::{execute, exit, exit_code, render, ExperimentConfig, Format, RunError};
use clap::Parser;

/// Run one configured bridgekernel experiment.
///
/// Exit status: 0 when every asserted check passed, 1 when a check failed,
/// 2 on a schema violation, 3 on a numerical abort.
#[derive(Debug, Parser)]
#[command(name = "bridgekernel", version)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides the config, stdout when neither is given.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; overrides the config.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: &Args) -> Result<i32, RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Schema(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output.path = Some(out.clone());
    }
    if let Some(format) = args.format {
        config.output.format = format;
    }
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(RunError::Schema("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Abort(format!("cannot start worker pool: {e}")))?;
    }
    let outcome = execute(&config)?;
    let rendered = render(&config, &outcome, config.output.format)?;
    match &config.output.path {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(exit_code(&outcome))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match run(&args) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", serde_json::json!({"error": e.to_string(), "exit_code": code}));
            code
        }
    };
    debug_assert!([exit::OK, exit::CHECK_FAILED, exit::SCHEMA, exit::ABORT].contains(&code));
    ExitCode::from(code as u8)
}
