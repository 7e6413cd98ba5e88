use clap::Parser;
use fomlab::cli::report::write_atomic;
use fomlab::cli::{run_with_threads, threads_from_env, CliError, Format, RunConfig, EXIT_OK};
use std::path::PathBuf;
use std::process::ExitCode;

/// Task-based figures of merit from a TOML run configuration.
#[derive(Parser, Debug)]
#[command(name = "fomlab", version)]
struct Args {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Report path; overrides `output.path`. Without either the report goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Suppress the summary on stderr.
    #[arg(long)]
    quiet: bool,
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let config = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let outcome = match run_with_threads(&config, threads) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let report = &outcome.report;
    let body = match config.output.format {
        Format::Json => report.to_json(),
        Format::Csv => report
            .roc_csv()
            .ok_or_else(|| CliError::io("no ROC curve to write")),
    };
    let body = match body {
        Ok(b) => b,
        Err(e) => return fail(&e),
    };
    let path = args.output.or_else(|| config.output.path.as_ref().map(PathBuf::from));
    match &path {
        Some(p) => {
            if let Err(e) = write_atomic(p, &body) {
                return fail(&e);
            }
        }
        None => print!("{body}"),
    }
    if let Some(err) = &report.error {
        eprintln!("{}", serde_json::json!({ "error": err }));
    }
    if !args.quiet {
        let target = path.map_or("stdout".to_string(), |p| p.display().to_string());
        eprintln!(
            "fomlab: {} section(s), {} warning(s), {:.2}s -> {target}",
            report.results.len(),
            report.warnings.len(),
            report.wall_time_s
        );
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    if outcome.exit_code == EXIT_OK {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(outcome.exit_code as u8)
    }
}
