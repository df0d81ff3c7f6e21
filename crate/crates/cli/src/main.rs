use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sciswarm_core::{replay, run, ConfigDocument, Error, RunConfig, RunStatus};
use serde_json::Value;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_EXTINCT: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "sciswarm",
    version,
    about = "Swarm simulator of a community of virtual labs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iterations: Option<u64>,
        /// Initial number of labs.
        #[arg(long)]
        labs: Option<u64>,
        #[arg(long)]
        landscape: Option<String>,
        #[arg(long)]
        dim: Option<u64>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit an event log and rebuild the final state from it.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Run once per value of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// KEY=v1,v2,...
        #[arg(long)]
        vary: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Parse(_)
        | Error::Validation { .. }
        | Error::UnknownLandscape(_)
        | Error::NoReference(_)
        | Error::InvalidCap { .. }
        | Error::DimensionMismatch { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(&err))
}

fn read_document(path: &Path) -> Result<ConfigDocument, Error> {
    let text = fs::read_to_string(path)?;
    ConfigDocument::parse(&text)
}

/// Sweep values are JSON when they parse as JSON, plain strings otherwise.
fn sweep_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn dir_name(key: &str, raw: &str) -> String {
    let clean: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{key}={clean}")
}

fn finish(config: RunConfig) -> Result<RunStatus, Error> {
    let summary = run(config)?;
    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    Ok(summary.status)
}

fn status_code(status: RunStatus) -> ExitCode {
    match status {
        RunStatus::Completed => ExitCode::SUCCESS,
        RunStatus::Extinct => ExitCode::from(EXIT_EXTINCT),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            iterations,
            labs,
            landscape,
            dim,
            mode,
            out,
        } => {
            let mut doc = match read_document(&config) {
                Ok(doc) => doc,
                Err(e) => return fail(e),
            };
            if let Some(v) = seed {
                doc.set("seed", v.into());
            }
            if let Some(v) = iterations {
                doc.set("iterations", v.into());
            }
            if let Some(v) = labs {
                doc.set("lifecycle.initial_population", v.into());
            }
            if let Some(v) = landscape {
                doc.set("landscape", v.into());
            }
            if let Some(v) = dim {
                doc.set("dim", v.into());
            }
            if let Some(v) = mode {
                doc.set("mode", v.into());
            }
            if let Some(v) = out {
                doc.set("out", v.display().to_string().into());
            }
            match doc.resolve().and_then(finish) {
                Ok(status) => status_code(status),
                Err(e) => fail(e),
            }
        }
        Command::Replay { log } => {
            let file = match File::open(&log) {
                Ok(f) => f,
                Err(e) => return fail(e.into()),
            };
            match replay(BufReader::new(file)) {
                Ok(report) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&report).expect("report serializes")
                    );
                    if report.is_sound() {
                        ExitCode::SUCCESS
                    } else {
                        for v in &report.violations {
                            eprintln!("violation: {v}");
                        }
                        if report.matches_summary != Some(true) {
                            eprintln!("reconstruction does not match the logged summary");
                        }
                        ExitCode::from(EXIT_FAILURE)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { config, vary, out } => {
            let Some((key, values)) = vary.split_once('=') else {
                return fail(Error::validation("--vary", "expected KEY=v1,v2,..."));
            };
            let values: Vec<&str> = values
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                return fail(Error::validation("--vary", "no values given"));
            }
            let base = match read_document(&config) {
                Ok(doc) => doc,
                Err(e) => return fail(e),
            };
            // resolve every point first so a bad value fails before any run
            let mut runs = Vec::new();
            for raw in &values {
                let mut doc = base.clone();
                doc.set(key, sweep_value(raw));
                doc.set(
                    "out",
                    out.join(dir_name(key, raw)).display().to_string().into(),
                );
                match doc.resolve() {
                    Ok(c) => runs.push(c),
                    Err(e) => return fail(e),
                }
            }
            let mut extinct = false;
            for c in runs {
                match finish(c) {
                    Ok(RunStatus::Extinct) => extinct = true,
                    Ok(RunStatus::Completed) => {}
                    Err(e) => return fail(e),
                }
            }
            if extinct {
                ExitCode::from(EXIT_EXTINCT)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
