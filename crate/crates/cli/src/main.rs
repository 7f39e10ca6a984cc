use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hilbert_bundle::report::write_records;
use hilbert_bundle::scenario::{
    check_invariants, convergence_study, load_config_file, run_scenario, sidecar_text, write_trace, ScenarioConfig,
};
use hilbert_bundle::Error;

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "hbundle", version, about = "Run and check Hilbert-bundle evolution scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the trace of a scenario as CSV.
    Run {
        config: PathBuf,
        /// Output file; a `.meta.toml` sidecar is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every invariant; exits 1 if any fails.
    CheckInvariants {
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Defaults to the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Final-state error and observed order over a step ladder.
    Convergence {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<usize>,
    },
}

struct Failure {
    code: u8,
    error: Error,
}

impl Failure {
    fn config(error: Error) -> Self {
        Self {
            code: EXIT_CONFIG,
            error,
        }
    }

    fn numerical(error: Error) -> Self {
        let code = if error.is_config_error() {
            EXIT_CONFIG
        } else {
            EXIT_NUMERICAL
        };
        Self { code, error }
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    load_config_file(path).map_err(Failure::config)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.toml");
    out.with_file_name(name)
}

fn run(config: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let cfg = load(config)?;
    let records = run_scenario(&cfg).map_err(Failure::numerical)?;
    match out {
        Some(path) => {
            let io = |e: io::Error| Failure::numerical(e.into());
            let file = BufWriter::new(File::create(path).map_err(io)?);
            write_trace(file, &cfg, &records).map_err(Failure::numerical)?;
            std::fs::write(sidecar_path(path), sidecar_text(&cfg, records.len())).map_err(io)?;
        }
        None => write_trace(io::stdout().lock(), &cfg, &records).map_err(Failure::numerical)?,
    }
    Ok(0)
}

fn check(config: &Path, samples: usize, seed: Option<u64>) -> Result<u8, Failure> {
    let cfg = load(config)?;
    if samples == 0 {
        return Err(Failure::config(Error::InvalidArgument("--samples must be positive".into())));
    }
    let report = check_invariants(&cfg, samples, seed.unwrap_or(cfg.seed)).map_err(Failure::numerical)?;
    write_records(io::stdout().lock(), &report.records).map_err(Failure::numerical)?;
    let failed: Vec<_> = report.failures().collect();
    if failed.is_empty() {
        eprintln!("{}: all {} properties hold", report.scenario, report.records.len());
        Ok(0)
    } else {
        for r in &failed {
            eprintln!(
                "{}: {} failed for {} (defect {:e} > {:e})",
                report.scenario, r.property, r.law, r.max_defect, r.tolerance
            );
        }
        Ok(EXIT_INVARIANT)
    }
}

fn convergence(config: &Path, steps: &[usize]) -> Result<u8, Failure> {
    let cfg = load(config)?;
    let table = match convergence_study(&cfg, steps) {
        Err(e @ Error::InvalidArgument(_)) => return Err(Failure::config(e)),
        other => other.map_err(Failure::numerical)?,
    };
    table.write_csv(io::stdout().lock()).map_err(Failure::numerical)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config, out } => run(config, out.as_deref()),
        Command::CheckInvariants { config, samples, seed } => check(config, *samples, *seed),
        Command::Convergence { config, steps } => convergence(config, steps),
    };
    let _ = io::stdout().flush();
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error}");
            ExitCode::from(code)
        }
    }
}
