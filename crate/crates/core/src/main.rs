use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use oleach_sim::config::{apply_protocol, parse_config};
use oleach_sim::output::{emit_csv, emit_summary};
use oleach_sim::sim::{run_simulation, RunSpec};
use oleach_sim::{ConfigError, SimError};

/// Simulate LEACH and O-LEACH on a seeded random deployment and write
/// per-round metric traces as CSV.
#[derive(Debug, Parser)]
#[command(name = "oleach-sim", version)]
struct Cli {
    /// key=value config file; defaults are used when omitted
    config: Option<PathBuf>,
    /// Directory receiving <protocol>.csv and summary.txt
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Override the deployment/election seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the protocol: leach, oleach or compare
    #[arg(long)]
    protocol: Option<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load(cli: &Cli) -> Result<RunSpec, SimError> {
    let mut spec = match &cli.config {
        Some(path) => parse_config(&fs::read_to_string(path).map_err(io_err(path))?)?,
        None => RunSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.network.seed = seed;
    }
    if let Some(p) = &cli.protocol {
        apply_protocol(&mut spec, p).map_err(|reason| ConfigError::OutOfRange { field: "protocol", reason })?;
    }
    spec.output_dir = cli.out.clone();
    spec.validate()?;
    Ok(spec)
}

fn run(cli: &Cli) -> Result<String, SimError> {
    let spec = load(cli)?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let traces = run_simulation(&spec)?;
    for t in &traces {
        emit_csv(t, &dir.join(format!("{}.csv", t.protocol())))?;
    }
    let summary = emit_summary(&traces);
    let path = dir.join("summary.txt");
    fs::write(&path, &summary).map_err(io_err(&path))?;
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
