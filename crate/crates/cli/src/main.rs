use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nvberry_cli::config::{load_table, set_value, Command};
use nvberry_cli::output::{write_csv, write_json};
use nvberry_cli::{run, CliError, RunConfig};

/// Geometric-phase simulator for an NV spin in a rotating diamond.
///
/// Angles are in radians, angular speeds in rad/s, times in seconds.
#[derive(Debug, Parser)]
#[command(name = "nvberry", version)]
struct Args {
    /// berry, ramsey, echo, sensitivity or sweep
    command: Command,
    /// TOML file with [geometry], [decoherence], [readout], [numeric],
    /// [sensitivity] and [sweep] sections
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, as section.key=value or key=value
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write records here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    /// One JSON object per line instead of CSV
    #[arg(long)]
    json: bool,
    /// Readout RNG seed (overrides readout.seed)
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = args
        .config
        .as_ref()
        .map(|p| std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display()))))
        .transpose()?;
    let mut table = load_table(text.as_deref(), &args.set)?;
    if let Some(seed) = args.seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::Config("--seed must be < 2^63".into()))?;
        set_value(&mut table, "readout.seed", toml::Value::Integer(seed))?;
    }
    let cfg = RunConfig::from_table(args.command, table)?;
    let records = run(&cfg)?;
    match &args.out {
        Some(path) => {
            let file =
                File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            let w = BufWriter::new(file);
            if args.json {
                write_json(&records, w)
            } else {
                write_csv(&records, w)
            }
        }
        None => {
            let w = io::stdout().lock();
            if args.json {
                write_json(&records, w)
            } else {
                write_csv(&records, w)
            }
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvberry {}: {e}", args.command);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
