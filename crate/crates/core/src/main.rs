use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cavity_reservoir::cli;
use cavity_reservoir::metrics::GridSpec;
use cavity_reservoir::scenario::{self, ScenarioConfig};
use cavity_reservoir::{Error, Result};

/// Engineered atomic reservoir for non-classical cavity fields.
#[derive(Parser)]
#[command(name = "cavity-reservoir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Scenario file (`section.key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in parameter set: cat2, cat3, squeeze or banana.
    #[arg(long)]
    preset: Option<String>,
    /// Extra `key=value` assignment, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disable cavity damping.
    #[arg(long)]
    no_loss: bool,
    /// Draw atoms at random with this seed instead of ensemble averaging.
    #[arg(long)]
    seed: Option<u64>,
    /// Transit propagator: numeric or analytic.
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write metrics, Wigner function, state and summary.
    Run(ScenarioArgs),
    /// Run one trajectory per value of a parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Key to vary, e.g. `profile.delta`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Wigner function of a saved density matrix.
    Wigner {
        /// File written as `state_final.txt` by `run`.
        #[arg(long)]
        state: PathBuf,
        /// `XMIN:XMAX:STEP`.
        #[arg(long, default_value = "-3.5:3.5:0.07", allow_hyphen_values = true)]
        grid: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &ScenarioArgs) -> Result<(ScenarioConfig, Vec<(String, String)>)> {
    let base = args
        .preset
        .as_deref()
        .map(ScenarioConfig::preset)
        .transpose()?;
    let cfg = match (&args.config, base) {
        (Some(path), base) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            ScenarioConfig::parse(&text, base)?
        }
        (None, Some(base)) => base,
        (None, None) => {
            return Err(Error::Config(
                "either --config or --preset is required".into(),
            ))
        }
    };
    let mut overrides = args
        .set
        .iter()
        .map(|s| scenario::parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if args.no_loss {
        overrides.push(("cavity.loss".into(), "off".into()));
    }
    if let Some(seed) = args.seed {
        overrides.push(("reservoir.seed".into(), seed.to_string()));
    }
    if let Some(b) = &args.backend {
        overrides.push(("reservoir.backend".into(), b.clone()));
    }
    if let Some(out) = &args.out {
        overrides.push(("output.dir".into(), out.display().to_string()));
    }
    Ok((cfg, overrides))
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, overrides) = load(&args)?;
            let report = cli::run(&cfg, &overrides)?;
            print!(
                "{}",
                report
                    .summary_text()
                    .split("\n[config]")
                    .next()
                    .unwrap_or_default()
            );
        }
        Command::Sweep {
            scenario,
            param,
            values,
        } => {
            let (cfg, overrides) = load(&scenario)?;
            let values: Vec<String> = values
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                return Err(Error::Config("--values is empty".into()));
            }
            let rows = cli::sweep(&cfg, &overrides, &param, &values)?;
            print!("{}", cli::sweep_csv(&param, &rows));
        }
        Command::Wigner { state, grid, out } => {
            let grid = GridSpec::parse(&grid)?;
            let w = cli::wigner_of_file(&state, &grid)?;
            match out {
                Some(path) => cli::write_atomic(&path, &w.to_text())?,
                None => print!("{}", w.to_text()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
