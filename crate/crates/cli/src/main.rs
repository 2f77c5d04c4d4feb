use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nanofiber_trap_cli::{load, run, CliError, Command};

#[derive(Parser)]
#[command(name = "nftrap", version, about = "Nanofiber two-color trap: modes, trap characterization, spectroscopy fits")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment description (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for result.json and CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Start from the built-in reference parameter set; --config overrides it.
    #[arg(long)]
    paper_defaults: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Guided-mode summaries for the trap and probe wavelengths.
    Mode(Common),
    /// Trap minimum, frequencies, depth and derived rates.
    Characterize(Common),
    /// Potential on a grid plus equipotential masks.
    Grid {
        #[command(flatten)]
        common: Common,
        /// Level offsets in uK above the minimum (replaces grids.offsets_uK).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        offsets_uk: Option<Vec<f64>>,
    },
    /// Fit a transmission spectrum (detuning_MHz,transmission[,sigma]).
    FitSpectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Fit absorbed vs incident probe power (p_in_W,p_abs_W).
    FitSaturation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<PathBuf, CliError> {
    let (common, command, offsets) = match cli.command {
        Cmd::Mode(c) => (c, Command::Mode, None),
        Cmd::Characterize(c) => (c, Command::Characterize, None),
        Cmd::Grid { common, offsets_uk } => (common, Command::Grid, offsets_uk),
        Cmd::FitSpectrum { common, data } => (common, Command::FitSpectrum { data }, None),
        Cmd::FitSaturation { common, data } => (common, Command::FitSaturation { data }, None),
    };
    let mut loaded = load(common.config.as_deref(), common.paper_defaults)?;
    if let Some(o) = offsets {
        loaded.config.grids.offsets_uk = o;
        loaded.config.validate()?;
    }
    run(&command, &loaded, &common.out)?;
    Ok(common.out.join(nanofiber_trap_cli::result::RESULT_FILE))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nftrap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
