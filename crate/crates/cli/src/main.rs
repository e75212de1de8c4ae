mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::bp::{Action, Coefficients};
use config::{Overrides, RunConfig, CONFIG_ENV};
use report::{write_json, SubjectError};

/// Phonocardiogram analysis: heart rate, blood pressure and signal quality.
#[derive(Parser)]
#[command(name = "pcgkit", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Frame length in seconds.
    #[arg(long, global = true)]
    frames: Option<f64>,
    #[arg(long, global = true, value_parser = ["hilbert", "shannon", "wes"])]
    method: Option<String>,
    #[arg(long, global = true, value_parser = ["eq7", "cycle"])]
    formula: Option<String>,
    #[arg(long, global = true, value_parser = ["s", "ms"])]
    units: Option<String>,
    #[arg(long, global = true, value_parser = ["morlet", "morse", "bump"])]
    wavelet: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Frame-wise heart rate for every subject, with ECG agreement.
    Hr { dataset: PathBuf },
    /// Blood-pressure model.
    Bp {
        #[command(subcommand)]
        action: BpCommand,
    },
    /// Frequency band, NRMSE and SNR per subject.
    Quality {
        dataset: PathBuf,
        /// Also write a spectrogram and MFCCs of each subject's first frame.
        #[arg(long)]
        spectra: bool,
    },
    /// Write a synthetic cohort to the output directory.
    Synth {
        /// TOML cohort spec; defaults are used when omitted.
        spec: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Subcommand)]
enum BpCommand {
    /// Fit coefficients on subjects with reference pressures.
    Fit { dataset: PathBuf },
    /// Predict with a coefficient file or the built-in reference set.
    Predict {
        dataset: PathBuf,
        #[arg(long, conflicts_with = "reference", required_unless_present = "reference")]
        coefficients: Option<PathBuf>,
        #[arg(long)]
        reference: bool,
    },
    /// Leave-one-subject-out validation.
    Loocv { dataset: PathBuf },
}

fn effective_config(g: &Global) -> Result<RunConfig, String> {
    let cfg = RunConfig::load(g.config.as_deref())?.apply(&Overrides {
        frame_len_s: g.frames,
        envelope: g.method.clone(),
        formula: g.formula.clone(),
        wavelet: g.wavelet.clone(),
        units: g.units.clone(),
        out: g.out.clone(),
    });
    cfg.validate()?;
    Ok(cfg)
}

fn finish(cfg: &RunConfig, errors: &[SubjectError]) -> ExitCode {
    if errors.is_empty() {
        return ExitCode::SUCCESS;
    }
    for e in errors {
        eprintln!("{}: {}", e.subject_id, e.error);
    }
    if let Err(e) = write_json(&cfg.out.join("errors.json"), &errors) {
        eprintln!("error: {e}");
    }
    ExitCode::from(1)
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let cfg = effective_config(&cli.global)?;
    let outcome = match cli.command {
        Command::Config => {
            print!("{}", toml::to_string(&cfg).map_err(|e| e.to_string())?);
            return Ok(ExitCode::SUCCESS);
        }
        Command::Synth { spec } => {
            let spec = commands::synth::CohortSpec::load(spec.as_deref())?;
            commands::synth::run(&spec, &cfg.out)?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Hr { dataset } => commands::hr::run(&dataset, &cfg)?,
        Command::Quality { dataset, spectra } => commands::quality::run(&dataset, &cfg, spectra)?,
        Command::Bp { action } => {
            let (dataset, action) = match action {
                BpCommand::Fit { dataset } => (dataset, Action::Fit),
                BpCommand::Loocv { dataset } => (dataset, Action::Loocv),
                BpCommand::Predict {
                    dataset,
                    coefficients,
                    ..
                } => (
                    dataset,
                    Action::Predict(coefficients.map_or(Coefficients::Reference, Coefficients::File)),
                ),
            };
            commands::bp::run(&dataset, &action, &cfg)?
        }
    };
    Ok(finish(&cfg, &outcome.errors))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
