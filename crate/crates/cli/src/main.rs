use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use floqsim::experiments::{self, ExperimentConfig};
use floqsim::{Error, Experiment};
use serde_json::json;

#[derive(Parser)]
#[command(name = "floqsim", version, about = "Driven waveguide-array experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Quasi-energy sweep over omega/Delta.
    Spectrum(Io),
    /// Single propagation run with channel fidelity.
    Propagate(Io),
    /// Gauge {0, pi} x input {1, 2} grid.
    Gauge(Io),
    /// Edge-mode splitting and fidelity per chain length.
    FiniteSize(Io),
    /// Effective Hamiltonian, regime diagnosis and size-decay fit.
    Eliminate(Io),
    /// Propagation rendered as an intensity map.
    Render(Io),
}

#[derive(Args)]
struct Io {
    /// Experiment JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

fn load(path: &Path) -> Result<Experiment, Error> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}

fn run(verb: Verb) -> Result<String, Error> {
    match verb {
        Verb::Spectrum(io) => {
            let outcome = experiments::run_sweep_experiment(&load(&io.config)?)?;
            outcome.write(&io.out)?;
            Ok(match outcome.window {
                Some((lo, hi)) => format!("pi-mode window: omega/Delta in [{lo:.4}, {hi:.4}]"),
                None => "no pi-mode window on this grid".into(),
            })
        }
        Verb::Propagate(io) => {
            let outcome = experiments::run_propagation_experiment(&load(&io.config)?)?;
            outcome.write(&io.out)?;
            let r = &outcome.report;
            Ok(format!(
                "leakage {:.4}, transfer {:.4}, eliminated {}",
                r.max_inner_leakage, r.outer_transfer_peak, r.eliminated
            ))
        }
        Verb::Gauge(io) => {
            let outcome = experiments::run_gauge_experiment(&load(&io.config)?)?;
            outcome.write(&io.out)?;
            Ok(format!("eliminated flags {:?}, matches expected {}", outcome.flags(), outcome.matches_expected()))
        }
        Verb::FiniteSize(io) => {
            let outcome = experiments::run_finite_size_experiment(&load(&io.config)?)?;
            outcome.write(&io.out)?;
            Ok(format!("{} sizes written", outcome.rows.len()))
        }
        Verb::Eliminate(io) => {
            let outcome = experiments::run_elimination_experiment(&load(&io.config)?)?;
            outcome.write(&io.out)?;
            Ok(format!(
                "regime {}, adiabatic ratio {:.4}, ||H_eff|| {:.6e}",
                outcome.regime.as_str(),
                outcome.adiabatic_ratio,
                outcome.effective.norm()
            ))
        }
        Verb::Render(io) => {
            let outcome = experiments::run_propagation_experiment(&load(&io.config)?)?;
            fs::create_dir_all(&io.out)?;
            let sampled = outcome.sampled();
            experiments::render_intensity_map(&sampled, &io.out.join("intensity.ppm"))?;
            experiments::render_intensity_map(&sampled, &io.out.join("intensity.svg"))?;
            let mut summary = outcome.summary();
            summary["verb"] = json!("render");
            summary["images"] = json!(["intensity.ppm", "intensity.svg"]);
            summary["columns"] = json!(sampled.len());
            let mut text = serde_json::to_string_pretty(&summary)?;
            text.push('\n');
            fs::write(io.out.join("summary.json"), text)?;
            Ok(format!("{} columns rendered", sampled.len()))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    if err.is_validation() {
        2
    } else if matches!(err, Error::Io(_)) {
        1
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.verb) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
