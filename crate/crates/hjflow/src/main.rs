use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hjflow::config::{parse_config, ExperimentKind, ExperimentManifest};
use hjflow::experiment::{run_experiment, verify_directory};

/// Batch solver and verification harness for gradient-driven Neumann heat
/// flows. Experiments are described by flat `key = value` config files; all
/// outputs are UTF-8 text.
#[derive(Parser)]
#[command(name = "hjflow", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute the experiment described by a config file.
    Run { config: PathBuf },
    /// Execute an initial-datum amplitude sweep (kind sweep-kappa).
    Sweep { config: PathBuf },
    /// Report the second Neumann eigenvalue of the configured grid.
    Eig { config: PathBuf },
    /// Report empirical semigroup estimate constants.
    Semigroup { config: PathBuf },
    /// Recheck the invariants of a saved run directory.
    Verify { dir: PathBuf },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(config: &PathBuf, expect: Option<ExperimentKind>) -> hjflow::Result<ExperimentManifest> {
    let text = std::fs::read_to_string(config)?;
    let manifest = parse_config(&text)?;
    if let Some(kind) = expect {
        if manifest.kind != kind {
            return Err(hjflow::Error::InvalidParam(format!(
                "this subcommand needs experiment = {}, config says {}",
                kind.as_str(),
                manifest.kind.as_str()
            )));
        }
    }
    Ok(manifest)
}

fn dispatch() -> hjflow::Result<bool> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config } => {
            let manifest = load(&config, None)?;
            let outcome = run_experiment(&manifest)?;
            for row in &outcome.summary {
                println!(
                    "{}: status={} rate={:.6e} c={:.6e} prefactor={:.6e}",
                    row.run_id, row.status, row.rate, row.c, row.prefactor
                );
            }
            println!(
                "artifacts in {} ({})",
                outcome.output_dir.display(),
                if outcome.all_pass {
                    "all verdicts pass"
                } else {
                    "FAILED verdicts"
                }
            );
            Ok(outcome.all_pass)
        }
        Cmd::Sweep { config } => {
            let manifest = load(&config, Some(ExperimentKind::SweepKappa))?;
            let outcome = run_experiment(&manifest)?;
            for row in &outcome.summary {
                println!(
                    "{}: status={} prefactor={:.6e}",
                    row.run_id, row.status, row.prefactor
                );
            }
            Ok(outcome.all_pass)
        }
        Cmd::Eig { config } => {
            let manifest = load(&config, Some(ExperimentKind::Eig))?;
            let outcome = run_experiment(&manifest)?;
            if let Some(line) = &outcome.eig {
                println!("{}", line.render());
            }
            Ok(outcome.all_pass)
        }
        Cmd::Semigroup { config } => {
            let manifest = load(&config, Some(ExperimentKind::Semigroup))?;
            let outcome = run_experiment(&manifest)?;
            println!(
                "semigroup report in {} ({})",
                outcome.output_dir.display(),
                if outcome.all_pass { "pass" } else { "FAIL" }
            );
            Ok(outcome.all_pass)
        }
        Cmd::Verify { dir } => verify_directory(&dir),
    }
}
