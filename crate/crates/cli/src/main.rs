mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use phonon_qsim::circuits::AnsatzKind;
use phonon_qsim::optimize::OptimizerKind;
use phonon_qsim::thermo::StructureSource;

use crate::config::{NoiseConfig, RunConfig};

#[derive(Parser)]
#[command(name = "phonon-qsim", version, about = "Variational simulation of phonon scattering and thermal conductivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Write the qubit Hamiltonian and a validity report.
    Hamiltonian,
    /// Compare optimisers on the ground-state problem.
    Vqe,
    /// Energy ratios under depolarizing two-qubit noise.
    NoiseSweep {
        /// Two-qubit gate fidelities, comma separated.
        #[arg(long, value_delimiter = ',')]
        fidelity: Vec<f64>,
    },
    /// Repeated trials of every error-mitigation strategy.
    Mitigate,
    /// Thermal conductivity sweep over temperature.
    Kappa,
}

#[derive(Args)]
struct Overrides {
    /// TOML run configuration; defaults reproduce the toy study.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Structural-element sources for `kappa`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    source: Vec<StructureSource>,
    #[arg(long, global = true)]
    ansatz: Option<AnsatzKind>,
    /// Optimisers for `vqe`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    optimizer: Vec<OptimizerKind>,
    #[arg(long, global = true)]
    noise_preset: Option<String>,
    /// Shots per energy estimate.
    #[arg(long, global = true)]
    shots: Option<u64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig, command: &Command) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if !self.source.is_empty() {
            cfg.thermal.sources = self.source.clone();
        }
        if let Some(a) = self.ansatz {
            cfg.ansatz.kind = a;
        }
        if !self.optimizer.is_empty() {
            cfg.optimizer.kinds = self.optimizer.clone();
        }
        if let Some(p) = &self.noise_preset {
            cfg.noise = NoiseConfig {
                preset: Some(p.clone()),
                model: None,
            };
        }
        if let Some(n) = self.shots {
            match command {
                Command::Vqe => cfg.optimizer.shots = Some(n),
                _ => cfg.study.shots = n,
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg, &cli.command);
    cfg.validate()?;
    let (name, outputs) = match &cli.command {
        Command::Hamiltonian => ("hamiltonian", commands::hamiltonian(&cfg)?),
        Command::Vqe => ("vqe", commands::vqe(&cfg)?),
        Command::NoiseSweep { fidelity } => {
            let grid = if fidelity.is_empty() { cfg.sweep.fidelities.clone() } else { fidelity.clone() };
            // one ansatz when asked for explicitly, otherwise both
            let kinds = match cli.overrides.ansatz {
                Some(k) => vec![k],
                None => vec![AnsatzKind::EfficientSu2, AnsatzKind::Custom],
            };
            ("noise-sweep", commands::noise_sweep(&cfg, &grid, &kinds)?)
        }
        Command::Mitigate => ("mitigate", commands::mitigate(&cfg)?),
        Command::Kappa => ("kappa", commands::kappa(&cfg)?),
    };
    for line in &outputs.summary {
        println!("{line}");
    }
    let written = output::write(&cfg, name, &outputs)?;
    println!("wrote {} files to {}", written, cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
