//! Run configuration read from TOML. Every section has defaults that
//! reproduce the three-phonon toy study.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use phonon_qsim::circuits::AnsatzKind;
use phonon_qsim::engine::NoiseModel;
use phonon_qsim::experiment::{DEFAULT_REPS, STUDY_SHOTS};
use phonon_qsim::hamiltonian::{build_effective, default_penalty_weight, map_hamiltonian, MappedHamiltonian, PhononSystem};
use phonon_qsim::mitigation::MitigationPlan;
use phonon_qsim::optimize::{OptimizerKind, OptimizerSpec};
use phonon_qsim::thermo::{reference_temperatures, StructureSource, DEFAULT_VELOCITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Left out of the manifest so identical runs hash identically.
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "MitigationPlan::all")]
    pub mitigation: MitigationPlan,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub thermal: ThermalSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: default_out(),
            system: SystemConfig::default(),
            ansatz: AnsatzConfig::default(),
            optimizer: OptimizerConfig::default(),
            noise: NoiseConfig::default(),
            mitigation: MitigationPlan::all(),
            sweep: SweepConfig::default(),
            study: StudyConfig::default(),
            thermal: ThermalSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling3 {
    pub modes: [usize; 3],
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling4 {
    pub modes: [usize; 4],
    pub phi: f64,
}

/// Phonon modes, force constants and the qubit encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub frequencies: Vec<f64>,
    /// Overall normalisation `G` of the couplings.
    #[serde(default = "one")]
    pub normalizer: f64,
    #[serde(default = "two")]
    pub levels: usize,
    /// Leakage penalty; ten times the coupling one-norm when absent.
    #[serde(default)]
    pub penalty_weight: Option<f64>,
    #[serde(default)]
    pub cubic: Vec<Coupling3>,
    #[serde(default)]
    pub quartic: Vec<Coupling4>,
}

fn one() -> f64 {
    1.0
}
fn two() -> usize {
    2
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            frequencies: vec![1.0, 0.5, 0.5],
            normalizer: 1.0,
            levels: 2,
            penalty_weight: None,
            cubic: vec![Coupling3 { modes: [0, 1, 2], phi: 1.0 }],
            quartic: Vec::new(),
        }
    }
}

impl SystemConfig {
    pub fn system(&self) -> Result<PhononSystem> {
        let phi3: Vec<_> = self.cubic.iter().map(|c| (c.modes, c.phi)).collect();
        let phi4: Vec<_> = self.quartic.iter().map(|c| (c.modes, c.phi)).collect();
        Ok(PhononSystem::from_force_constants(self.frequencies.clone(), self.normalizer, &phi3, &phi4)?)
    }

    pub fn hamiltonian(&self) -> Result<MappedHamiltonian> {
        let sys = self.system()?;
        let layout = sys.layout(self.levels)?;
        let terms = build_effective(&sys);
        let weight = match self.penalty_weight {
            Some(w) => w,
            None => default_penalty_weight(&map_hamiltonian(&terms, &layout, 0.0)?.physical),
        };
        Ok(map_hamiltonian(&terms, &layout, weight)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    #[serde(default = "default_ansatz")]
    pub kind: AnsatzKind,
    #[serde(default = "default_reps")]
    pub reps: usize,
}

fn default_ansatz() -> AnsatzKind {
    AnsatzKind::Custom
}
fn default_reps() -> usize {
    DEFAULT_REPS
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self {
            kind: default_ansatz(),
            reps: default_reps(),
        }
    }
}

/// Optimisers compared by `vqe`; unset tolerances keep the library defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "all_optimizers")]
    pub kinds: Vec<OptimizerKind>,
    #[serde(default)]
    pub max_evaluations: Option<usize>,
    #[serde(default)]
    pub ftol: Option<f64>,
    #[serde(default)]
    pub xtol: Option<f64>,
    #[serde(default)]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub patience: Option<usize>,
    /// Shots per energy estimate; exact expectations when absent.
    #[serde(default)]
    pub shots: Option<u64>,
    /// Optimise under the configured noise model.
    #[serde(default)]
    pub noisy: bool,
}

fn all_optimizers() -> Vec<OptimizerKind> {
    OptimizerKind::ALL.to_vec()
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kinds: all_optimizers(),
            max_evaluations: None,
            ftol: None,
            xtol: None,
            fd_step: None,
            patience: None,
            shots: None,
            noisy: false,
        }
    }
}

impl OptimizerConfig {
    pub fn spec(&self, kind: OptimizerKind, seed: u64) -> Result<OptimizerSpec> {
        let mut s = OptimizerSpec::new(kind).with_seed(seed);
        if let Some(v) = self.max_evaluations {
            s.max_evaluations = v;
        }
        if let Some(v) = self.ftol {
            s.ftol = v;
        }
        if let Some(v) = self.xtol {
            s.xtol = v;
        }
        if let Some(v) = self.fd_step {
            s.fd_step = v;
        }
        if let Some(v) = self.patience {
            s.patience = v;
        }
        s.validate()?;
        Ok(s)
    }
}

/// A named preset or an explicit model, not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub model: Option<NoiseModel>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            preset: Some("ibm_brisbane".into()),
            model: None,
        }
    }
}

impl NoiseConfig {
    pub fn model(&self) -> Result<NoiseModel> {
        let m = match (&self.preset, &self.model) {
            (Some(_), Some(_)) => bail!("noise: give either a preset or a model, not both"),
            (Some(name), None) => NoiseModel::preset(name)?,
            (None, Some(m)) => m.clone(),
            (None, None) => NoiseModel::ideal(),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_fidelities")]
    pub fidelities: Vec<f64>,
    /// Seeded optimisations averaged per fidelity.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_fidelities() -> Vec<f64> {
    vec![1.0, 0.999, 0.99, 0.98]
}
fn default_repeats() -> usize {
    5
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fidelities: default_fidelities(),
            repeats: default_repeats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Shots per mitigated energy, shared by all circuit variants.
    #[serde(default = "default_shots")]
    pub shots: u64,
}

fn default_trials() -> usize {
    50
}
fn default_shots() -> u64 {
    STUDY_SHOTS
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            shots: default_shots(),
        }
    }
}

/// Conductivity sweep. The frequency scale and the normalisation are fitted
/// to the reference point unless given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    #[serde(default = "reference_temperatures")]
    pub temperatures: Vec<f64>,
    #[serde(default = "default_velocity")]
    pub group_velocity: f64,
    #[serde(default = "one")]
    pub volume: f64,
    #[serde(default)]
    pub frequency_scale: Option<f64>,
    #[serde(default)]
    pub kappa_normalization: Option<f64>,
    #[serde(default = "all_sources")]
    pub sources: Vec<StructureSource>,
    /// Mitigated or unmitigated energies averaged per source.
    #[serde(default = "default_structure_repeats")]
    pub repeats: usize,
}

fn default_velocity() -> f64 {
    DEFAULT_VELOCITY
}
fn all_sources() -> Vec<StructureSource> {
    StructureSource::ALL.to_vec()
}
fn default_structure_repeats() -> usize {
    8
}

impl Default for ThermalSection {
    fn default() -> Self {
        Self {
            temperatures: reference_temperatures(),
            group_velocity: DEFAULT_VELOCITY,
            volume: 1.0,
            frequency_scale: None,
            kappa_normalization: None,
            sources: all_sources(),
            repeats: default_structure_repeats(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no simulation.
    pub fn validate(&self) -> Result<()> {
        self.system.hamiltonian()?;
        self.ansatz.kind.build(self.system.frequencies.len() * self.system.levels, self.ansatz.reps)?;
        if self.optimizer.kinds.is_empty() {
            bail!("optimizer.kinds is empty");
        }
        for &k in &self.optimizer.kinds {
            self.optimizer.spec(k, self.seed)?;
        }
        self.noise.model()?;
        self.mitigation.validate()?;
        if self.sweep.fidelities.iter().any(|&f| !(f > 0.9 && f <= 1.0)) {
            bail!("sweep fidelities must lie in (0.9, 1]");
        }
        if self.sweep.repeats == 0 || self.study.trials == 0 || self.thermal.repeats == 0 {
            bail!("repeat and trial counts must be positive");
        }
        if self.study.shots == 0 || self.optimizer.shots == Some(0) {
            bail!("shot counts must be positive");
        }
        if self.thermal.temperatures.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            bail!("temperatures must be positive");
        }
        if self.thermal.sources.is_empty() {
            bail!("thermal.sources is empty");
        }
        Ok(())
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}
