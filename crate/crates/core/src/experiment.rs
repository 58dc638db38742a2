//! End-to-end protocols: depolarization sweeps, the mitigation study and
//! structural-element estimates feeding the conductivity sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{transpile_cnot_to_ecr, AnsatzKind, Circuit};
use crate::engine::{depolarizing_from_fidelity, run_density, NoiseModel};
use crate::error::{invalid, Result};
use crate::hamiltonian::{exact_ground_energy, splitting_structural_element, MappedHamiltonian, PhononSystem};
use crate::mitigation::{mitigated_energy, MitigationPlan};
use crate::optimize::{OptimizerKind, OptimizerSpec};
use crate::thermo::{splitting_channel, StructureEstimate, StructureSource};
use crate::vqe::{self, EstimatorMode};

/// Default repetitions of the SU2-style ansatz.
pub const DEFAULT_REPS: usize = 2;

/// Shots per mitigated energy: 4096 per measurement basis of the toy model.
pub const STUDY_SHOTS: u64 = 4096 * 8;

/// Noiseless exact-mode VQE with the quasi-Newton optimiser.
pub fn noiseless_parameters(ansatz: &Circuit, h: &MappedHamiltonian, seed: u64) -> Result<Vec<f64>> {
    let spec = OptimizerSpec::new(OptimizerKind::LbfgsFiniteDifference).with_seed(seed);
    Ok(vqe::minimize(ansatz, h, &spec, EstimatorMode::Exact, None, None)?.best_parameters)
}

/// Exact physical energy of the ECR-native circuit under `noise`.
pub fn noisy_energy(ansatz: &Circuit, params: &[f64], h: &MappedHamiltonian, noise: &NoiseModel) -> Result<f64> {
    let circuit = transpile_cnot_to_ecr(&ansatz.bind(params)?)?;
    run_density(&circuit, noise)?.expectation(&h.physical)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fidelity: f64,
    /// Energy ratios to the reference, in percent.
    pub emin: f64,
    pub emax: f64,
    pub mean: f64,
}

/// For each seed, optimise noiselessly, then evaluate the physical energy at
/// every ECR fidelity. Ratios are `E_noisy / E_ref` in percent.
pub fn depolarization_sweep(
    ansatz: &Circuit,
    h: &MappedHamiltonian,
    fidelities: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(invalid("at least one seed is required"));
    }
    let noises: Vec<NoiseModel> = fidelities
        .iter()
        .map(|&f| {
            if !(f > 0.9 && f <= 1.0) {
                return Err(invalid(format!("fidelity {f} outside (0.9, 1]")));
            }
            NoiseModel::depolarizing(depolarizing_from_fidelity(f)?)
        })
        .collect::<Result<_>>()?;
    let reference = exact_ground_energy(h)?;
    let ratios: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let params = noiseless_parameters(ansatz, h, seed)?;
            noises
                .iter()
                .map(|n| Ok(100.0 * noisy_energy(ansatz, &params, h, n)? / reference))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(fidelities
        .iter()
        .enumerate()
        .map(|(i, &fidelity)| {
            let col: Vec<f64> = ratios.iter().map(|r| r[i]).collect();
            SweepRow {
                fidelity,
                emin: col.iter().copied().fold(f64::INFINITY, f64::min),
                emax: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean: col.iter().sum::<f64>() / col.len() as f64,
            }
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("fidelity,emin,emax,mean\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.fidelity, r.emin, r.emax, r.mean));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: String,
    /// Mitigated energy of every trial.
    pub energies: Vec<f64>,
    /// Mean reported standard error.
    pub reported_std: f64,
}

impl StrategyResult {
    pub fn mean(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.energies.len() as f64
    }

    /// Spread of the trial energies.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        let n = self.energies.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        (self.energies.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    pub fn errors(&self, reference: f64) -> Vec<f64> {
        self.energies.iter().map(|e| (e - reference).abs()).collect()
    }

    pub fn median_error(&self, reference: f64) -> f64 {
        median(&self.errors(reference))
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Repeat every strategy over `trials` seeds at fixed parameters.
pub fn mitigation_study(
    ansatz: &Circuit,
    params: &[f64],
    h: &MappedHamiltonian,
    noise: &NoiseModel,
    strategies: &[(String, MitigationPlan)],
    trials: usize,
    shots: u64,
    seed: u64,
) -> Result<Vec<StrategyResult>> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    strategies
        .iter()
        .map(|(name, plan)| {
            let runs: Vec<(f64, f64)> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let e = mitigated_energy(params, ansatz, &h.physical, noise, plan, shots, seed.wrapping_add(t))?;
                    Ok((e.mean, e.std_error()))
                })
                .collect::<Result<_>>()?;
            Ok(StrategyResult {
                strategy: name.clone(),
                energies: runs.iter().map(|r| r.0).collect(),
                reported_std: runs.iter().map(|r| r.1).sum::<f64>() / trials as f64,
            })
        })
        .collect()
}

pub fn study_csv(results: &[StrategyResult], reference: f64) -> String {
    let mut out = String::from("strategy,mean,std,relative_error\n");
    for r in results {
        let rel = ((r.mean() - reference) / reference).abs();
        out.push_str(&format!("{},{},{},{}\n", r.strategy, r.mean(), r.std(), rel));
    }
    out
}

/// Settings for the stochastic structural-element sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSettings {
    pub ansatz: AnsatzKind,
    pub reps: usize,
    pub noise: NoiseModel,
    pub plan: MitigationPlan,
    pub repeats: usize,
    pub shots: u64,
    pub seed: u64,
}

impl Default for StructureSettings {
    fn default() -> Self {
        Self {
            ansatz: AnsatzKind::Custom,
            reps: DEFAULT_REPS,
            noise: NoiseModel::ibm_brisbane(),
            plan: MitigationPlan::all(),
            repeats: 8,
            shots: STUDY_SHOTS,
            seed: 0,
        }
    }
}

/// Squared structural element of the splitting channel.
///
/// With one splitting channel and two levels per mode, `H3` couples a
/// single pair of Fock states, so its ground energy is minus the element's
/// magnitude; VQE sources estimate it as the square of the ground energy.
pub fn structure_estimate(
    source: StructureSource,
    system: &PhononSystem,
    h: &MappedHamiltonian,
    settings: &StructureSettings,
) -> Result<StructureEstimate> {
    if source == StructureSource::Exact {
        let (decaying, products) = splitting_channel(system)?;
        return Ok(StructureEstimate::exact(splitting_structural_element(
            system,
            h.layout.levels_per_phonon(),
            decaying,
            products,
        )?));
    }
    let ansatz = settings.ansatz.build(h.width(), settings.reps)?;
    let params = noiseless_parameters(&ansatz, h, settings.seed)?;
    let energies: Vec<f64> = match source {
        StructureSource::VqeNoiseless => vec![vqe::energy(&params, &ansatz, h, EstimatorMode::Exact, None, 0)?],
        _ => {
            let plan = if source == StructureSource::VqeMitigated {
                settings.plan.clone()
            } else {
                MitigationPlan::none()
            };
            if settings.repeats == 0 {
                return Err(invalid("at least one repeat is required"));
            }
            (0..settings.repeats as u64)
                .into_par_iter()
                .map(|r| {
                    let seed = settings.seed.wrapping_add(r);
                    Ok(mitigated_energy(&params, &ansatz, &h.physical, &settings.noise, &plan, settings.shots, seed)?.mean)
                })
                .collect::<Result<_>>()?
        }
    };
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let spread = if n > 1.0 {
        (energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(StructureEstimate {
        source,
        value: mean * mean,
        // first-order propagation through the square
        std: 2.0 * mean.abs() * spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::toy_hamiltonian;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn perfect_fidelity_gives_full_ratio() {
        let h = toy_hamiltonian();
        let c = AnsatzKind::Custom.build(6, DEFAULT_REPS).unwrap();
        let rows = depolarization_sweep(&c, &h, &[1.0, 0.99], &[0]).unwrap();
        assert!((rows[0].mean - 100.0).abs() < 1e-4);
        assert!(rows[1].mean < 95.0 && rows[1].mean > 50.0);
        assert!(depolarization_sweep(&c, &h, &[0.5], &[0]).is_err());
        assert!(sweep_csv(&rows).starts_with("fidelity,emin,emax,mean\n1,"));
    }

    #[test]
    fn exact_and_noiseless_structures_agree() {
        let sys = PhononSystem::toy_model();
        let h = toy_hamiltonian();
        let s = StructureSettings::default();
        let exact = structure_estimate(StructureSource::Exact, &sys, &h, &s).unwrap();
        let vqe = structure_estimate(StructureSource::VqeNoiseless, &sys, &h, &s).unwrap();
        assert!((exact.value - 4.0).abs() < 1e-9);
        assert!((vqe.value - exact.value).abs() / exact.value < 1e-3);
    }

    #[test]
    fn study_report_shape() {
        let h = toy_hamiltonian();
        let c = AnsatzKind::Custom.build(6, DEFAULT_REPS).unwrap();
        let params = noiseless_parameters(&c, &h, 0).unwrap();
        let plans = vec![("none".to_string(), MitigationPlan::none())];
        let r = mitigation_study(&c, &params, &h, &NoiseModel::ideal(), &plans, 3, 4096, 1).unwrap();
        assert_eq!(r[0].energies.len(), 3);
        assert!(r[0].median_error(-2.0) < 0.1);
        let csv = study_csv(&r, -2.0);
        assert_eq!(csv.lines().count(), 2);
    }
}
