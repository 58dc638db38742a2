//! Variational minimisation of a mapped Hamiltonian over ansatz parameters.

use std::cell::Cell;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::{transpile_cnot_to_ecr, Circuit};
use crate::engine::{estimate_by_sampling, simulate, NoiseModel};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::MappedHamiltonian;
use crate::optimize::{self, OptimizerSpec};
use crate::pauli::PauliSum;

/// Default shots per energy evaluation in shot mode.
pub const DEFAULT_SHOTS: u64 = 4096;

/// How an energy is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMode {
    Exact,
    Shots(u64),
}

/// Starting point for the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Initialization {
    /// Uniform in `[−π, π]`.
    Uniform,
    /// Uniform in `[−scale, scale]`.
    NearZero(f64),
}

pub fn initial_parameters(n: usize, init: Initialization, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = match init {
        Initialization::Uniform => PI,
        Initialization::NearZero(s) => s.abs(),
    };
    (0..n)
        .map(|_| if half > 0.0 { rng.gen_range(-half..half) } else { 0.0 })
        .collect()
}

/// Prepares the ansatz state and measures an observable.
#[derive(Debug, Clone)]
pub struct EnergyEstimator<'a> {
    pub ansatz: &'a Circuit,
    pub observable: &'a PauliSum,
    pub mode: EstimatorMode,
    pub noise: NoiseModel,
    pub seed: u64,
    calls: Cell<u64>,
}

impl<'a> EnergyEstimator<'a> {
    pub fn new(ansatz: &'a Circuit, observable: &'a PauliSum, mode: EstimatorMode, noise: NoiseModel, seed: u64) -> Result<Self> {
        if observable.width() != ansatz.width() {
            return Err(Error::WidthMismatch {
                left: ansatz.width(),
                right: observable.width(),
            });
        }
        observable.ensure_hermitian()?;
        noise.validate()?;
        Ok(Self {
            ansatz,
            observable,
            mode,
            noise,
            seed,
            calls: Cell::new(0),
        })
    }

    /// Energy at `params`. Noisy runs use the ECR-native circuit.
    pub fn energy(&self, params: &[f64]) -> Result<f64> {
        let bound = self.ansatz.bind(params)?;
        let circuit = if self.noise.has_gate_noise() {
            transpile_cnot_to_ecr(&bound)?
        } else {
            bound
        };
        let state = simulate(&circuit, &self.noise)?;
        match self.mode {
            EstimatorMode::Exact => state.expectation(self.observable),
            EstimatorMode::Shots(shots) => {
                let call = self.calls.get();
                self.calls.set(call + 1);
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(call);
                let readout = self.noise.readout_for_width(circuit.width())?;
                let readout = if readout.iter().all(|r| r.is_ideal()) { Vec::new() } else { readout };
                Ok(estimate_by_sampling(&state, self.observable, shots, &readout, &mut rng)?.mean)
            }
        }
    }
}

/// Convenience wrapper for a single energy evaluation.
pub fn energy(
    params: &[f64],
    ansatz: &Circuit,
    h: &MappedHamiltonian,
    mode: EstimatorMode,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<f64> {
    let noise = noise.cloned().unwrap_or_default();
    EnergyEstimator::new(ansatz, &h.pauli, mode, noise, seed)?.energy(params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeRun {
    pub best_parameters: Vec<f64>,
    pub best_energy: f64,
    /// `(evaluation, energy)` for every objective call.
    pub history: Vec<(usize, f64)>,
    pub mode: EstimatorMode,
    pub converged: bool,
}

/// Run the optimiser from `initial`, or from a seeded uniform draw.
pub fn minimize(
    ansatz: &Circuit,
    h: &MappedHamiltonian,
    optimizer: &OptimizerSpec,
    mode: EstimatorMode,
    noise: Option<&NoiseModel>,
    initial: Option<&[f64]>,
) -> Result<VqeRun> {
    let x0 = match initial {
        Some(x) => {
            if x.len() != ansatz.n_parameters() {
                return Err(Error::ParameterCount {
                    expected: ansatz.n_parameters(),
                    actual: x.len(),
                });
            }
            x.to_vec()
        }
        None => initial_parameters(ansatz.n_parameters(), Initialization::Uniform, optimizer.seed),
    };
    let est = EnergyEstimator::new(
        ansatz,
        &h.pauli,
        mode,
        noise.cloned().unwrap_or_default(),
        optimizer.seed,
    )?;
    let mut f = |x: &[f64]| est.energy(x);
    let m = optimize::minimize(&mut f, &x0, optimizer)?;
    Ok(VqeRun {
        best_parameters: m.x,
        best_energy: m.value,
        history: m.history,
        mode,
        converged: m.converged,
    })
}

/// Summary of a run's convergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `(threshold, first evaluation within it)`.
    pub iterations_to_tolerance: Vec<(f64, Option<usize>)>,
    pub final_gap: f64,
    /// Running minimum of the history.
    pub envelope: Vec<(usize, f64)>,
}

pub const REPORT_THRESHOLDS: [f64; 2] = [1e-3, 1e-6];

pub fn convergence_report(run: &VqeRun, reference: f64) -> Result<ConvergenceReport> {
    if run.history.is_empty() {
        return Err(invalid("empty history"));
    }
    let mut best = f64::INFINITY;
    let envelope: Vec<(usize, f64)> = run
        .history
        .iter()
        .map(|&(i, e)| {
            best = best.min(e);
            (i, best)
        })
        .collect();
    let iterations_to_tolerance = REPORT_THRESHOLDS
        .iter()
        .map(|&tol| {
            let hit = envelope.iter().find(|(_, e)| (e - reference).abs() < tol).map(|(i, _)| *i);
            (tol, hit)
        })
        .collect();
    Ok(ConvergenceReport {
        iterations_to_tolerance,
        final_gap: (best - reference).abs(),
        envelope,
    })
}

/// History as `evaluation,energy` CSV.
pub fn history_csv(run: &VqeRun) -> String {
    let mut out = String::from("evaluation,energy\n");
    for (i, e) in &run.history {
        out.push_str(&format!("{i},{e:?}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_custom_ansatz, GateKind};
    use crate::engine::run_statevector;
    use crate::hamiltonian::{exact_ground_energy, map_hamiltonian, subspace_ground_energy, toy_hamiltonian};
    use crate::optimize::OptimizerKind;
    use crate::pauli::EncodingLayout;
    use num_complex::Complex64;

    fn one_qubit_z() -> (Circuit, MappedHamiltonian) {
        let mut c = Circuit::new(1);
        c.push_parametric(GateKind::RY, 0).unwrap();
        let layout = EncodingLayout::new(1, 2).unwrap();
        let h = MappedHamiltonian {
            pauli: PauliSum::from_strs(&[(Complex64::new(1.0, 0.0), "Z")]).unwrap(),
            physical: PauliSum::from_strs(&[(Complex64::new(1.0, 0.0), "Z")]).unwrap(),
            layout,
            penalty_weight: 0.0,
        };
        (c, h)
    }

    #[test]
    fn zero_hamiltonian_has_zero_energy() {
        let layout = EncodingLayout::new(3, 2).unwrap();
        let h = map_hamiltonian(&[], &layout, 0.0).unwrap();
        let c = build_custom_ansatz(6).unwrap();
        let theta = initial_parameters(24, Initialization::Uniform, 1);
        assert_eq!(energy(&theta, &c, &h, EstimatorMode::Exact, None, 0).unwrap(), 0.0);
    }

    #[test]
    fn single_qubit_minimum() {
        let (c, h) = one_qubit_z();
        let spec = OptimizerSpec::new(OptimizerKind::LbfgsFiniteDifference);
        let run = minimize(&c, &h, &spec, EstimatorMode::Exact, None, Some(&[0.4])).unwrap();
        assert!((run.best_energy + 1.0).abs() < 1e-6);
        let theta = run.best_parameters[0].rem_euclid(2.0 * PI);
        assert!((theta - PI).abs() < 1e-3);
    }

    #[test]
    fn variational_bound_holds_on_history() {
        let h = toy_hamiltonian();
        let e_ref = exact_ground_energy(&h).unwrap();
        let c = build_custom_ansatz(6).unwrap();
        let spec = OptimizerSpec::new(OptimizerKind::NelderMead).with_budget(2000).with_seed(4);
        let run = minimize(&c, &h, &spec, EstimatorMode::Exact, None, None).unwrap();
        assert!(run.history.iter().all(|(_, e)| *e >= e_ref - 1e-9));
        assert_eq!(run.best_energy, run.history.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn custom_ansatz_reaches_subspace_minimum() {
        let h = toy_hamiltonian();
        let target = subspace_ground_energy(&h).unwrap();
        let c = build_custom_ansatz(6).unwrap();
        let spec = OptimizerSpec::new(OptimizerKind::LbfgsFiniteDifference).with_seed(1);
        let run = minimize(&c, &h, &spec, EstimatorMode::Exact, None, None).unwrap();
        assert!((run.best_energy - target).abs() < 1e-6, "{}", run.best_energy);
        let psi = run_statevector(&c.bind(&run.best_parameters).unwrap()).unwrap();
        assert!(psi.amplitudes().iter().all(|a| a.im.abs() < 1e-12));
    }

    #[test]
    fn shot_mode_is_seed_deterministic() {
        let h = toy_hamiltonian();
        let c = build_custom_ansatz(6).unwrap();
        let spec = OptimizerSpec::new(OptimizerKind::Spsa).with_seed(2).with_budget(60);
        let a = minimize(&c, &h, &spec, EstimatorMode::Shots(512), None, None).unwrap();
        let b = minimize(&c, &h, &spec, EstimatorMode::Shots(512), None, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_basics() {
        let run = VqeRun {
            best_parameters: vec![],
            best_energy: -2.0,
            history: vec![(1, -2.0)],
            mode: EstimatorMode::Exact,
            converged: true,
        };
        let r = convergence_report(&run, -2.0).unwrap();
        assert_eq!(r.iterations_to_tolerance[0], (1e-3, Some(1)));
        assert_eq!(r.final_gap, 0.0);
        assert_eq!(convergence_report(&run, -2.0).unwrap(), r);
        assert_eq!(history_csv(&run), "evaluation,energy\n1,-2.0\n");
    }

    #[test]
    fn wrong_initial_length_is_rejected() {
        let (c, h) = one_qubit_z();
        let spec = OptimizerSpec::new(OptimizerKind::Powell);
        assert!(minimize(&c, &h, &spec, EstimatorMode::Exact, None, Some(&[0.1, 0.2])).is_err());
    }
}
