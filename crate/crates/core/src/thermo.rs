//! Thermal post-processing: Bose occupations, heat capacity, golden-rule
//! scattering rates, lifetimes and relaxation-time thermal conductivity.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{matrix_element_splitting, PhononSystem};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;

/// Two-sided coverage probabilities used for gate-fidelity budgets.
pub const ONE_SIGMA: f64 = 0.6827;
pub const THREE_SIGMA: f64 = 0.9973;

/// Reference heat capacity and conductivity at the calibration temperature.
pub const CALIBRATION_T: f64 = 100.0;
pub const CALIBRATION_HEAT: f64 = 4.1396e-23;
pub const CALIBRATION_KAPPA: f64 = 7200.133;

pub const DEFAULT_VELOCITY: f64 = 8500.0;

fn reduced_energy(omega: f64, t: f64, frequency_scale: f64) -> f64 {
    HBAR * frequency_scale * omega / (K_B * t)
}

/// Bose–Einstein occupation of a mode of toy frequency `omega` at `t` kelvin.
/// Inputs must be positive.
pub fn occupation(omega: f64, t: f64, frequency_scale: f64) -> f64 {
    1.0 / reduced_energy(omega, t, frequency_scale).exp_m1()
}

/// Heat capacity of one mode, `k_B x² eˣ/(eˣ − 1)²`. Inputs must be positive.
pub fn specific_heat(omega: f64, t: f64, frequency_scale: f64) -> f64 {
    let x = reduced_energy(omega, t, frequency_scale);
    // written with e^{-x} so large x underflows to zero instead of inf/inf
    let d = (-x).exp_m1();
    K_B * x * x * (-x).exp() / (d * d)
}

pub fn total_specific_heat(frequencies: &[f64], t: f64, frequency_scale: f64) -> f64 {
    frequencies.iter().map(|&w| specific_heat(w, t, frequency_scale)).sum()
}

/// Golden-rule rate of a splitting process, `n(1 + n₁)(1 + n₂) · structural`,
/// with all constant prefactors absorbed into the conductivity normalisation.
pub fn gamma(occupations: [f64; 3], structural_element_sq: f64) -> Result<f64> {
    matrix_element_splitting(occupations, 1.0, structural_element_sq)
}

/// Relaxation-time conductivity of one mode, `v² c τ / V`.
pub fn kappa(velocity: f64, heat: f64, lifetime: f64, volume: f64) -> f64 {
    velocity * velocity * heat * lifetime / volume
}

/// Matthiessen combination of three- and four-phonon rates.
pub fn lifetime(gamma3: f64, gamma4: f64) -> Result<f64> {
    if !(gamma3 >= 0.0) || !(gamma4 >= 0.0) {
        return Err(invalid("scattering rates must be non-negative"));
    }
    let total = gamma3 + gamma4;
    if total == 0.0 {
        return Err(Error::InfiniteLifetime);
    }
    Ok(1.0 / total)
}

/// Per-gate fidelity such that `n_gates` gates jointly reach `target`.
pub fn fidelity_requirement(n_gates: usize, target: f64) -> Result<f64> {
    if n_gates == 0 {
        return Err(invalid("gate count must be at least one"));
    }
    if !(target > 0.0 && target <= 1.0) {
        return Err(invalid(format!("target probability {target} outside (0, 1]")));
    }
    Ok(target.powf(1.0 / n_gates as f64))
}

/// Entangler count of a fully entangled hardware-efficient ansatz on
/// `phonons × levels` qubits.
pub fn full_entanglement_gate_count(phonons: usize, levels: usize, reps: usize) -> usize {
    let q = phonons * levels;
    q * q.saturating_sub(1) / 2 * reps
}

/// The decaying mode and its two products for the first energy-conserving
/// cubic coupling.
pub fn splitting_channel(system: &PhononSystem) -> Result<(usize, [usize; 2])> {
    let w = system.frequencies();
    for (&modes, &h) in system.coupling3() {
        if h == 0.0 || !system.conserves_triple(modes) {
            continue;
        }
        let top = (0..3)
            .max_by(|&a, &b| w[modes[a]].total_cmp(&w[modes[b]]))
            .expect("three modes");
        let rest: Vec<usize> = (0..3).filter(|&i| i != top).map(|i| modes[i]).collect();
        return Ok((modes[top], [rest[0], rest[1]]));
    }
    Err(invalid("system has no energy-conserving cubic coupling"))
}

/// Frequency scale (rad/s per toy unit) at which the summed heat capacity at
/// `t` equals `target`.
pub fn fit_frequency_scale(frequencies: &[f64], t: f64, target: f64) -> Result<f64> {
    let classical = K_B * frequencies.len() as f64;
    if !(target > 0.0 && target < classical) {
        return Err(invalid(format!(
            "target heat capacity {target:e} outside (0, {classical:e})"
        )));
    }
    let f = |ln_s: f64| total_specific_heat(frequencies, t, ln_s.exp()) - target;
    // heat capacity falls monotonically with the frequency scale
    let (mut lo, mut hi) = (0.0f64, 80.0f64);
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(invalid("frequency scale outside the search bracket"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Where the squared structural matrix element comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureSource {
    Exact,
    VqeNoiseless,
    VqeUnmitigated,
    VqeMitigated,
}

impl StructureSource {
    pub const ALL: [StructureSource; 4] = [
        StructureSource::Exact,
        StructureSource::VqeNoiseless,
        StructureSource::VqeUnmitigated,
        StructureSource::VqeMitigated,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StructureSource::Exact => "exact",
            StructureSource::VqeNoiseless => "vqe-noiseless",
            StructureSource::VqeUnmitigated => "vqe-unmitigated",
            StructureSource::VqeMitigated => "vqe-mitigated",
        }
    }
}

impl FromStr for StructureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| invalid(format!("unknown structure source '{s}'")))
    }
}

/// Squared structural element with its statistical spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureEstimate {
    pub source: StructureSource,
    pub value: f64,
    pub std: f64,
}

impl StructureEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            source: StructureSource::Exact,
            value,
            std: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    pub temperatures: Vec<f64>,
    #[serde(default = "default_velocity")]
    pub group_velocity: f64,
    #[serde(default = "default_volume")]
    pub volume: f64,
    /// Angular frequency per toy frequency unit.
    pub frequency_scale: f64,
    /// Absorbs the golden-rule prefactor and the coupling magnitude.
    pub kappa_normalization: f64,
}

fn default_velocity() -> f64 {
    DEFAULT_VELOCITY
}
fn default_volume() -> f64 {
    1.0
}

/// Temperatures 100 to 300 K in 50 K steps.
pub fn reference_temperatures() -> Vec<f64> {
    (0..5).map(|i| 100.0 + 50.0 * i as f64).collect()
}

impl ThermalConfig {
    /// Fit the frequency scale to the reference heat capacity and the
    /// conductivity normalisation to the reference conductivity, both at the
    /// calibration temperature, using the exact structural element.
    pub fn calibrated(system: &PhononSystem, exact_structure: f64, temperatures: Vec<f64>) -> Result<Self> {
        let frequency_scale = fit_frequency_scale(system.frequencies(), CALIBRATION_T, CALIBRATION_HEAT)?;
        let mut cfg = Self {
            temperatures,
            group_velocity: DEFAULT_VELOCITY,
            volume: 1.0,
            frequency_scale,
            kappa_normalization: 1.0,
        };
        let anchor = cfg.point(system, CALIBRATION_T, &StructureEstimate::exact(exact_structure))?;
        cfg.kappa_normalization = CALIBRATION_KAPPA / anchor.kappa;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperatures.is_empty() || self.temperatures.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(invalid("temperatures must be positive"));
        }
        for (name, v) in [
            ("group velocity", self.group_velocity),
            ("volume", self.volume),
            ("frequency scale", self.frequency_scale),
            ("conductivity normalisation", self.kappa_normalization),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Evaluate a single temperature.
    pub fn point(&self, system: &PhononSystem, t: f64, structure: &StructureEstimate) -> Result<ThermalPoint> {
        let (decaying, [p1, p2]) = splitting_channel(system)?;
        let w = system.frequencies();
        let occupations: Vec<f64> = w.iter().map(|&x| occupation(x, t, self.frequency_scale)).collect();
        let heat = total_specific_heat(w, t, self.frequency_scale);
        let gamma = gamma([occupations[decaying], occupations[p1], occupations[p2]], structure.value)?;
        let tau = lifetime(gamma, 0.0)?;
        let k = self.kappa_normalization * kappa(self.group_velocity, heat, tau, self.volume);
        Ok(ThermalPoint {
            temperature: t,
            occupations,
            specific_heat: heat,
            gamma,
            lifetime: tau,
            kappa: k,
            // κ ∝ 1/structure
            kappa_std: k * structure.std / structure.value,
            source: structure.source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    pub temperature: f64,
    pub occupations: Vec<f64>,
    pub specific_heat: f64,
    pub gamma: f64,
    pub lifetime: f64,
    pub kappa: f64,
    pub kappa_std: f64,
    pub source: StructureSource,
}

/// Evaluate every configured temperature, in order.
pub fn sweep(config: &ThermalConfig, system: &PhononSystem, structure: &StructureEstimate) -> Result<Vec<ThermalPoint>> {
    config.validate()?;
    if !(structure.value > 0.0) || !(structure.std >= 0.0) {
        return Err(invalid("structural element must be positive"));
    }
    config
        .temperatures
        .par_iter()
        .map(|&t| config.point(system, t, structure))
        .collect()
}

pub fn sweep_csv(points: &[ThermalPoint]) -> String {
    let mut out = String::from("T,c_v,gamma,tau,kappa,kappa_std,source\n");
    for p in points {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{},{},{}\n",
            p.temperature,
            p.specific_heat,
            p.gamma,
            p.lifetime,
            p.kappa,
            p.kappa_std,
            p.source.label()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matches_four_digits(value: f64, shown: f64) -> bool {
        let scaled = value * 1e4;
        [scaled.round(), scaled.floor()].iter().any(|v| (v / 1e4 - shown).abs() < 1e-12)
    }

    fn scale_for(x: f64, omega: f64, t: f64) -> f64 {
        x * K_B * t / (HBAR * omega)
    }

    #[test]
    fn occupation_examples() {
        let s = scale_for(2f64.ln(), 1.0, 100.0);
        assert!((occupation(1.0, 100.0, s) - 1.0).abs() < 1e-12);
        assert!(occupation(1.0, 1e-3, 1e14) < 1e-300);
        let s = scale_for(0.01, 1.0, 300.0);
        let x = 0.01;
        let series = 1.0 / x - 0.5 + x / 12.0;
        assert!(((occupation(1.0, 300.0, s) - series) / series).abs() < 1e-6);
    }

    #[test]
    fn heat_capacity_examples() {
        let tiny = scale_for(1e-6, 1.0, 200.0);
        assert!((specific_heat(1.0, 200.0, tiny) - K_B).abs() / K_B < 1e-9);
        let one = scale_for(1.0, 1.0, 200.0);
        let e = std::f64::consts::E;
        let expected = K_B * e / ((e - 1.0) * (e - 1.0));
        assert!((specific_heat(1.0, 200.0, one) - expected).abs() / expected < 1e-12);
        assert!((expected / K_B - 0.9206).abs() < 1e-4);
        assert_eq!(specific_heat(1.0, 1.0, 1e16), 0.0);
    }

    #[test]
    fn calibrated_scale_matches_reference_heat() {
        let s = fit_frequency_scale(&[1.0, 0.5, 0.5], 100.0, CALIBRATION_HEAT).unwrap();
        let c = total_specific_heat(&[1.0, 0.5, 0.5], 100.0, s);
        assert!((c - CALIBRATION_HEAT).abs() / CALIBRATION_HEAT < 1e-12);
        let kelvin = HBAR * s / K_B;
        assert!((kelvin - 11.66).abs() < 0.01, "{kelvin}");
        assert!(fit_frequency_scale(&[1.0], 100.0, 2.0 * K_B).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma([0.0, 0.0, 0.0], 4.0).unwrap(), 0.0);
        assert!(gamma([-1.0, 0.0, 0.0], 4.0).is_err());
        // each occupation grows linearly in T classically
        let s = 1e9;
        let occ = |t: f64| [occupation(1.0, t, s), occupation(0.5, t, s), occupation(0.5, t, s)];
        let r = gamma(occ(200.0), 1.0).unwrap() / gamma(occ(100.0), 1.0).unwrap();
        assert!((r - 8.0).abs() / 8.0 < 1e-3);
    }

    #[test]
    fn lifetime_and_kappa() {
        assert_eq!(lifetime(2.0, 0.0).unwrap(), 0.5);
        assert_eq!(lifetime(3.0, 3.0).unwrap(), 1.0 / 6.0);
        assert_eq!(lifetime(0.0, 0.0), Err(Error::InfiniteLifetime));
        assert!(lifetime(-1.0, 1.0).is_err());
        assert_eq!(kappa(2.0, 3.0, 2.0, 1.0), 2.0 * kappa(2.0, 3.0, 1.0, 1.0));
        assert!(lifetime(1.0, 0.5).unwrap() < lifetime(1.0, 0.0).unwrap());
    }

    #[test]
    fn fidelity_requirements() {
        // four-digit reference values are rounded for 30 gates, truncated for 21
        for (n, s, shown) in [
            (30, ONE_SIGMA, 0.9874),
            (30, THREE_SIGMA, 0.9999),
            (21, ONE_SIGMA, 0.9819),
            (21, THREE_SIGMA, 0.9998),
        ] {
            assert!(matches_four_digits(fidelity_requirement(n, s).unwrap(), shown), "{n} {s}");
        }
        for n in 1..40 {
            let f = fidelity_requirement(n, ONE_SIGMA).unwrap();
            assert!((f.powi(n as i32) - ONE_SIGMA).abs() < 1e-12);
        }
        assert_eq!(fidelity_requirement(1, ONE_SIGMA).unwrap(), ONE_SIGMA);
        assert_eq!(full_entanglement_gate_count(3, 2, 2), 30);
        assert!(fidelity_requirement(0, ONE_SIGMA).is_err());
    }

    #[test]
    fn toy_channel_is_found() {
        assert_eq!(splitting_channel(&PhononSystem::toy_model()).unwrap(), (0, [1, 2]));
        let none = PhononSystem::from_force_constants(vec![1.0, 0.5, 0.5], 1.0, &[], &[]).unwrap();
        assert!(splitting_channel(&none).is_err());
    }

    #[test]
    fn reference_table_is_reproduced() {
        let sys = PhononSystem::toy_model();
        let cfg = ThermalConfig::calibrated(&sys, 4.0, reference_temperatures()).unwrap();
        let points = sweep(&cfg, &sys, &StructureEstimate::exact(4.0)).unwrap();
        let table = [
            (4.1396, 7200.133),
            (4.1409, 2133.613),
            (4.1414, 900.153),
            (4.1416, 460.887),
            (4.1417, 266.720),
        ];
        for (p, (c, k)) in points.iter().zip(table) {
            assert!((p.specific_heat / 1e-23 - c).abs() / c < 1e-4, "{p:?}");
            assert!((p.kappa - k).abs() / k < 1e-2, "{p:?}");
        }
        let csv = sweep_csv(&points);
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("T,c_v,gamma,tau,kappa,kappa_std,source\n100,"));
    }

    #[test]
    fn config_validation() {
        let sys = PhononSystem::toy_model();
        let mut cfg = ThermalConfig::calibrated(&sys, 4.0, vec![100.0]).unwrap();
        cfg.temperatures = vec![-1.0];
        assert!(cfg.validate().is_err());
        assert_eq!("vqe-mitigated".parse::<StructureSource>().unwrap(), StructureSource::VqeMitigated);
        assert!("other".parse::<StructureSource>().is_err());
    }
}
