//! Statevector and density-matrix simulation, Pauli expectations and
//! shot sampling with readout error.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bosonic::{hermitian_eigenvalues, CMatrix};
use crate::circuits::{Circuit, Gate, GateKind, Mat2, Mat4};
use crate::error::{invalid, Error, Result};
use crate::pauli::{i_pow, Pauli, PauliSum, PauliTerm};

type C = Complex64;

/// Widest register the density-matrix simulator accepts.
pub const MAX_DENSITY_WIDTH: usize = 10;
/// Widest register the statevector simulator accepts.
pub const MAX_STATE_WIDTH: usize = 24;

const ZERO: C = C::new(0.0, 0.0);

fn apply_1q(v: &mut [C], shift: usize, m: &Mat2) {
    let bit = 1usize << shift;
    for i in 0..v.len() {
        if i & bit == 0 {
            let (a, b) = (v[i], v[i | bit]);
            v[i] = m[0][0] * a + m[0][1] * b;
            v[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply_2q(v: &mut [C], shift_hi: usize, shift_lo: usize, m: &Mat4) {
    let (hi, lo) = (1usize << shift_hi, 1usize << shift_lo);
    let idx = |i: usize| [i, i | lo, i | hi, i | hi | lo];
    for i in 0..v.len() {
        if i & (hi | lo) == 0 {
            let ix = idx(i);
            let a = ix.map(|k| v[k]);
            for (r, &k) in ix.iter().enumerate() {
                v[k] = (0..4).map(|s| m[r][s] * a[s]).sum();
            }
        }
    }
}

fn conj2(m: &Mat2) -> Mat2 {
    m.map(|row| row.map(|z| z.conj()))
}

fn conj4(m: &Mat4) -> Mat4 {
    m.map(|row| row.map(|z| z.conj()))
}

fn zz_rotation(angle: f64) -> Mat4 {
    let (a, b) = (C::from_polar(1.0, -angle / 2.0), C::from_polar(1.0, angle / 2.0));
    [
        [a, ZERO, ZERO, ZERO],
        [ZERO, b, ZERO, ZERO],
        [ZERO, ZERO, b, ZERO],
        [ZERO, ZERO, ZERO, a],
    ]
}

fn check_observable(observable: &PauliSum, width: usize) -> Result<()> {
    if observable.width() != width {
        return Err(Error::WidthMismatch {
            left: width,
            right: observable.width(),
        });
    }
    observable.ensure_hermitian()
}

/// Phase `ω(k)` with `P|k⟩ = ω(k)|k⊕x⟩`.
fn pauli_phase(k: usize, z: usize, n_y: u32) -> C {
    let sign = if (k & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    i_pow(n_y) * sign
}

/// Pure state over `width` qubits; qubit 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    width: usize,
    amplitudes: Vec<C>,
}

impl StateVector {
    pub fn zero_state(width: usize) -> Result<Self> {
        if width > MAX_STATE_WIDTH {
            return Err(Error::TooWide {
                width,
                limit: MAX_STATE_WIDTH,
            });
        }
        let mut amplitudes = vec![ZERO; 1 << width];
        amplitudes[0] = C::new(1.0, 0.0);
        Ok(Self { width, amplitudes })
    }

    pub fn from_amplitudes(width: usize, amplitudes: Vec<C>) -> Result<Self> {
        if amplitudes.len() != 1 << width {
            return Err(invalid("amplitude count must be 2^width"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(invalid(format!("state norm {norm} is not 1")));
        }
        Ok(Self { width, amplitudes })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[C] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let w = self.width;
        match gate.kind.arity() {
            0 => {
                let phase = C::from_polar(1.0, gate.bound_angle()?);
                self.amplitudes.iter_mut().for_each(|a| *a *= phase);
            }
            1 => apply_1q(&mut self.amplitudes, w - 1 - gate.qubits[0], &gate.matrix1()?),
            _ => apply_2q(
                &mut self.amplitudes,
                w - 1 - gate.qubits[0],
                w - 1 - gate.qubits[1],
                &gate.matrix2()?,
            ),
        }
        Ok(())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let d = self.amplitudes.len();
        let mut data = vec![ZERO; d * d];
        for k in 0..d {
            for l in 0..d {
                data[k * d + l] = self.amplitudes[k] * self.amplitudes[l].conj();
            }
        }
        DensityMatrix {
            width: self.width,
            data,
        }
    }

    fn term_value(&self, term: &PauliTerm) -> C {
        let (x, z, n_y) = term.masks();
        let psi = &self.amplitudes;
        let sum: C = (0..psi.len())
            .map(|k| psi[k ^ x].conj() * pauli_phase(k, z, n_y) * psi[k])
            .sum();
        term.coefficient * sum
    }

    /// `⟨ψ|H|ψ⟩`, term by term.
    pub fn expectation(&self, observable: &PauliSum) -> Result<f64> {
        check_observable(observable, self.width)?;
        Ok(observable.terms().iter().map(|t| self.term_value(t).re).sum())
    }
}

/// Mixed state stored row-major; row index is the ket.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    width: usize,
    data: Vec<C>,
}

impl DensityMatrix {
    pub fn zero_state(width: usize) -> Result<Self> {
        if width > MAX_DENSITY_WIDTH {
            return Err(Error::TooWide {
                width,
                limit: MAX_DENSITY_WIDTH,
            });
        }
        let d = 1usize << width;
        let mut data = vec![ZERO; d * d];
        data[0] = C::new(1.0, 0.0);
        Ok(Self { width, data })
    }

    pub fn maximally_mixed(width: usize) -> Result<Self> {
        let mut rho = Self::zero_state(width)?;
        let d = rho.dim();
        rho.data.iter_mut().for_each(|z| *z = ZERO);
        for k in 0..d {
            rho.data[k * d + k] = C::new(1.0 / d as f64, 0.0);
        }
        Ok(rho)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        1 << self.width
    }

    pub fn get(&self, row: usize, col: usize) -> C {
        self.data[row * self.dim() + col]
    }

    pub fn to_matrix(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |r, c| self.data[r * d + c])
    }

    pub fn trace(&self) -> C {
        (0..self.dim()).map(|k| self.get(k, k)).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_kl|² for Hermitian ρ
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.to_matrix())?[0])
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.get(k, k).re.max(0.0)).collect()
    }

    fn shifts(&self, qubit: usize) -> (usize, usize) {
        let s = self.width - 1 - qubit;
        (s + self.width, s)
    }

    pub fn apply_unitary1(&mut self, qubit: usize, m: &Mat2) {
        let (ket, bra) = self.shifts(qubit);
        apply_1q(&mut self.data, ket, m);
        apply_1q(&mut self.data, bra, &conj2(m));
    }

    pub fn apply_unitary2(&mut self, q0: usize, q1: usize, m: &Mat4) {
        let (k0, b0) = self.shifts(q0);
        let (k1, b1) = self.shifts(q1);
        apply_2q(&mut self.data, k0, k1, m);
        apply_2q(&mut self.data, b0, b1, &conj4(m));
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        match gate.kind.arity() {
            // a global phase cancels in ρ
            0 => {
                gate.bound_angle()?;
            }
            1 => self.apply_unitary1(gate.qubits[0], &gate.matrix1()?),
            _ => self.apply_unitary2(gate.qubits[0], gate.qubits[1], &gate.matrix2()?),
        }
        Ok(())
    }

    /// `ρ → (1−p)ρ + p · I/4 ⊗ Tr_pair ρ` on qubits `a`, `b`.
    pub fn depolarize_pair(&mut self, a: usize, b: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let d = self.dim();
        let (ba, bb) = (1usize << (self.width - 1 - a), 1usize << (self.width - 1 - b));
        let mask = ba | bb;
        let subs = [0, bb, ba, ba | bb];
        for k in (0..d).filter(|k| k & mask == 0) {
            for l in (0..d).filter(|l| l & mask == 0) {
                let traced: C = subs.iter().map(|&s| self.data[(k | s) * d + (l | s)]).sum();
                for &s in &subs {
                    for &t in &subs {
                        let z = &mut self.data[(k | s) * d + (l | t)];
                        *z *= 1.0 - p;
                        if s == t {
                            *z += traced * (p / 4.0);
                        }
                    }
                }
            }
        }
    }

    /// Amplitude damping with probability `gamma` plus coherence decay
    /// `coherence` on the off-diagonal elements of one qubit.
    pub fn relax(&mut self, qubit: usize, gamma: f64, coherence: f64) {
        let d = self.dim();
        let bit = 1usize << (self.width - 1 - qubit);
        for k in (0..d).filter(|k| k & bit == 0) {
            for l in (0..d).filter(|l| l & bit == 0) {
                let excited = self.data[(k | bit) * d + (l | bit)];
                self.data[k * d + l] += excited * gamma;
                self.data[(k | bit) * d + (l | bit)] = excited * (1.0 - gamma);
                self.data[k * d + (l | bit)] *= coherence;
                self.data[(k | bit) * d + l] *= coherence;
            }
        }
    }

    fn term_value(&self, term: &PauliTerm) -> C {
        let (x, z, n_y) = term.masks();
        let sum: C = (0..self.dim())
            .map(|k| pauli_phase(k, z, n_y) * self.get(k, k ^ x))
            .sum();
        term.coefficient * sum
    }

    /// `Tr(ρH)`, term by term.
    pub fn expectation(&self, observable: &PauliSum) -> Result<f64> {
        check_observable(observable, self.width)?;
        Ok(observable.terms().iter().map(|t| self.term_value(t).re).sum())
    }
}

/// Either kind of simulated state.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl State {
    pub fn width(&self) -> usize {
        match self {
            State::Pure(s) => s.width(),
            State::Mixed(r) => r.width(),
        }
    }

    pub fn expectation(&self, observable: &PauliSum) -> Result<f64> {
        match self {
            State::Pure(s) => s.expectation(observable),
            State::Mixed(r) => r.expectation(observable),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            State::Pure(s) => s.probabilities(),
            State::Mixed(r) => r.probabilities(),
        }
    }

    /// Apply a noiseless bound circuit (used for measurement basis changes).
    pub fn evolve(&mut self, circuit: &Circuit) -> Result<()> {
        for g in circuit.gates() {
            match self {
                State::Pure(s) => s.apply_gate(g)?,
                State::Mixed(r) => r.apply_gate(g)?,
            }
        }
        Ok(())
    }
}

/// Per-qubit readout error, columns `P(measured | true)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutError {
    /// `P(0 | 1)`.
    pub p0_given1: f64,
    /// `P(1 | 0)`.
    pub p1_given0: f64,
}

impl ReadoutError {
    pub fn new(p0_given1: f64, p1_given0: f64) -> Result<Self> {
        let r = Self {
            p0_given1,
            p1_given0,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn ideal() -> Self {
        Self {
            p0_given1: 0.0,
            p1_given0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.p0_given1, self.p1_given0] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("readout probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// `M[measured][true]`.
    pub fn confusion(&self) -> [[f64; 2]; 2] {
        [
            [1.0 - self.p1_given0, self.p0_given1],
            [self.p1_given0, 1.0 - self.p0_given1],
        ]
    }

    pub fn is_ideal(&self) -> bool {
        self.p0_given1 == 0.0 && self.p1_given0 == 0.0
    }
}

/// Gate durations used for idle scheduling, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDurations {
    pub single_ns: f64,
    pub two_ns: f64,
}

impl Default for GateDurations {
    fn default() -> Self {
        Self {
            single_ns: 60.0,
            two_ns: 660.0,
        }
    }
}

impl GateDurations {
    /// Frame changes (RZ, Pauli frames, global phase) take no time.
    pub fn of(&self, kind: GateKind) -> f64 {
        match kind {
            GateKind::RZ | GateKind::X | GateKind::Y | GateKind::Z | GateKind::GlobalPhase => 0.0,
            k if k.is_two_qubit() => self.two_ns,
            _ => self.single_ns,
        }
    }
}

/// Idle relaxation constants in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdleNoise {
    pub t1_us: f64,
    pub t2_us: f64,
    #[serde(default)]
    pub durations: GateDurations,
}

impl IdleNoise {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1_us > 0.0) || !(self.t2_us > 0.0) {
            return Err(invalid("T1 and T2 must be positive"));
        }
        if self.t2_us > 2.0 * self.t1_us {
            return Err(invalid("T2 cannot exceed 2·T1"));
        }
        if !(self.durations.single_ns >= 0.0) || !(self.durations.two_ns >= 0.0) {
            return Err(invalid("gate durations must be non-negative"));
        }
        Ok(())
    }

    /// `(γ, coherence factor)` for an idle period of `ns` nanoseconds.
    pub fn channel(&self, ns: f64) -> (f64, f64) {
        let t = ns * 1e-3;
        (1.0 - (-t / self.t1_us).exp(), (-t / self.t2_us).exp())
    }
}

/// Gate and readout noise applied by [`run_density`] and [`sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Depolarizing probability after every two-qubit gate.
    pub depolarizing_p: f64,
    /// Empty for ideal readout, one entry for a uniform model, or one per
    /// qubit.
    #[serde(default)]
    pub readout: Vec<ReadoutError>,
    #[serde(default)]
    pub idle: Option<IdleNoise>,
    /// Fraction of idle relaxation removed by dynamical decoupling.
    #[serde(default)]
    pub idle_suppression: f64,
    /// Coherent ZZ over-rotation (radians) after every two-qubit gate.
    #[serde(default)]
    pub coherent_zz: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Reference device characterisation.
pub mod brisbane {
    pub const ECR_ERROR: f64 = 0.008471;
    pub const PAULI_X_ERROR: f64 = 0.002457;
    pub const P0_GIVEN1: f64 = 0.0148;
    pub const P1_GIVEN0: f64 = 0.0108;
    pub const T1_US: f64 = 224.67;
    pub const T2_US: f64 = 140.09;
    pub const EPLG: f64 = 0.021;
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self {
            depolarizing_p: 0.0,
            readout: Vec::new(),
            idle: None,
            idle_suppression: 0.0,
            coherent_zz: 0.0,
        }
    }

    pub fn depolarizing(p: f64) -> Result<Self> {
        let m = Self {
            depolarizing_p: p,
            ..Self::ideal()
        };
        m.validate()?;
        Ok(m)
    }

    /// ECR error taken as `1 − F`, converted to a depolarizing probability.
    pub fn ibm_brisbane() -> Self {
        Self {
            depolarizing_p: depolarizing_from_fidelity(1.0 - brisbane::ECR_ERROR)
                .expect("preset fidelity is valid"),
            readout: vec![ReadoutError {
                p0_given1: brisbane::P0_GIVEN1,
                p1_given0: brisbane::P1_GIVEN0,
            }],
            idle: Some(IdleNoise {
                t1_us: brisbane::T1_US,
                t2_us: brisbane::T2_US,
                durations: GateDurations::default(),
            }),
            idle_suppression: 0.0,
            coherent_zz: 0.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "ideal" | "noiseless" => Ok(Self::ideal()),
            "ibm_brisbane" => Ok(Self::ibm_brisbane()),
            other => Err(invalid(format!("unknown noise preset '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.depolarizing_p) {
            return Err(invalid("depolarizing probability outside [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.idle_suppression) {
            return Err(invalid("idle suppression outside [0, 1]"));
        }
        if !self.coherent_zz.is_finite() {
            return Err(invalid("coherent over-rotation must be finite"));
        }
        for r in &self.readout {
            r.validate()?;
        }
        if let Some(idle) = &self.idle {
            idle.validate()?;
        }
        Ok(())
    }

    /// Readout model for `qubit`.
    pub fn readout_for(&self, qubit: usize) -> ReadoutError {
        match self.readout.len() {
            0 => ReadoutError::ideal(),
            1 => self.readout[0],
            _ => self.readout.get(qubit).copied().unwrap_or_else(ReadoutError::ideal),
        }
    }

    pub fn readout_for_width(&self, width: usize) -> Result<Vec<ReadoutError>> {
        if self.readout.len() > 1 && self.readout.len() != width {
            return Err(Error::WidthMismatch {
                left: width,
                right: self.readout.len(),
            });
        }
        Ok((0..width).map(|q| self.readout_for(q)).collect())
    }

    pub fn has_gate_noise(&self) -> bool {
        self.depolarizing_p > 0.0 || self.coherent_zz != 0.0 || self.active_idle().is_some()
    }

    fn active_idle(&self) -> Option<&IdleNoise> {
        self.idle.as_ref().filter(|_| self.idle_suppression < 1.0)
    }
}

/// `F = 1 − 15p/16` for the two-qubit depolarizing channel.
pub fn depolarizing_gate_fidelity(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(1.0 - 15.0 * p / 16.0)
}

/// Inverse of [`depolarizing_gate_fidelity`].
pub fn depolarizing_from_fidelity(fidelity: f64) -> Result<f64> {
    if !(1.0 / 16.0..=1.0).contains(&fidelity) {
        return Err(invalid(format!("fidelity {fidelity} outside [1/16, 1]")));
    }
    Ok(16.0 * (1.0 - fidelity) / 15.0)
}

/// Noiseless simulation from `|0…0⟩`, global phase included.
pub fn run_statevector(circuit: &Circuit) -> Result<StateVector> {
    let mut psi = StateVector::zero_state(circuit.width())?;
    for g in circuit.gates() {
        psi.apply_gate(g)?;
    }
    if circuit.global_phase() != 0.0 {
        let phase = C::from_polar(1.0, circuit.global_phase());
        psi.amplitudes.iter_mut().for_each(|a| *a *= phase);
    }
    Ok(psi)
}

/// Dense unitary of a bound circuit, column `k` is the image of `|k⟩`.
pub fn unitary(circuit: &Circuit) -> Result<CMatrix> {
    let w = circuit.width();
    if w > MAX_DENSITY_WIDTH {
        return Err(Error::TooWide {
            width: w,
            limit: MAX_DENSITY_WIDTH,
        });
    }
    let d = 1usize << w;
    let phase = C::from_polar(1.0, circuit.global_phase());
    let mut u = CMatrix::zeros(d, d);
    for k in 0..d {
        let mut col = vec![ZERO; d];
        col[k] = C::new(1.0, 0.0);
        let mut psi = StateVector {
            width: w,
            amplitudes: col,
        };
        for g in circuit.gates() {
            psi.apply_gate(g)?;
        }
        for (r, a) in psi.amplitudes.iter().enumerate() {
            u[(r, k)] = a * phase;
        }
    }
    Ok(u)
}

/// ASAP start times; zero-duration gates sit at the start of the next timed
/// gate on their qubit. Returns `(starts, makespan)`.
fn schedule(circuit: &Circuit, durations: &GateDurations) -> (Vec<f64>, f64) {
    let w = circuit.width();
    let gates = circuit.gates();
    let mut ready = vec![0.0f64; w];
    let mut starts = vec![f64::NAN; gates.len()];
    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); w];
    for (i, g) in gates.iter().enumerate() {
        let d = durations.of(g.kind);
        if d == 0.0 {
            for &q in &g.qubits {
                pending[q].push(i);
            }
            if g.qubits.is_empty() {
                starts[i] = 0.0;
            }
            continue;
        }
        let start = g.qubits.iter().map(|&q| ready[q]).fold(0.0, f64::max);
        starts[i] = start;
        for &q in &g.qubits {
            ready[q] = start + d;
            for j in pending[q].drain(..) {
                starts[j] = if starts[j].is_nan() { start } else { starts[j].min(start) };
            }
        }
    }
    let makespan = ready.iter().copied().fold(0.0, f64::max);
    for list in pending {
        for j in list {
            if starts[j].is_nan() {
                starts[j] = makespan;
            }
        }
    }
    (starts, makespan)
}

/// Noisy simulation: depolarizing (and optional coherent ZZ) noise after each
/// two-qubit gate, idle relaxation between scheduled gates.
pub fn run_density(circuit: &Circuit, noise: &NoiseModel) -> Result<DensityMatrix> {
    noise.validate()?;
    let mut rho = DensityMatrix::zero_state(circuit.width())?;
    let idle = noise.active_idle().copied();
    let scale = 1.0 - noise.idle_suppression;
    let (starts, makespan) = match &idle {
        Some(i) => schedule(circuit, &i.durations),
        None => (Vec::new(), 0.0),
    };
    let mut busy_until = vec![0.0f64; circuit.width()];
    let wait = |rho: &mut DensityMatrix, q: usize, until: f64, busy: &mut [f64]| {
        if let Some(i) = &idle {
            let gap = (until - busy[q]).max(0.0) * scale;
            if gap > 0.0 {
                let (gamma, coh) = i.channel(gap);
                rho.relax(q, gamma, coh);
            }
        }
        busy[q] = busy[q].max(until);
    };
    for (idx, g) in circuit.gates().iter().enumerate() {
        if let Some(i) = &idle {
            let s = starts[idx];
            for &q in &g.qubits {
                wait(&mut rho, q, s, &mut busy_until);
                busy_until[q] = s + i.durations.of(g.kind);
            }
        }
        rho.apply_gate(g)?;
        if g.kind.is_two_qubit() {
            let (a, b) = (g.qubits[0], g.qubits[1]);
            if noise.coherent_zz != 0.0 {
                rho.apply_unitary2(a, b, &zz_rotation(noise.coherent_zz));
            }
            rho.depolarize_pair(a, b, noise.depolarizing_p);
        }
    }
    if idle.is_some() {
        for q in 0..circuit.width() {
            wait(&mut rho, q, makespan, &mut busy_until);
        }
    }
    Ok(rho)
}

/// Noiseless statevector when the model has no gate noise, density matrix
/// otherwise.
pub fn simulate(circuit: &Circuit, noise: &NoiseModel) -> Result<State> {
    if noise.has_gate_noise() {
        Ok(State::Mixed(run_density(circuit, noise)?))
    } else {
        Ok(State::Pure(run_statevector(circuit)?))
    }
}

/// Histogram of measured basis states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    width: usize,
    shots: u64,
    counts: BTreeMap<usize, u64>,
}

impl Counts {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            shots: 0,
            counts: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, outcome: usize, n: u64) {
        *self.counts.entry(outcome).or_insert(0) += n;
        self.shots += n;
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn get(&self, outcome: usize) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }

    pub fn bitstring(&self, outcome: usize) -> String {
        (0..self.width)
            .map(|q| if outcome >> (self.width - 1 - q) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Relative frequencies as a dense vector.
    pub fn distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.width];
        for (k, n) in self.iter() {
            p[k] = n as f64 / self.shots as f64;
        }
        p
    }
}

/// Born-rule sampling with independent per-bit readout flips.
pub fn sample<R: Rng>(
    probabilities: &[f64],
    width: usize,
    shots: u64,
    readout: &[ReadoutError],
    rng: &mut R,
) -> Result<Counts> {
    if shots == 0 {
        return Err(invalid("at least one shot is required"));
    }
    if probabilities.len() != 1 << width {
        return Err(invalid("probability vector must have 2^width entries"));
    }
    if !readout.is_empty() && readout.len() != width {
        return Err(Error::WidthMismatch {
            left: width,
            right: readout.len(),
        });
    }
    let dist = WeightedIndex::new(probabilities).map_err(|e| invalid(e.to_string()))?;
    let mut hist = vec![0u64; probabilities.len()];
    for _ in 0..shots {
        let mut k = dist.sample(rng);
        for (q, r) in readout.iter().enumerate() {
            let bit = 1usize << (width - 1 - q);
            let flip = if k & bit == 0 { r.p1_given0 } else { r.p0_given1 };
            if flip > 0.0 && rng.gen_bool(flip) {
                k ^= bit;
            }
        }
        hist[k] += 1;
    }
    let mut counts = Counts::new(width);
    for (k, n) in hist.into_iter().enumerate().filter(|(_, n)| *n > 0) {
        counts.record(k, n);
    }
    Ok(counts)
}

/// Terms measured together in one rotated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGroup {
    /// Per-qubit basis; `I` where no term needs the qubit.
    pub basis: Vec<Pauli>,
    pub terms: Vec<PauliTerm>,
}

impl MeasurementGroup {
    pub fn weight(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.norm()).sum()
    }

    /// Gates rotating the measured basis onto Z.
    pub fn rotation(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.basis.len());
        for (q, p) in self.basis.iter().enumerate() {
            match p {
                Pauli::X => c.push_rotation(GateKind::RY, q, -std::f64::consts::FRAC_PI_2)?,
                Pauli::Y => c.push_rotation(GateKind::RX, q, std::f64::consts::FRAC_PI_2)?,
                _ => {}
            }
        }
        Ok(c)
    }
}

/// Group non-identity terms by exact basis string; Z and I share the
/// computational basis. Returns the groups and the identity offset.
pub fn measurement_groups(observable: &PauliSum) -> (Vec<MeasurementGroup>, f64) {
    let mut offset = 0.0;
    let mut groups: BTreeMap<String, MeasurementGroup> = BTreeMap::new();
    for t in observable.terms() {
        if t.is_identity() {
            offset += t.coefficient.re;
            continue;
        }
        let key: String = t
            .axes
            .iter()
            .map(|p| match p {
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                _ => 'Z',
            })
            .collect();
        let g = groups.entry(key).or_insert_with(|| MeasurementGroup {
            basis: vec![Pauli::I; t.width()],
            terms: Vec::new(),
        });
        for (b, p) in g.basis.iter_mut().zip(&t.axes) {
            if *p != Pauli::I {
                *b = *p;
            }
        }
        g.terms.push(t.clone());
    }
    (groups.into_values().collect(), offset)
}

/// Split `total` shots across groups in proportion to coefficient weight,
/// with at least `min_per_group` each.
pub fn allocate_shots(groups: &[MeasurementGroup], total: u64, min_per_group: u64) -> Vec<u64> {
    let weights: Vec<f64> = groups.iter().map(|g| g.weight()).collect();
    let sum: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| {
            let share = if sum > 0.0 { (total as f64 * w / sum).round() as u64 } else { 0 };
            share.max(min_per_group)
        })
        .collect()
}

/// Minimum shots assigned to any measured group.
pub const MIN_SHOTS_PER_GROUP: u64 = 64;

/// Mean and variance of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub variance: f64,
}

impl Estimate {
    pub fn std_error(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

/// Per-qubit weights turning a measured bit into a ±1 parity; readout
/// mitigation replaces them by the inverse-confusion weights.
pub type BitWeights = [f64; 2];

pub const PARITY: BitWeights = [1.0, -1.0];

/// Linear estimate `Σ_b p̂_b W(b)` of a group's terms from counts, with the
/// sample variance of `W` divided by the shot count.
pub fn group_estimate(counts: &Counts, group: &MeasurementGroup, weights: &[BitWeights]) -> Estimate {
    let w = counts.width();
    let value = |k: usize| -> f64 {
        group
            .terms
            .iter()
            .map(|t| {
                let prod: f64 = t
                    .axes
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p != Pauli::I)
                    .map(|(q, _)| weights[q][(k >> (w - 1 - q)) & 1])
                    .product();
                t.coefficient.re * prod
            })
            .sum()
    };
    let n = counts.shots() as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, c) in counts.iter() {
        let v = value(k);
        m1 += c as f64 * v / n;
        m2 += c as f64 * v * v / n;
    }
    Estimate {
        mean: m1,
        variance: (m2 - m1 * m1).max(0.0) / n,
    }
}

/// Sample every measurement group of `observable` from `state`.
pub fn sample_groups<R: Rng>(
    state: &State,
    groups: &[MeasurementGroup],
    shots: &[u64],
    readout: &[ReadoutError],
    rng: &mut R,
) -> Result<Vec<Counts>> {
    let width = state.width();
    groups
        .iter()
        .zip(shots)
        .map(|(g, &n)| {
            let mut rotated = state.clone();
            rotated.evolve(&g.rotation()?)?;
            sample(&rotated.probabilities(), width, n, readout, rng)
        })
        .collect()
}

/// Shot-based estimate of `⟨H⟩` with plain parity weights.
pub fn estimate_by_sampling<R: Rng>(
    state: &State,
    observable: &PauliSum,
    total_shots: u64,
    readout: &[ReadoutError],
    rng: &mut R,
) -> Result<Estimate> {
    check_observable(observable, state.width())?;
    let (groups, offset) = measurement_groups(observable);
    if groups.is_empty() {
        return Ok(Estimate {
            mean: offset,
            variance: 0.0,
        });
    }
    let shots = allocate_shots(&groups, total_shots, MIN_SHOTS_PER_GROUP);
    let counts = sample_groups(state, &groups, &shots, readout, rng)?;
    let weights = vec![PARITY; state.width()];
    Ok(groups.iter().zip(&counts).fold(
        Estimate {
            mean: offset,
            variance: 0.0,
        },
        |acc, (g, c)| {
            let e = group_estimate(c, g, &weights);
            Estimate {
                mean: acc.mean + e.mean,
                variance: acc.variance + e.variance,
            }
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::random_circuit;
    use crate::pauli::PauliSum;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sum(items: &[(f64, &str)]) -> PauliSum {
        let v: Vec<(C, &str)> = items.iter().map(|(c, s)| (C::new(*c, 0.0), *s)).collect();
        PauliSum::from_strs(&v).unwrap()
    }

    fn random_pauli_sum<R: Rng>(width: usize, n: usize, rng: &mut R) -> PauliSum {
        let letters = ['I', 'X', 'Y', 'Z'];
        let owned: Vec<(C, String)> = (0..n)
            .map(|_| {
                let s: String = (0..width).map(|_| letters[rng.gen_range(0..4)]).collect();
                (C::new(rng.gen_range(-1.0..1.0), 0.0), s)
            })
            .collect();
        let refs: Vec<(C, &str)> = owned.iter().map(|(c, s)| (*c, s.as_str())).collect();
        PauliSum::from_strs(&refs).unwrap()
    }

    #[test]
    fn empty_and_single_x() {
        let psi = run_statevector(&Circuit::new(3)).unwrap();
        assert_eq!(psi.amplitudes()[0], C::new(1.0, 0.0));
        let mut c = Circuit::new(2);
        c.push_fixed(GateKind::X, &[0]).unwrap();
        let psi = run_statevector(&c).unwrap();
        assert!((psi.amplitudes()[0b10] - C::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_circuits_are_unitary_and_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let c = random_circuit(6, 60, &mut rng).unwrap();
            let psi = run_statevector(&c).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-12);
            let u = unitary(&c).unwrap();
            for (r, a) in psi.amplitudes().iter().enumerate() {
                assert!((u[(r, 0)] - a).norm() < 1e-12);
            }
            let ud = u.adjoint() * &u;
            assert!((ud - CMatrix::identity(64, 64)).norm() < 1e-10);
        }
    }

    #[test]
    fn expectation_examples() {
        let psi = run_statevector(&Circuit::new(1)).unwrap();
        assert!((psi.expectation(&sum(&[(1.0, "Z")])).unwrap() - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        let h = sum(&[(0.7, "XYZ"), (-0.2, "ZII"), (1.1, "IIY")]);
        assert!(mixed.expectation(&h).unwrap().abs() < 1e-15);
        let bad = PauliSum::from_strs(&[(C::new(0.0, 1.0), "X")]).unwrap();
        assert!(matches!(psi.expectation(&bad), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn expectation_matches_dense_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let c = random_circuit(4, 30, &mut rng).unwrap();
            let h = random_pauli_sum(4, 8, &mut rng);
            let psi = run_statevector(&c).unwrap();
            let v = nalgebra::DVector::from_vec(psi.amplitudes().to_vec());
            let dense = (v.adjoint() * h.to_matrix().unwrap() * &v)[(0, 0)].re;
            assert!((psi.expectation(&h).unwrap() - dense).abs() < 1e-10);
            let rho = psi.to_density();
            assert!((rho.expectation(&h).unwrap() - dense).abs() < 1e-10);
        }
    }

    #[test]
    fn noiseless_density_matches_statevector() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_circuit(5, 50, &mut rng).unwrap();
        let rho = run_density(&c, &NoiseModel::ideal()).unwrap();
        let pure = run_statevector(&c).unwrap().to_density();
        let diff: f64 = rho.data.iter().zip(&pure.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn full_depolarization_gives_maximally_mixed_pair() {
        let mut c = Circuit::new(2);
        c.push_rotation(GateKind::RY, 0, 1.0).unwrap();
        c.push_fixed(GateKind::ECR, &[0, 1]).unwrap();
        let rho = run_density(&c, &NoiseModel::depolarizing(1.0).unwrap()).unwrap();
        let m = rho.to_matrix();
        assert!((m - CMatrix::identity(4, 4) * C::new(0.25, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn depolarizing_on_pair_traces_only_that_pair() {
        // |1⟩ on qubit 2 survives depolarizing of qubits 0 and 1
        let mut c = Circuit::new(3);
        c.push_fixed(GateKind::X, &[2]).unwrap();
        c.push_fixed(GateKind::CZ, &[0, 1]).unwrap();
        let rho = run_density(&c, &NoiseModel::depolarizing(1.0).unwrap()).unwrap();
        let z2 = sum(&[(1.0, "IIZ")]);
        assert!((rho.expectation(&z2).unwrap() + 1.0).abs() < 1e-12);
        assert!((rho.trace() - C::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn purity_falls_with_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = random_circuit(4, 40, &mut rng).unwrap();
        let mut last = f64::INFINITY;
        for p in [0.0, 0.01, 0.05, 0.1] {
            let rho = run_density(&c, &NoiseModel::depolarizing(p).unwrap()).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-10);
            assert!(rho.min_eigenvalue().unwrap() > -1e-9);
            let purity = rho.purity();
            assert!(purity < last);
            last = purity;
        }
    }

    #[test]
    fn idle_relaxation_decays_excited_qubit() {
        // qubit 1 sits excited while qubit 0 runs a long gate sequence
        let mut c = Circuit::new(2);
        c.push_fixed(GateKind::SX, &[1]).unwrap();
        c.push_fixed(GateKind::SX, &[1]).unwrap();
        for _ in 0..100 {
            c.push_fixed(GateKind::SX, &[0]).unwrap();
        }
        let idle = IdleNoise {
            t1_us: 10.0,
            t2_us: 15.0,
            durations: GateDurations::default(),
        };
        let noise = NoiseModel {
            idle: Some(idle),
            ..NoiseModel::ideal()
        };
        let rho = run_density(&c, &noise).unwrap();
        let (gamma, _) = idle.channel(100.0 * 60.0 - 120.0);
        // ⟨Z⟩ on qubit 1 relaxes from −1 toward +1
        let z = rho.expectation(&sum(&[(1.0, "IZ")])).unwrap();
        assert!((z - (2.0 * gamma - 1.0)).abs() < 1e-10);
        let quiet = NoiseModel {
            idle_suppression: 1.0,
            ..noise.clone()
        };
        let z = run_density(&c, &quiet).unwrap().expectation(&sum(&[(1.0, "IZ")])).unwrap();
        assert!((z + 1.0).abs() < 1e-12);
        assert!(IdleNoise { t1_us: 1.0, t2_us: 3.0, durations: GateDurations::default() }
            .validate()
            .is_err());
    }

    #[test]
    fn dephasing_uses_t2() {
        let idle = IdleNoise {
            t1_us: 100.0,
            t2_us: 50.0,
            durations: GateDurations::default(),
        };
        let mut rho = DensityMatrix::zero_state(1).unwrap();
        rho.apply_unitary1(0, &crate::circuits::single_qubit_matrix(GateKind::RY, std::f64::consts::FRAC_PI_2).unwrap());
        let (g, coh) = idle.channel(10_000.0);
        rho.relax(0, g, coh);
        let x = rho.expectation(&sum(&[(1.0, "X")])).unwrap();
        assert!((x - (-10.0f64 / 50.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn schedule_places_frames_at_next_pulse() {
        let mut c = Circuit::new(2);
        c.push_fixed(GateKind::SX, &[1]).unwrap();
        c.push_fixed(GateKind::X, &[0]).unwrap();
        c.push_fixed(GateKind::ECR, &[0, 1]).unwrap();
        let (starts, end) = schedule(&c, &GateDurations::default());
        assert_eq!(starts, vec![0.0, 60.0, 60.0]);
        assert_eq!(end, 720.0);
    }

    #[test]
    fn fidelity_formula() {
        assert_eq!(depolarizing_gate_fidelity(0.0).unwrap(), 1.0);
        assert!((depolarizing_gate_fidelity(1.0).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(depolarizing_gate_fidelity(1.5).is_err());
        let p = depolarizing_from_fidelity(0.99).unwrap();
        assert!((depolarizing_gate_fidelity(p).unwrap() - 0.99).abs() < 1e-15);
    }

    #[test]
    fn fidelity_matches_process_matrix() {
        // entanglement fidelity ⟨Φ|(I⊗E)(|Φ⟩⟨Φ|)|Φ⟩ on a 4-qubit Choi state
        for p in [0.0, 0.1, 0.5, 1.0] {
            let mut c = Circuit::new(4);
            for q in 0..2 {
                c.push_rotation(GateKind::RY, q, std::f64::consts::FRAC_PI_2).unwrap();
                c.push_fixed(GateKind::CNOT, &[q, q + 2]).unwrap();
            }
            let bell = run_statevector(&c).unwrap();
            let mut rho = bell.to_density();
            rho.depolarize_pair(2, 3, p);
            let v = nalgebra::DVector::from_vec(bell.amplitudes().to_vec());
            let f = (v.adjoint() * rho.to_matrix() * &v)[(0, 0)].re;
            assert!((f - depolarizing_gate_fidelity(p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = run_statevector(&Circuit::new(3)).unwrap();
        let counts = sample(&psi.probabilities(), 3, 500, &[], &mut rng).unwrap();
        assert_eq!(counts.get(0), 500);
        assert_eq!(counts.bitstring(0b011), "011");
        assert!(sample(&psi.probabilities(), 3, 0, &[], &mut rng).is_err());

        let mut c = Circuit::new(1);
        c.push_fixed(GateKind::X, &[0]).unwrap();
        let one = run_statevector(&c).unwrap();
        let r = [ReadoutError::new(0.0148, 0.0).unwrap()];
        let counts = sample(&one.probabilities(), 1, 1_000_000, &r, &mut rng).unwrap();
        let frac = counts.get(0) as f64 / 1e6;
        assert!((frac - 0.0148).abs() < 0.0004, "{frac}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_circuit(4, 30, &mut rng).unwrap();
        let probs = run_statevector(&c).unwrap().probabilities();
        let r = vec![ReadoutError::new(0.02, 0.01).unwrap(); 4];
        let a = sample(&probs, 4, 4096, &r, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = sample(&probs, 4, 4096, &r, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shots(), 4096);
    }

    #[test]
    fn basis_rotations_measure_x_and_y() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let c = random_circuit(3, 25, &mut rng).unwrap();
            let state = State::Pure(run_statevector(&c).unwrap());
            for axes in ["XII", "IYI", "XYZ", "YYX", "ZIX"] {
                let h = sum(&[(1.0, axes)]);
                let (groups, _) = measurement_groups(&h);
                let mut rotated = state.clone();
                rotated.evolve(&groups[0].rotation().unwrap()).unwrap();
                let probs = rotated.probabilities();
                let (x, z, _) = groups[0].terms[0].masks();
                let mask = x | z;
                let from_probs: f64 = probs
                    .iter()
                    .enumerate()
                    .map(|(k, p)| if (k & mask).count_ones() % 2 == 0 { *p } else { -p })
                    .sum();
                assert!((from_probs - state.expectation(&h).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shot_estimate_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut within = 0;
        let trials = 100;
        for t in 0..trials {
            let c = random_circuit(3, 20, &mut rng).unwrap();
            let state = State::Pure(run_statevector(&c).unwrap());
            let h = sum(&[(1.0, ["XYZ", "ZZI", "IXI", "YIY"][t % 4])]);
            let exact = state.expectation(&h).unwrap();
            let est = estimate_by_sampling(&state, &h, 4096, &[], &mut rng).unwrap();
            if (est.mean - exact).abs() <= 4.0 / 64.0 {
                within += 1;
            }
        }
        assert!(within >= 99);
    }

    #[test]
    fn groups_and_allocation() {
        let h = sum(&[(1.0, "ZZI"), (0.5, "IZZ"), (2.0, "XXI"), (3.0, "III")]);
        let (groups, offset) = measurement_groups(&h);
        assert_eq!(offset, 3.0);
        assert_eq!(groups.len(), 2);
        let shots = allocate_shots(&groups, 350, 64);
        assert_eq!(shots.iter().sum::<u64>(), 350);
        let tiny = allocate_shots(&groups, 10, 64);
        assert!(tiny.iter().all(|&n| n == 64));
    }

    #[test]
    fn brisbane_preset_values() {
        let n = NoiseModel::ibm_brisbane();
        let f = depolarizing_gate_fidelity(n.depolarizing_p).unwrap();
        assert!((f - (1.0 - 0.008471)).abs() < 1e-12);
        assert_eq!(n.readout_for(4).p0_given1, 0.0148);
        assert!(n.validate().is_ok());
        assert!(NoiseModel::preset("nope").is_err());
    }
}
