//! Effective anharmonic phonon Hamiltonian `H_eff = H3 + H4`.
//!
//! Terms are built in ladder-operator form from the displacement operators
//! `u_λ = a†_λ + a_λ` (negative-momentum partners are identified with their
//! positive modes), then mapped to qubits with the one-hot encoding.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bosonic::{
    embed, hermitian_eigenvalues, hermitian_ground_state, vacuum_expectation, wick_expectation, CMatrix,
    FockSpace, LadderOp,
    LadderProduct,
};
use crate::error::{invalid, Error, Result};
use crate::pauli::{encode_product, occupancy_projector, project_one_hot, EncodingLayout, PauliSum};

const FREQ_TOL: f64 = 1e-12;

/// Interaction order of a coupling constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Three,
    Four,
}

impl Order {
    pub fn arity(self) -> usize {
        match self {
            Order::Three => 3,
            Order::Four => 4,
        }
    }
}

/// `H^(n) = G · Φ / √(Π ω)` when the process conserves momentum and energy,
/// zero otherwise.
pub fn coupling_constant(
    order: Order,
    force_constant: f64,
    frequencies: &[f64],
    normalizer: f64,
    conserved: bool,
) -> Result<f64> {
    if frequencies.len() != order.arity() {
        return Err(invalid(format!(
            "order-{} coupling needs {} frequencies, got {}",
            order.arity(),
            order.arity(),
            frequencies.len()
        )));
    }
    if frequencies.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(invalid("mode frequencies must be positive"));
    }
    if !conserved {
        return Ok(0.0);
    }
    let prod: f64 = frequencies.iter().product();
    Ok(normalizer * force_constant / prod.sqrt())
}

/// Phonon modes and their anharmonic couplings.
///
/// Couplings are keyed by sorted mode tuples; each unordered tuple
/// contributes once to the Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhononSystem {
    frequencies: Vec<f64>,
    normalizer: f64,
    coupling3: BTreeMap<[usize; 3], f64>,
    coupling4: BTreeMap<[usize; 4], f64>,
}

impl PhononSystem {
    /// Build a system from force constants Φ. Couplings of processes that do
    /// not conserve energy are zero.
    pub fn from_force_constants(
        frequencies: Vec<f64>,
        normalizer: f64,
        phi3: &[([usize; 3], f64)],
        phi4: &[([usize; 4], f64)],
    ) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(invalid("at least one phonon mode is required"));
        }
        if frequencies.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(invalid("mode frequencies must be positive"));
        }
        let n = frequencies.len();
        let mut sys = Self {
            frequencies,
            normalizer,
            coupling3: BTreeMap::new(),
            coupling4: BTreeMap::new(),
        };
        for (modes, phi) in phi3 {
            let key = sorted(*modes);
            check_modes(&key, n)?;
            let freqs: Vec<f64> = key.iter().map(|&m| sys.frequencies[m]).collect();
            let h = coupling_constant(Order::Three, *phi, &freqs, normalizer, sys.conserves_triple(key))?;
            *sys.coupling3.entry(key).or_insert(0.0) += h;
        }
        for (modes, phi) in phi4 {
            let key = sorted(*modes);
            check_modes(&key, n)?;
            let freqs: Vec<f64> = key.iter().map(|&m| sys.frequencies[m]).collect();
            let h = coupling_constant(Order::Four, *phi, &freqs, normalizer, sys.conserves_quadruple(key))?;
            *sys.coupling4.entry(key).or_insert(0.0) += h;
        }
        Ok(sys)
    }

    /// Three phonons, ω = (1.0, 0.5, 0.5), Φ = 1 for the splitting triple
    /// and `G = 1`.
    pub fn toy_model() -> Self {
        Self::from_force_constants(vec![1.0, 0.5, 0.5], 1.0, &[([0, 1, 2], 1.0)], &[])
            .expect("toy model is valid")
    }

    pub fn n_phonons(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn coupling3(&self) -> &BTreeMap<[usize; 3], f64> {
        &self.coupling3
    }

    pub fn coupling4(&self) -> &BTreeMap<[usize; 4], f64> {
        &self.coupling4
    }

    /// Multiply every coupling by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coupling3.values_mut().for_each(|h| *h *= s);
        out.coupling4.values_mut().for_each(|h| *h *= s);
        out
    }

    /// One mode's energy equals the sum of the other two (splitting or
    /// combining).
    pub fn conserves_triple(&self, modes: [usize; 3]) -> bool {
        let w = modes.map(|m| self.frequencies[m]);
        (0..3).any(|i| {
            let rest: f64 = (0..3).filter(|&j| j != i).map(|j| w[j]).sum();
            (w[i] - rest).abs() < FREQ_TOL
        })
    }

    /// Some 2+2 or 1+3 partition of the four modes balances in energy.
    pub fn conserves_quadruple(&self, modes: [usize; 4]) -> bool {
        let w = modes.map(|m| self.frequencies[m]);
        let total: f64 = w.iter().sum();
        // each non-trivial subset against its complement
        (1u32..15).any(|mask| {
            let part: f64 = (0..4).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).sum();
            (2.0 * part - total).abs() < FREQ_TOL
        })
    }

    pub fn fock_space(&self, levels: usize) -> Result<FockSpace> {
        FockSpace::new(self.n_phonons(), levels)
    }

    pub fn layout(&self, levels: usize) -> Result<EncodingLayout> {
        EncodingLayout::new(self.n_phonons(), levels)
    }
}

fn sorted<const N: usize>(mut modes: [usize; N]) -> [usize; N] {
    modes.sort_unstable();
    modes
}

fn check_modes(modes: &[usize], n: usize) -> Result<()> {
    match modes.iter().find(|&&m| m >= n) {
        Some(&m) => Err(Error::OutOfRange { index: m, limit: n }),
        None => Ok(()),
    }
}

/// All `2^k` products obtained by expanding `Π (a†_m + a_m)`, in binary
/// order with creation first.
fn displacement_expansion(modes: &[usize], coefficient: f64) -> Vec<LadderProduct> {
    let k = modes.len();
    (0..1usize << k)
        .map(|bits| {
            let factors = modes
                .iter()
                .enumerate()
                .map(|(pos, &m)| {
                    if bits >> (k - 1 - pos) & 1 == 0 {
                        LadderOp::create(m)
                    } else {
                        LadderOp::annihilate(m)
                    }
                })
                .collect();
            LadderProduct::new(Complex64::new(coefficient, 0.0), factors)
        })
        .collect()
}

/// Cubic anharmonic terms: 8 products per admitted triple.
pub fn build_h3(system: &PhononSystem) -> Vec<LadderProduct> {
    system
        .coupling3
        .iter()
        .filter(|(modes, h)| **h != 0.0 && system.conserves_triple(**modes))
        .flat_map(|(modes, h)| displacement_expansion(modes, *h))
        .collect()
}

/// Quartic anharmonic terms: 16 products per admitted quadruple.
pub fn build_h4(system: &PhononSystem) -> Vec<LadderProduct> {
    system
        .coupling4
        .iter()
        .filter(|(modes, h)| **h != 0.0 && system.conserves_quadruple(**modes))
        .flat_map(|(modes, h)| displacement_expansion(modes, *h))
        .collect()
}

/// `H3 + H4` in ladder form.
pub fn build_effective(system: &PhononSystem) -> Vec<LadderProduct> {
    let mut terms = build_h3(system);
    terms.extend(build_h4(system));
    terms
}

/// Direct Fock-space matrix of a list of ladder products.
pub fn fock_matrix(terms: &[LadderProduct], space: &FockSpace) -> Result<CMatrix> {
    let d = space.dimension();
    terms
        .iter()
        .try_fold(CMatrix::zeros(d, d), |acc, t| Ok(acc + embed(t, space)?))
}

/// Qubit Hamiltonian with its encoding and leakage penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedHamiltonian {
    /// Physical part plus penalty; the operator that is minimised.
    pub pauli: PauliSum,
    /// Encoded `H_eff` without the penalty.
    pub physical: PauliSum,
    pub layout: EncodingLayout,
    pub penalty_weight: f64,
}

impl MappedHamiltonian {
    pub fn width(&self) -> usize {
        self.layout.n_qubits()
    }
}

/// `Σ_m (Σ_n P_{m,n} − 1)²`, zero exactly on one-hot states and at least 1
/// on every other basis state.
pub fn one_hot_penalty(layout: &EncodingLayout) -> Result<PauliSum> {
    let w = layout.n_qubits();
    let mut out = PauliSum::zero(w);
    for m in 0..layout.n_phonons() {
        let mut occ = PauliSum::identity(w).scale(Complex64::new(-1.0, 0.0));
        for n in 0..layout.levels_per_phonon() {
            occ = occ.add(&occupancy_projector(w, layout.qubit_index(m, n)))?;
        }
        let occ = occ.simplify();
        out = out.add(&occ.mul(&occ)?)?;
    }
    Ok(out.simplify())
}

/// Default penalty weight: ten times the coefficient one-norm of `H_eff`.
pub fn default_penalty_weight(physical: &PauliSum) -> f64 {
    10.0 * physical.one_norm()
}

/// Encode ladder terms as a Pauli sum and add the leakage penalty.
pub fn map_hamiltonian(
    terms: &[LadderProduct],
    layout: &EncodingLayout,
    penalty_weight: f64,
) -> Result<MappedHamiltonian> {
    if !(penalty_weight >= 0.0) || !penalty_weight.is_finite() {
        return Err(invalid("penalty weight must be finite and non-negative"));
    }
    let w = layout.n_qubits();
    let mut physical = PauliSum::zero(w);
    for t in terms {
        physical = physical.add(&encode_product(t, layout)?)?;
    }
    let physical = physical.simplify();
    physical.ensure_hermitian()?;
    let pauli = if penalty_weight > 0.0 {
        physical
            .add(&one_hot_penalty(layout)?.scale(Complex64::new(penalty_weight, 0.0)))?
            .simplify()
    } else {
        physical.clone()
    };
    Ok(MappedHamiltonian {
        pauli,
        physical,
        layout: *layout,
        penalty_weight,
    })
}

/// Toy system mapped with two levels per phonon and the default penalty.
pub fn toy_hamiltonian() -> MappedHamiltonian {
    let sys = PhononSystem::toy_model();
    let layout = sys.layout(2).expect("valid layout");
    let terms = build_effective(&sys);
    let physical = map_hamiltonian(&terms, &layout, 0.0).expect("toy model maps");
    map_hamiltonian(&terms, &layout, default_penalty_weight(&physical.physical)).expect("toy model maps")
}

/// Smallest eigenvalue of a Pauli sum by dense diagonalisation.
pub fn ground_energy(op: &PauliSum) -> Result<f64> {
    op.ensure_hermitian()?;
    if op.width() == 0 {
        return Ok(op.identity_coefficient().re);
    }
    let m = op.to_matrix()?;
    Ok(hermitian_eigenvalues(&m)?[0])
}

/// Ground energy of the full mapped operator (penalty included).
pub fn exact_ground_energy(h: &MappedHamiltonian) -> Result<f64> {
    ground_energy(&h.pauli)
}

/// Ground energy of the physical part restricted to the one-hot subspace.
pub fn subspace_ground_energy(h: &MappedHamiltonian) -> Result<f64> {
    let m = project_one_hot(&h.physical.to_matrix()?, &h.layout);
    Ok(hermitian_eigenvalues(&m)?[0])
}

/// Full spectrum of a Hermitian Pauli sum, ascending.
pub fn spectrum(op: &PauliSum) -> Result<Vec<f64>> {
    op.ensure_hermitian()?;
    hermitian_eigenvalues(&op.to_matrix()?)
}

/// Real part of `⟨f| H |i⟩` between Fock basis states.
pub fn fock_transition(
    terms: &[LadderProduct],
    space: &FockSpace,
    initial: &[usize],
    final_state: &[usize],
) -> Result<Complex64> {
    let m = fock_matrix(terms, space)?;
    Ok(m[(space.index_of(final_state)?, space.index_of(initial)?)])
}

/// Zero-temperature structural element `|⟨f|H3|i⟩|²` of the splitting
/// `λ → λ1 + λ2`: the initial state holds one quantum in `λ`, the final
/// state one in each of `λ1` and `λ2`.
pub fn splitting_structural_element(
    system: &PhononSystem,
    levels: usize,
    decaying: usize,
    products: [usize; 2],
) -> Result<f64> {
    let space = system.fock_space(levels)?;
    let n = system.n_phonons();
    for &m in [decaying, products[0], products[1]].iter() {
        if m >= n {
            return Err(Error::OutOfRange { index: m, limit: n });
        }
    }
    let mut initial = vec![0; n];
    initial[decaying] += 1;
    let mut final_state = vec![0; n];
    final_state[products[0]] += 1;
    final_state[products[1]] += 1;
    let element = fock_transition(&build_h3(system), &space, &initial, &final_state)?;
    Ok(element.norm_sqr())
}

/// Fermi-golden-rule weight of a splitting process:
/// `n_λ (1 + n_λ1)(1 + n_λ2) · |H3|² · structural`.
pub fn matrix_element_splitting(
    occupations: [f64; 3],
    coupling_sq: f64,
    structural: f64,
) -> Result<f64> {
    if occupations.iter().any(|&n| !(n >= 0.0)) {
        return Err(invalid("occupation numbers must be non-negative"));
    }
    if !(coupling_sq >= 0.0) || !(structural >= 0.0) {
        return Err(invalid("squared matrix elements must be non-negative"));
    }
    let [n, n1, n2] = occupations;
    Ok(n * (1.0 + n1) * (1.0 + n2) * coupling_sq * structural)
}

/// Vacuum value of a four-operator `H4` term via two-point functions.
pub fn h4_wick_element(ops: &[LadderOp], space: &FockSpace) -> Result<Complex64> {
    wick_expectation(ops, space)
}

/// Direct vacuum value of a four-operator term, for comparison with
/// [`h4_wick_element`].
pub fn h4_direct_element(ops: &[LadderOp], space: &FockSpace) -> Result<Complex64> {
    vacuum_expectation(&LadderProduct::new(Complex64::new(1.0, 0.0), ops.to_vec()), space)
}

/// Restriction of a Hermitian matrix's lowest eigenvector weight to a set of
/// basis indices. Used to check where a ground state lives.
pub fn ground_state_weight(op: &PauliSum, indices: &[usize]) -> Result<f64> {
    let (_, v) = hermitian_ground_state(&op.to_matrix()?)?;
    Ok(indices.iter().map(|&i| v[i].norm_sqr()).sum())
}
