//! Error mitigation: readout inversion, zero-noise extrapolation by gate
//! folding, Pauli twirling and idle-noise suppression.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{transpile_cnot_to_ecr, two_qubit_matrix, Circuit, Gate, GateKind, Mat4};
use crate::engine::{
    allocate_shots, group_estimate, measurement_groups, run_density, sample_groups, BitWeights, Counts, Estimate,
    NoiseModel, ReadoutError, State, MIN_SHOTS_PER_GROUP, PARITY,
};
use crate::error::{invalid, Error, Result};
use crate::pauli::{Pauli, PauliSum};

/// Inverse of a single-qubit confusion matrix.
fn invert_confusion(r: &ReadoutError) -> Result<[[f64; 2]; 2]> {
    let m = r.confusion();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-12 {
        return Err(Error::Singular(format!(
            "confusion matrix with P(0|1)={}, P(1|0)={}",
            r.p0_given1, r.p1_given0
        )));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Apply the tensor-product inverse confusion to the empirical distribution.
/// Negative entries are kept; the result sums to one.
pub fn readout_mitigate(counts: &Counts, confusion: &[ReadoutError]) -> Result<Vec<f64>> {
    let w = counts.width();
    if confusion.len() != w {
        return Err(Error::WidthMismatch {
            left: w,
            right: confusion.len(),
        });
    }
    let mut p = counts.distribution();
    for (q, r) in confusion.iter().enumerate() {
        let inv = invert_confusion(r)?;
        let bit = 1usize << (w - 1 - q);
        for k in (0..p.len()).filter(|k| k & bit == 0) {
            let (a, b) = (p[k], p[k | bit]);
            p[k] = inv[0][0] * a + inv[0][1] * b;
            p[k | bit] = inv[1][0] * a + inv[1][1] * b;
        }
    }
    Ok(p)
}

/// Clip negative quasi-probabilities and renormalise.
pub fn nearest_distribution(quasi: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = quasi.iter().map(|p| p.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    clipped.iter().map(|p| p / total).collect()
}

/// Per-qubit parity weights after readout inversion, `M⁻ᵀ (1, −1)`.
pub fn mitigated_bit_weights(confusion: &[ReadoutError]) -> Result<Vec<BitWeights>> {
    confusion
        .iter()
        .map(|r| {
            let inv = invert_confusion(r)?;
            Ok([inv[0][0] - inv[1][0], inv[0][1] - inv[1][1]])
        })
        .collect()
}

/// Replace every two-qubit gate `G` by `G (G† G)^((scale−1)/2)`.
pub fn fold_gates(circuit: &Circuit, scale: usize) -> Result<Circuit> {
    if scale % 2 == 0 {
        return Err(invalid(format!("fold scale must be odd, got {scale}")));
    }
    let mut out = Circuit::new(circuit.width());
    out.add_global_phase(circuit.global_phase());
    for g in circuit.gates() {
        out.push(g.clone())?;
        if g.kind.is_two_qubit() {
            // every two-qubit kind here is its own inverse
            for _ in 0..scale - 1 {
                out.push(g.clone())?;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extrapolator {
    Linear,
    Quadratic,
    Richardson,
}

impl FromStr for Extrapolator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Extrapolator::Linear),
            "quadratic" => Ok(Extrapolator::Quadratic),
            "richardson" => Ok(Extrapolator::Richardson),
            other => Err(invalid(format!("unknown extrapolator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZneSpec {
    pub scale_factors: Vec<usize>,
    pub extrapolator: Extrapolator,
}

impl Default for ZneSpec {
    fn default() -> Self {
        Self {
            scale_factors: vec![1, 3, 5],
            extrapolator: Extrapolator::Richardson,
        }
    }
}

impl ZneSpec {
    pub fn validate(&self) -> Result<()> {
        let mut s = self.scale_factors.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() < 2 || s.len() != self.scale_factors.len() {
            return Err(invalid("ZNE needs at least two distinct scale factors"));
        }
        if s.iter().any(|f| f % 2 == 0) {
            return Err(invalid("ZNE scale factors must be odd"));
        }
        Ok(())
    }
}

/// Weights `w` with `extrapolated = Σ wᵢ yᵢ` for values at `scales`.
pub fn extrapolation_weights(scales: &[f64], extrapolator: Extrapolator) -> Result<Vec<f64>> {
    let n = scales.len();
    for (i, a) in scales.iter().enumerate() {
        if scales[..i].iter().any(|b| (a - b).abs() < 1e-12) {
            return Err(invalid("scale factors must be distinct"));
        }
    }
    let degree = match extrapolator {
        Extrapolator::Linear => 1,
        Extrapolator::Quadratic => 2,
        Extrapolator::Richardson => n.saturating_sub(1),
    };
    if n < 2 || n < degree + 1 {
        return Err(invalid(format!("{n} points cannot fit a degree-{degree} model")));
    }
    if extrapolator == Extrapolator::Richardson {
        return Ok((0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| scales[j] / (scales[j] - scales[i]))
                    .product()
            })
            .collect());
    }
    let a = DMatrix::from_fn(n, degree + 1, |i, j| scales[i].powi(j as i32));
    let normal = a.transpose() * &a;
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::Singular("extrapolation normal equations".into()))?;
    let row = (inv * a.transpose()).row(0).transpose();
    Ok(row.iter().copied().collect())
}

/// Fitted model at zero noise.
pub fn zne_extrapolate(points: &[(f64, f64)], spec: &ZneSpec) -> Result<f64> {
    let scales: Vec<f64> = points.iter().map(|p| p.0).collect();
    let w = extrapolation_weights(&scales, spec.extrapolator)?;
    Ok(w.iter().zip(points).map(|(w, p)| w * p.1).sum())
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

/// For each input pair `P` (index `4a + b`), the pair `Q` and phase `λ` with
/// `G = λ · Q G P`.
type TwirlTable = [((Pauli, Pauli), f64); 16];

fn kron_pauli(a: Pauli, b: Pauli) -> Mat4 {
    let (ma, mb) = (a.matrix(), b.matrix());
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = ma[r / 2][c / 2] * mb[r % 2][c % 2];
        }
    }
    out
}

fn mul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = (0..4).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

fn adjoint4(a: &Mat4) -> Mat4 {
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = a[c][r].conj();
        }
    }
    out
}

fn build_table(kind: GateKind) -> Result<TwirlTable> {
    let g = two_qubit_matrix(kind)?;
    let gd = adjoint4(&g);
    let mut table = [((Pauli::I, Pauli::I), 1.0); 16];
    for (idx, slot) in table.iter_mut().enumerate() {
        let p = kron_pauli(PAULIS[idx / 4], PAULIS[idx % 4]);
        let conj = mul4(&mul4(&g, &p), &gd);
        let mut found = None;
        for qa in PAULIS {
            for qb in PAULIS {
                let q = kron_pauli(qa, qb);
                // λ = Tr(Q · G P G†) / 4
                let lam: Complex64 = (0..4).map(|r| (0..4).map(|k| q[r][k] * conj[k][r]).sum::<Complex64>()).sum::<Complex64>() / 4.0;
                if (lam.norm() - 1.0).abs() < 1e-9 {
                    if lam.im.abs() > 1e-9 {
                        return Err(invalid(format!("{} maps a Pauli to a non-Hermitian phase", kind.name())));
                    }
                    found = Some(((qa, qb), lam.re.signum()));
                }
            }
        }
        *slot = found.ok_or_else(|| invalid(format!("{} is not a Clifford gate", kind.name())))?;
    }
    Ok(table)
}

fn twirl_table(kind: GateKind) -> Result<&'static TwirlTable> {
    static TABLES: OnceLock<HashMap<GateKind, TwirlTable>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        [GateKind::CNOT, GateKind::CZ, GateKind::ECR]
            .into_iter()
            .map(|k| (k, build_table(k).expect("built-in gates are Clifford")))
            .collect()
    });
    tables
        .get(&kind)
        .ok_or_else(|| invalid(format!("no twirling table for {}", kind.name())))
}

fn pauli_gate(p: Pauli) -> Option<GateKind> {
    match p {
        Pauli::I => None,
        Pauli::X => Some(GateKind::X),
        Pauli::Y => Some(GateKind::Y),
        Pauli::Z => Some(GateKind::Z),
    }
}

/// Conjugate every two-qubit gate by a random Pauli pair from its twirling
/// group; the ideal action is unchanged, phase included.
pub fn pauli_twirl<R: Rng>(circuit: &Circuit, rng: &mut R) -> Result<Circuit> {
    let mut out = Circuit::new(circuit.width());
    out.add_global_phase(circuit.global_phase());
    for g in circuit.gates() {
        if !g.kind.is_two_qubit() {
            out.push(g.clone())?;
            continue;
        }
        let table = twirl_table(g.kind)?;
        let idx = rng.gen_range(0..16);
        let (pa, pb) = (PAULIS[idx / 4], PAULIS[idx % 4]);
        let ((qa, qb), lam) = table[idx];
        let (a, b) = (g.qubits[0], g.qubits[1]);
        for (p, q) in [(pa, a), (pb, b)] {
            if let Some(k) = pauli_gate(p) {
                out.push(Gate::fixed(k, &[q]))?;
            }
        }
        out.push(g.clone())?;
        for (p, q) in [(qa, a), (qb, b)] {
            if let Some(k) = pauli_gate(p) {
                out.push(Gate::fixed(k, &[q]))?;
            }
        }
        if lam < 0.0 {
            out.add_global_phase(std::f64::consts::PI);
        }
    }
    Ok(out)
}

/// Strategies applied by [`mitigated_energy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationPlan {
    #[serde(default)]
    pub readout: bool,
    #[serde(default)]
    pub zne: bool,
    #[serde(default)]
    pub twirling: bool,
    #[serde(default)]
    pub dynamical_decoupling: bool,
    #[serde(default)]
    pub zne_spec: ZneSpec,
    #[serde(default = "default_twirl_samples")]
    pub twirl_samples: usize,
    /// Fraction of idle relaxation removed by decoupling.
    #[serde(default = "default_dd_suppression")]
    pub dd_suppression: f64,
}

fn default_twirl_samples() -> usize {
    8
}
fn default_dd_suppression() -> f64 {
    1.0
}

impl Default for MitigationPlan {
    fn default() -> Self {
        Self::none()
    }
}

impl MitigationPlan {
    pub fn none() -> Self {
        Self {
            readout: false,
            zne: false,
            twirling: false,
            dynamical_decoupling: false,
            zne_spec: ZneSpec::default(),
            twirl_samples: default_twirl_samples(),
            dd_suppression: default_dd_suppression(),
        }
    }

    pub fn all() -> Self {
        Self {
            readout: true,
            zne: true,
            twirling: true,
            dynamical_decoupling: true,
            ..Self::none()
        }
    }

    /// The six configurations of the mitigation study.
    pub fn strategies() -> Vec<(&'static str, MitigationPlan)> {
        let only = |f: fn(&mut MitigationPlan)| {
            let mut p = MitigationPlan::none();
            f(&mut p);
            p
        };
        vec![
            ("none", MitigationPlan::none()),
            ("readout", only(|p| p.readout = true)),
            ("twirl", only(|p| p.twirling = true)),
            ("dd", only(|p| p.dynamical_decoupling = true)),
            ("zne", only(|p| p.zne = true)),
            ("all", MitigationPlan::all()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.twirling && self.twirl_samples < 1 {
            return Err(invalid("twirling needs at least one sample"));
        }
        if !(0.0..=1.0).contains(&self.dd_suppression) {
            return Err(invalid("decoupling suppression outside [0, 1]"));
        }
        if self.zne {
            self.zne_spec.validate()?;
        }
        Ok(())
    }
}

/// Estimate `⟨observable⟩` at `params` under `noise` with the strategies in
/// `plan`. `total_shots` is split evenly over twirl samples and scale
/// factors.
pub fn mitigated_energy(
    params: &[f64],
    ansatz: &Circuit,
    observable: &PauliSum,
    noise: &NoiseModel,
    plan: &MitigationPlan,
    total_shots: u64,
    seed: u64,
) -> Result<Estimate> {
    plan.validate()?;
    noise.validate()?;
    observable.ensure_hermitian()?;
    let width = ansatz.width();
    let circuit = transpile_cnot_to_ecr(&ansatz.bind(params)?)?;
    let mut noise = noise.clone();
    if plan.dynamical_decoupling {
        noise.idle_suppression = plan.dd_suppression;
    }
    let confusion = noise.readout_for_width(width)?;
    let ideal_readout = confusion.iter().all(|r| r.is_ideal());
    let weights = if plan.readout && !ideal_readout {
        mitigated_bit_weights(&confusion)?
    } else {
        vec![PARITY; width]
    };
    let readout = if ideal_readout { Vec::new() } else { confusion };
    let (groups, offset) = measurement_groups(observable);
    let twirls = if plan.twirling { plan.twirl_samples } else { 1 };
    let scales: Vec<usize> = if plan.zne { plan.zne_spec.scale_factors.clone() } else { vec![1] };
    let variants = (twirls * scales.len()) as u64;
    let per_variant = (total_shots / variants).max(1);
    let shots = allocate_shots(&groups, per_variant, MIN_SHOTS_PER_GROUP);

    let jobs: Vec<(usize, usize)> = (0..scales.len()).flat_map(|s| (0..twirls).map(move |t| (s, t))).collect();
    let results: Vec<Estimate> = jobs
        .par_iter()
        .map(|&(si, ti)| -> Result<Estimate> {
            let stream = (si * twirls + ti) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let base = if plan.twirling { pauli_twirl(&circuit, &mut rng)? } else { circuit.clone() };
            let folded = fold_gates(&base, scales[si])?;
            let state = State::Mixed(run_density(&folded, &noise)?);
            if groups.is_empty() {
                return Ok(Estimate { mean: offset, variance: 0.0 });
            }
            let counts = sample_groups(&state, &groups, &shots, &readout, &mut rng)?;
            Ok(groups.iter().zip(&counts).fold(Estimate { mean: offset, variance: 0.0 }, |acc, (g, c)| {
                let e = group_estimate(c, g, &weights);
                Estimate {
                    mean: acc.mean + e.mean,
                    variance: acc.variance + e.variance,
                }
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_scale: Vec<Estimate> = (0..scales.len())
        .map(|si| {
            let chunk = &results[si * twirls..(si + 1) * twirls];
            let n = twirls as f64;
            Estimate {
                mean: chunk.iter().map(|e| e.mean).sum::<f64>() / n,
                variance: chunk.iter().map(|e| e.variance).sum::<f64>() / (n * n),
            }
        })
        .collect();
    if !plan.zne {
        return Ok(per_scale[0]);
    }
    let xs: Vec<f64> = scales.iter().map(|&s| s as f64).collect();
    let w = extrapolation_weights(&xs, plan.zne_spec.extrapolator)?;
    Ok(Estimate {
        mean: w.iter().zip(&per_scale).map(|(w, e)| w * e.mean).sum(),
        variance: w.iter().zip(&per_scale).map(|(w, e)| w * w * e.variance).sum(),
    })
}

/// Average Pauli transfer matrix of a two-qubit unitary channel, used to
/// check that twirling suppresses coherent errors.
pub fn pauli_transfer_matrix(unitaries: &[(Mat4, f64)]) -> DMatrix<f64> {
    let mut ptm = DMatrix::zeros(16, 16);
    let paulis: Vec<Mat4> = (0..16).map(|i| kron_pauli(PAULIS[i / 4], PAULIS[i % 4])).collect();
    for (u, weight) in unitaries {
        let ud = adjoint4(u);
        for (j, pj) in paulis.iter().enumerate() {
            let image = mul4(&mul4(u, pj), &ud);
            for (i, pi) in paulis.iter().enumerate() {
                let tr: Complex64 = (0..4).map(|r| (0..4).map(|k| pi[r][k] * image[k][r]).sum::<Complex64>()).sum();
                ptm[(i, j)] += weight * tr.re / 4.0;
            }
        }
    }
    ptm
}

/// Matrix of a bound circuit restricted to two qubits, for channel checks.
pub fn two_qubit_unitary(circuit: &Circuit) -> Result<Mat4> {
    if circuit.width() != 2 {
        return Err(invalid("expected a two-qubit circuit"));
    }
    let u = crate::engine::unitary(circuit)?;
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r][c] = u[(r, c)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_custom_ansatz, random_circuit};
    use crate::engine::{run_statevector, sample};
    use nalgebra::DVector;

    fn least_squares_check(scales: &[f64], values: &[f64], degree: usize) -> f64 {
        let a = DMatrix::from_fn(scales.len(), degree + 1, |i, j| scales[i].powi(j as i32));
        let y = DVector::from_column_slice(values);
        let coef = (a.transpose() * &a).try_inverse().expect("well posed") * a.transpose() * y;
        coef[0]
    }

    fn fidelity(a: &Circuit, b: &Circuit) -> f64 {
        let (x, y) = (run_statevector(a).unwrap(), run_statevector(b).unwrap());
        x.amplitudes().iter().zip(y.amplitudes()).map(|(p, q)| p.conj() * q).sum::<Complex64>().norm_sqr()
    }

    #[test]
    fn identity_confusion_leaves_distribution() {
        let mut counts = Counts::new(2);
        counts.record(0b01, 30);
        counts.record(0b10, 70);
        let q = readout_mitigate(&counts, &[ReadoutError::ideal(); 2]).unwrap();
        assert_eq!(q, counts.distribution());
    }

    #[test]
    fn inversion_undoes_exact_forward_model() {
        let r = [ReadoutError::new(0.0148, 0.0108).unwrap(), ReadoutError::new(0.03, 0.02).unwrap()];
        let truth = [0.1, 0.2, 0.3, 0.4];
        let mut noisy = [0.0; 4];
        for (t, p) in truth.iter().enumerate() {
            for (m, slot) in noisy.iter_mut().enumerate() {
                let f0 = r[0].confusion()[(m >> 1) & 1][(t >> 1) & 1];
                let f1 = r[1].confusion()[m & 1][t & 1];
                *slot += f0 * f1 * p;
            }
        }
        let mut counts = Counts::new(2);
        let scale = 1e12;
        for (k, p) in noisy.iter().enumerate() {
            counts.record(k, (p * scale).round() as u64);
        }
        let q = readout_mitigate(&counts, &r).unwrap();
        for (a, b) in q.iter().zip(truth) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn excited_qubit_readout_is_recovered() {
        let r = [ReadoutError::new(0.0148, 0.0).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let counts = sample(&[0.0, 1.0], 1, 100_000, &r, &mut rng).unwrap();
        let q = readout_mitigate(&counts, &r).unwrap();
        let sigma = (0.0148f64 * (1.0 - 0.0148) / 1e5).sqrt() / (1.0 - 0.0148);
        assert!(q[0].abs() < 2.0 * sigma + 1e-12, "{}", q[0]);
    }

    #[test]
    fn singular_confusion_is_rejected() {
        let mut counts = Counts::new(1);
        counts.record(0, 10);
        let r = [ReadoutError::new(0.5, 0.5).unwrap()];
        assert!(matches!(readout_mitigate(&counts, &r), Err(Error::Singular(_))));
        assert_eq!(nearest_distribution(&[-0.1, 1.1]), vec![0.0, 1.0]);
    }

    #[test]
    fn folding_keeps_state_and_scales_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_circuit(4, 40, &mut rng).unwrap();
        assert_eq!(fold_gates(&c, 1).unwrap(), c);
        for s in [3, 5, 7] {
            let f = fold_gates(&c, s).unwrap();
            assert_eq!(f.two_qubit_count(), s * c.two_qubit_count());
            assert!((fidelity(&c, &f) - 1.0).abs() < 1e-10);
        }
        assert!(fold_gates(&c, 2).is_err());
    }

    #[test]
    fn folding_raises_effective_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = random_circuit(3, 30, &mut rng).unwrap();
        let noise = NoiseModel::depolarizing(0.02).unwrap();
        let purities: Vec<f64> = [1, 3, 5]
            .iter()
            .map(|&s| run_density(&fold_gates(&c, s).unwrap(), &noise).unwrap().purity())
            .collect();
        assert!(purities[0] > purities[1] && purities[1] > purities[2]);
    }

    #[test]
    fn extrapolation_examples() {
        for ex in [Extrapolator::Linear, Extrapolator::Richardson] {
            let spec = ZneSpec {
                scale_factors: vec![1, 3],
                extrapolator: ex,
            };
            assert!((zne_extrapolate(&[(1.0, 0.7), (3.0, 0.7)], &spec).unwrap() - 0.7).abs() < 1e-12);
        }
        let lin = ZneSpec {
            scale_factors: vec![1, 3, 5],
            extrapolator: Extrapolator::Linear,
        };
        let pts: Vec<(f64, f64)> = [1.0, 3.0, 5.0].iter().map(|&s| (s, -2.0 + 0.3 * s)).collect();
        assert!((zne_extrapolate(&pts, &lin).unwrap() + 2.0).abs() < 1e-12);
        let w = extrapolation_weights(&[1.0, 3.0, 5.0], Extrapolator::Richardson).unwrap();
        for (a, b) in w.iter().zip([15.0 / 8.0, -5.0 / 4.0, 3.0 / 8.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let q = extrapolation_weights(&[1.0, 3.0, 5.0], Extrapolator::Quadratic).unwrap();
        for (a, b) in q.iter().zip(&w) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(extrapolation_weights(&[1.0, 3.0], Extrapolator::Quadratic).is_err());
        assert!(extrapolation_weights(&[1.0, 1.0], Extrapolator::Linear).is_err());
        let ls = least_squares_check(&[1.0, 3.0, 5.0, 7.0], &[1.0, 2.0, 2.5, 4.0], 1);
        let w4 = extrapolation_weights(&[1.0, 3.0, 5.0, 7.0], Extrapolator::Linear).unwrap();
        let via_w: f64 = w4.iter().zip([1.0, 2.0, 2.5, 4.0]).map(|(a, b)| a * b).sum();
        assert!((ls - via_w).abs() < 1e-12);
    }

    #[test]
    fn zne_spec_validation() {
        let bad = ZneSpec {
            scale_factors: vec![1, 2],
            extrapolator: Extrapolator::Linear,
        };
        assert!(bad.validate().is_err());
        let single = ZneSpec {
            scale_factors: vec![3],
            extrapolator: Extrapolator::Linear,
        };
        assert!(single.validate().is_err());
        assert!(ZneSpec::default().validate().is_ok());
    }

    #[test]
    fn twirl_preserves_ideal_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for seed in 0..20 {
            let c = random_circuit(4, 40, &mut rng).unwrap();
            let t = pauli_twirl(&c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let (u, v) = (crate::engine::unitary(&c).unwrap(), crate::engine::unitary(&t).unwrap());
            assert!((u - v).norm() < 1e-10);
        }
        let mut single = Circuit::new(2);
        single.push_rotation(GateKind::RY, 0, 0.4).unwrap();
        assert_eq!(pauli_twirl(&single, &mut rng).unwrap(), single);
    }

    #[test]
    fn twirl_averages_out_coherent_error() {
        let eps = 0.2;
        let mut noisy = Circuit::new(2);
        noisy.push_fixed(GateKind::ECR, &[0, 1]).unwrap();
        let zz = {
            let (a, b) = (Complex64::from_polar(1.0, -eps / 2.0), Complex64::from_polar(1.0, eps / 2.0));
            let o = Complex64::new(0.0, 0.0);
            [[a, o, o, o], [o, b, o, o], [o, o, b, o], [o, o, o, a]]
        };
        let ideal = two_qubit_matrix(GateKind::ECR).unwrap();
        let bare = mul4(&zz, &ideal);
        // exact average over the whole twirling group of ECR
        let table = twirl_table(GateKind::ECR).unwrap();
        let twirled: Vec<(Mat4, f64)> = (0..16)
            .map(|i| {
                let p = kron_pauli(PAULIS[i / 4], PAULIS[i % 4]);
                let ((qa, qb), lam) = table[i];
                let q = kron_pauli(qa, qb);
                let u = mul4(&q, &mul4(&bare, &p));
                (u.map(|r| r.map(|z| z * lam)), 1.0 / 16.0)
            })
            .collect();
        let ideal_inv = adjoint4(&ideal);
        let err_bare = pauli_transfer_matrix(&[(mul4(&ideal_inv, &bare), 1.0)]);
        let err_twirled = pauli_transfer_matrix(
            &twirled.iter().map(|(u, w)| (mul4(&ideal_inv, u), *w)).collect::<Vec<_>>(),
        );
        let off = |m: &DMatrix<f64>| {
            let mut s: f64 = 0.0;
            for i in 0..16 {
                for j in 0..16 {
                    if i != j {
                        s = s.max(m[(i, j)].abs());
                    }
                }
            }
            s
        };
        assert!(off(&err_bare) > 0.1);
        assert!(off(&err_twirled) < 1e-12);
    }

    #[test]
    fn all_off_noiseless_is_exact_up_to_shot_noise() {
        let h = crate::hamiltonian::toy_hamiltonian();
        let c = build_custom_ansatz(6).unwrap();
        let theta = crate::vqe::initial_parameters(24, crate::vqe::Initialization::Uniform, 5);
        let exact = run_statevector(&c.bind(&theta).unwrap()).unwrap().expectation(&h.physical).unwrap();
        let e = mitigated_energy(&theta, &c, &h.physical, &NoiseModel::ideal(), &MitigationPlan::none(), 32768, 1).unwrap();
        assert!((e.mean - exact).abs() < 5.0 * e.std_error() + 1e-12);
    }

    #[test]
    fn strategies_cover_six_rows() {
        let names: Vec<&str> = MitigationPlan::strategies().iter().map(|s| s.0).collect();
        assert_eq!(names, ["none", "readout", "twirl", "dd", "zne", "all"]);
    }
}
