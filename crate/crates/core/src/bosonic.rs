//! Truncated Fock-space ladder operators.
//!
//! Each phonon mode keeps `levels` occupation states `|0⟩ .. |levels-1⟩`.
//! Mode 0 is the most significant tensor slot of the product basis, so the
//! basis index of `|n_0, n_1, ..⟩` is `Σ n_m · levels^(P-1-m)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

fn to_faer(m: &CMatrix) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| faer::c64::new(m[(i, j)].re, m[(i, j)].im))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let mut vals = to_faer(m)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence)?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Lowest eigenpair of a Hermitian matrix.
pub fn hermitian_ground_state(m: &CMatrix) -> Result<(f64, Vec<Complex64>)> {
    let eig = to_faer(m)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence)?;
    if m.nrows() == 0 {
        return Err(invalid("empty matrix"));
    }
    // eigenvalues come back in nondecreasing order
    let u = eig.U();
    let v = (0..m.nrows()).map(|i| Complex64::new(u[(i, 0)].re, u[(i, 0)].im)).collect();
    Ok((eig.S()[0].re, v))
}

const ZERO_TOL: f64 = 1e-12;

/// Direct product of truncated single-mode Fock spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    n_phonons: usize,
    levels: usize,
}

impl FockSpace {
    pub fn new(n_phonons: usize, levels_per_phonon: usize) -> Result<Self> {
        if n_phonons == 0 {
            return Err(invalid("a Fock space needs at least one phonon"));
        }
        if levels_per_phonon < 2 {
            return Err(invalid("each phonon needs at least two retained levels"));
        }
        Ok(Self {
            n_phonons,
            levels: levels_per_phonon,
        })
    }

    pub fn n_phonons(&self) -> usize {
        self.n_phonons
    }

    pub fn levels_per_phonon(&self) -> usize {
        self.levels
    }

    /// Highest retained occupation, `levels - 1`.
    pub fn n_max(&self) -> usize {
        self.levels - 1
    }

    pub fn dimension(&self) -> usize {
        self.levels.pow(self.n_phonons as u32)
    }

    /// Basis index of an occupation-number configuration.
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.n_phonons {
            return Err(Error::WidthMismatch {
                left: occupations.len(),
                right: self.n_phonons,
            });
        }
        occupations.iter().try_fold(0usize, |acc, &n| {
            if n >= self.levels {
                Err(Error::OutOfRange {
                    index: n,
                    limit: self.levels,
                })
            } else {
                Ok(acc * self.levels + n)
            }
        })
    }

    /// Occupation numbers of a basis index (inverse of [`FockSpace::index_of`]).
    pub fn occupations_of(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_phonons];
        for slot in occ.iter_mut().rev() {
            *slot = index % self.levels;
            index /= self.levels;
        }
        occ
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LadderKind {
    Create,
    Annihilate,
}

impl LadderKind {
    pub fn adjoint(self) -> Self {
        match self {
            LadderKind::Create => LadderKind::Annihilate,
            LadderKind::Annihilate => LadderKind::Create,
        }
    }
}

/// A single creation or annihilation operator acting on one phonon mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LadderOp {
    pub kind: LadderKind,
    pub mode: usize,
}

impl LadderOp {
    pub fn create(mode: usize) -> Self {
        Self {
            kind: LadderKind::Create,
            mode,
        }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self {
            kind: LadderKind::Annihilate,
            mode,
        }
    }

    pub fn adjoint(self) -> Self {
        Self {
            kind: self.kind.adjoint(),
            mode: self.mode,
        }
    }
}

impl std::fmt::Display for LadderOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            LadderKind::Create => write!(f, "a†{}", self.mode),
            LadderKind::Annihilate => write!(f, "a{}", self.mode),
        }
    }
}

/// `coefficient · A_1 A_2 ... A_k`, with `A_k` acting first on a ket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderProduct {
    pub coefficient: Complex64,
    pub factors: Vec<LadderOp>,
}

impl LadderProduct {
    pub fn new(coefficient: Complex64, factors: Vec<LadderOp>) -> Self {
        Self {
            coefficient,
            factors,
        }
    }

    pub fn identity() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Vec::new())
    }

    /// Hermitian conjugate: conjugated coefficient, reversed order, swapped kinds.
    pub fn adjoint(&self) -> Self {
        Self {
            coefficient: self.coefficient.conj(),
            factors: self.factors.iter().rev().map(|op| op.adjoint()).collect(),
        }
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &LadderProduct) -> Self {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&rhs.factors);
        Self {
            coefficient: self.coefficient * rhs.coefficient,
            factors,
        }
    }

    fn check(&self, space: &FockSpace) -> Result<()> {
        if !self.coefficient.re.is_finite() || !self.coefficient.im.is_finite() {
            return Err(invalid("ladder product coefficient is not finite"));
        }
        for op in &self.factors {
            if op.mode >= space.n_phonons {
                return Err(Error::OutOfRange {
                    index: op.mode,
                    limit: space.n_phonons,
                });
            }
        }
        Ok(())
    }
}

/// Dense matrix of `a†` or `a` truncated at occupation `n_max`.
///
/// `a†|n⟩ = √(n+1)|n+1⟩` puts the entries on the subdiagonal; `a` is its
/// conjugate transpose.
pub fn ladder_matrix(kind: LadderKind, n_max: usize) -> Result<CMatrix> {
    if n_max == 0 {
        return Err(invalid("n_max must be at least 1"));
    }
    let dim = n_max + 1;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..n_max {
        let amp = Complex64::new(((n + 1) as f64).sqrt(), 0.0);
        match kind {
            LadderKind::Create => m[(n + 1, n)] = amp,
            LadderKind::Annihilate => m[(n, n + 1)] = amp,
        }
    }
    Ok(m)
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Single-mode operator placed in its tensor slot, identity elsewhere.
fn embed_single(op: LadderOp, space: &FockSpace) -> Result<CMatrix> {
    let local = ladder_matrix(op.kind, space.n_max())?;
    let eye = CMatrix::identity(space.levels, space.levels);
    let mut out = CMatrix::identity(1, 1);
    for m in 0..space.n_phonons {
        out = if m == op.mode {
            kron(&out, &local)
        } else {
            kron(&out, &eye)
        };
    }
    Ok(out)
}

/// Full-space matrix of a ladder product.
pub fn embed(product: &LadderProduct, space: &FockSpace) -> Result<CMatrix> {
    product.check(space)?;
    let dim = space.dimension();
    let mut out = CMatrix::identity(dim, dim);
    for op in &product.factors {
        out *= embed_single(*op, space)?;
    }
    Ok(out * product.coefficient)
}

/// `⟨vac| product |vac⟩`.
///
/// Evaluated by pushing the vacuum ket through the factors right to left,
/// which avoids materialising the full operator.
pub fn vacuum_expectation(product: &LadderProduct, space: &FockSpace) -> Result<Complex64> {
    product.check(space)?;
    let dim = space.dimension();
    let mut ket = vec![Complex64::new(0.0, 0.0); dim];
    ket[0] = Complex64::new(1.0, 0.0);
    for op in product.factors.iter().rev() {
        ket = apply_single(*op, space, &ket);
        if ket.iter().all(|a| a.norm() < ZERO_TOL) {
            return Ok(Complex64::new(0.0, 0.0));
        }
    }
    Ok(ket[0] * product.coefficient)
}

fn apply_single(op: LadderOp, space: &FockSpace, ket: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); ket.len()];
    let stride = space.levels.pow((space.n_phonons - 1 - op.mode) as u32);
    for (idx, &amp) in ket.iter().enumerate() {
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        let n = (idx / stride) % space.levels;
        match op.kind {
            LadderKind::Create if n + 1 < space.levels => {
                out[idx + stride] += amp * ((n + 1) as f64).sqrt();
            }
            LadderKind::Annihilate if n > 0 => {
                out[idx - stride] += amp * (n as f64).sqrt();
            }
            _ => {}
        }
    }
    out
}

/// Vacuum expectation of a four-operator product via Wick pairing:
/// `⟨A1A2⟩⟨A3A4⟩ + ⟨A1A3⟩⟨A2A4⟩ + ⟨A1A4⟩⟨A2A3⟩`.
///
/// Matches [`vacuum_expectation`] whenever the space retains at least three
/// levels per mode; with two levels a doubly occupied intermediate state is
/// truncated away and the two can differ.
pub fn wick_expectation(ops: &[LadderOp], space: &FockSpace) -> Result<Complex64> {
    if ops.len() != 4 {
        return Err(invalid(format!(
            "Wick pairing needs exactly 4 operators, got {}",
            ops.len()
        )));
    }
    let pair = |i: usize, j: usize| {
        vacuum_expectation(
            &LadderProduct::new(Complex64::new(1.0, 0.0), vec![ops[i], ops[j]]),
            space,
        )
    };
    Ok(pair(0, 1)? * pair(2, 3)? + pair(0, 2)? * pair(1, 3)? + pair(0, 3)? * pair(1, 2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn lowest_truncation_create() {
        let m = ladder_matrix(LadderKind::Create, 1).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m[(1, 0)], c(1.0));
        assert_eq!(m.iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn annihilate_entries() {
        let m = ladder_matrix(LadderKind::Annihilate, 2).unwrap();
        assert_eq!(m[(0, 1)], c(1.0));
        assert!((m[(1, 2)] - c(2f64.sqrt())).norm() < 1e-15);
        assert_eq!(m.iter().filter(|z| z.norm() > 0.0).count(), 2);
    }

    #[test]
    fn truncated_commutator_n2() {
        let ad = ladder_matrix(LadderKind::Create, 2).unwrap();
        let a = ladder_matrix(LadderKind::Annihilate, 2).unwrap();
        let comm = &a * &ad - &ad * &a;
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0),
            c(1.0),
            c(-2.0),
        ]));
        assert!((comm - expected).norm() < 1e-12);
    }

    #[test]
    fn zero_truncation_rejected() {
        assert!(ladder_matrix(LadderKind::Create, 0).is_err());
        assert!(FockSpace::new(0, 2).is_err());
        assert!(FockSpace::new(1, 1).is_err());
    }

    #[test]
    fn embed_identity_and_number() {
        let space = FockSpace::new(2, 3).unwrap();
        let id = embed(&LadderProduct::identity(), &space).unwrap();
        assert!((id - CMatrix::identity(9, 9)).norm() < 1e-15);

        let one = FockSpace::new(1, 3).unwrap();
        let number = LadderProduct::new(
            c(1.0),
            vec![LadderOp::create(0), LadderOp::annihilate(0)],
        );
        let m = embed(&number, &one).unwrap();
        for n in 0..3 {
            assert!((m[(n, n)] - c(n as f64)).norm() < 1e-12);
        }
    }

    #[test]
    fn embed_raises_first_slot() {
        // |00⟩ -> |10⟩ is basis 0 -> basis 2 with mode 0 most significant.
        let space = FockSpace::new(2, 2).unwrap();
        let m = embed(
            &LadderProduct::new(c(1.0), vec![LadderOp::create(0)]),
            &space,
        )
        .unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        expected[(2, 0)] = c(1.0);
        expected[(3, 1)] = c(1.0);
        assert!((m - expected).norm() < 1e-15);
    }

    #[test]
    fn embed_rejects_bad_mode() {
        let space = FockSpace::new(2, 2).unwrap();
        let p = LadderProduct::new(c(1.0), vec![LadderOp::create(2)]);
        assert!(matches!(embed(&p, &space), Err(Error::OutOfRange { .. })));
        assert!(vacuum_expectation(&p, &space).is_err());
    }

    #[test]
    fn vacuum_values() {
        let space = FockSpace::new(2, 3).unwrap();
        let v = |ops: Vec<LadderOp>| {
            vacuum_expectation(&LadderProduct::new(c(1.0), ops), &space).unwrap()
        };
        assert_eq!(v(vec![LadderOp::annihilate(0), LadderOp::create(0)]), c(1.0));
        assert_eq!(v(vec![LadderOp::create(0), LadderOp::annihilate(0)]), c(0.0));
        let four = v(vec![
            LadderOp::annihilate(0),
            LadderOp::annihilate(1),
            LadderOp::create(1),
            LadderOp::create(0),
        ]);
        assert!((four - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn wick_examples() {
        let space = FockSpace::new(2, 3).unwrap();
        let w = wick_expectation(
            &[
                LadderOp::annihilate(0),
                LadderOp::create(0),
                LadderOp::annihilate(1),
                LadderOp::create(1),
            ],
            &space,
        )
        .unwrap();
        assert!((w - c(1.0)).norm() < 1e-12);
        let z = wick_expectation(
            &[
                LadderOp::create(0),
                LadderOp::create(0),
                LadderOp::annihilate(0),
                LadderOp::annihilate(0),
            ],
            &space,
        )
        .unwrap();
        assert!(z.norm() < 1e-12);
        assert!(wick_expectation(&[LadderOp::create(0)], &space).is_err());
    }

    #[test]
    fn two_level_truncation_breaks_double_occupancy() {
        let space = FockSpace::new(1, 2).unwrap();
        let ops = [
            LadderOp::annihilate(0),
            LadderOp::annihilate(0),
            LadderOp::create(0),
            LadderOp::create(0),
        ];
        let direct = vacuum_expectation(&LadderProduct::new(c(1.0), ops.to_vec()), &space).unwrap();
        let wick = wick_expectation(&ops, &space).unwrap();
        assert!(direct.norm() < 1e-12);
        assert!((wick - c(2.0)).norm() < 1e-12);
    }

    #[test]
    fn adjoint_reverses_and_swaps() {
        let p = LadderProduct::new(
            Complex64::new(1.0, 2.0),
            vec![LadderOp::create(0), LadderOp::annihilate(1)],
        );
        let adj = p.adjoint();
        assert_eq!(adj.coefficient, Complex64::new(1.0, -2.0));
        assert_eq!(adj.factors, vec![LadderOp::create(1), LadderOp::annihilate(0)]);
        assert_eq!(adj.adjoint(), p);
    }

    #[test]
    fn index_roundtrip() {
        let space = FockSpace::new(3, 4).unwrap();
        for idx in 0..space.dimension() {
            let occ = space.occupations_of(idx);
            assert_eq!(space.index_of(&occ).unwrap(), idx);
        }
    }
}
