//! Pauli-string algebra and the one-hot boson-to-qubit encoding.
//!
//! Qubit 0 is the leftmost character of an axes string and the most
//! significant bit of a computational-basis index.
//!
//! In the encoding, qubit state `|1⟩` marks an occupied level. The standard
//! `Z` has eigenvalue `-1` on `|1⟩`, so the occupancy projector of a level
//! qubit is `(1 - Z)/2`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bosonic::{CMatrix, LadderKind, LadderOp, LadderProduct};
use crate::error::{invalid, Error, Result};

/// Coefficients below this magnitude are dropped by [`PauliSum::simplify`].
pub const DROP_TOL: f64 = 1e-12;
/// Largest register [`PauliSum::to_matrix`] will expand.
pub const MAX_DENSE_WIDTH: usize = 12;

const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// `self · rhs = phase · result`, phase one of `1, ±i`.
    pub fn compose(self, rhs: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        match (self, rhs) {
            (I, p) | (p, I) => (one, p),
            (X, X) | (Y, Y) | (Z, Z) => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
        }
    }

    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }
}

/// `coefficient · P_0 ⊗ P_1 ⊗ ... ⊗ P_{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: Complex64,
    pub axes: Vec<Pauli>,
}

impl PauliTerm {
    pub fn new(coefficient: Complex64, axes: Vec<Pauli>) -> Self {
        Self { coefficient, axes }
    }

    pub fn identity(width: usize, coefficient: Complex64) -> Self {
        Self::new(coefficient, vec![Pauli::I; width])
    }

    /// Parse an axes string such as `"XIZY"`.
    pub fn parse(coefficient: Complex64, axes: &str) -> Result<Self> {
        let axes = axes
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| invalid(format!("bad Pauli axis '{c}'"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(coefficient, axes))
    }

    pub fn width(&self) -> usize {
        self.axes.len()
    }

    pub fn axes_string(&self) -> String {
        self.axes.iter().map(|p| p.as_char()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.axes.iter().all(|p| *p == Pauli::I)
    }

    /// Bit masks in basis-index convention: `x` flips, `z` carries a sign.
    /// Y contributes to both masks.
    pub fn masks(&self) -> (usize, usize, u32) {
        let n = self.axes.len();
        let mut x = 0;
        let mut z = 0;
        let mut n_y = 0;
        for (q, p) in self.axes.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    n_y += 1;
                }
                Pauli::Z => z |= bit,
            }
        }
        (x, z, n_y)
    }
}

/// Product of two Pauli terms with exact phase tracking.
pub fn multiply(lhs: &PauliTerm, rhs: &PauliTerm) -> Result<PauliTerm> {
    if lhs.width() != rhs.width() {
        return Err(Error::WidthMismatch {
            left: lhs.width(),
            right: rhs.width(),
        });
    }
    let mut coefficient = lhs.coefficient * rhs.coefficient;
    let axes = lhs
        .axes
        .iter()
        .zip(&rhs.axes)
        .map(|(a, b)| {
            let (phase, p) = a.compose(*b);
            coefficient *= phase;
            p
        })
        .collect();
    Ok(PauliTerm::new(coefficient, axes))
}

/// Weighted sum of Pauli strings over a fixed register width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    width: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    pub fn zero(width: usize) -> Self {
        Self {
            width,
            terms: Vec::new(),
        }
    }

    pub fn identity(width: usize) -> Self {
        Self {
            width,
            terms: vec![PauliTerm::identity(width, Complex64::new(1.0, 0.0))],
        }
    }

    pub fn from_terms(width: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        for t in &terms {
            if t.width() != width {
                return Err(Error::WidthMismatch {
                    left: t.width(),
                    right: width,
                });
            }
            if !t.coefficient.re.is_finite() || !t.coefficient.im.is_finite() {
                return Err(invalid("Pauli coefficient is not finite"));
            }
        }
        Ok(Self { width, terms })
    }

    /// Convenience constructor from `(coefficient, axes)` pairs.
    pub fn from_strs(items: &[(Complex64, &str)]) -> Result<Self> {
        let terms = items
            .iter()
            .map(|(c, s)| PauliTerm::parse(*c, s))
            .collect::<Result<Vec<_>>>()?;
        let width = terms.first().map_or(0, |t| t.width());
        Self::from_terms(width, terms)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Single-qubit Pauli `p` on `qubit` with the given coefficient.
    pub fn single(width: usize, qubit: usize, p: Pauli, coefficient: Complex64) -> Self {
        let mut axes = vec![Pauli::I; width];
        axes[qubit] = p;
        Self {
            width,
            terms: vec![PauliTerm::new(coefficient, axes)],
        }
    }

    pub fn add(&self, rhs: &PauliSum) -> Result<PauliSum> {
        if self.width != rhs.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: rhs.width,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&rhs.terms);
        Ok(PauliSum {
            width: self.width,
            terms,
        })
    }

    pub fn scale(&self, factor: Complex64) -> PauliSum {
        PauliSum {
            width: self.width,
            terms: self
                .terms
                .iter()
                .map(|t| PauliTerm::new(t.coefficient * factor, t.axes.clone()))
                .collect(),
        }
    }

    /// Operator product `self · rhs`, simplified.
    pub fn mul(&self, rhs: &PauliSum) -> Result<PauliSum> {
        if self.width != rhs.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: rhs.width,
            });
        }
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(multiply(a, b)?);
            }
        }
        Ok(PauliSum {
            width: self.width,
            terms,
        }
        .simplify())
    }

    /// Merge like terms, drop negligible ones, sort by axes.
    pub fn simplify(&self) -> PauliSum {
        let mut merged: BTreeMap<Vec<Pauli>, Complex64> = BTreeMap::new();
        for t in &self.terms {
            *merged
                .entry(t.axes.clone())
                .or_insert(Complex64::new(0.0, 0.0)) += t.coefficient;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() >= DROP_TOL)
            .map(|(axes, c)| PauliTerm::new(c, axes))
            .collect();
        PauliSum {
            width: self.width,
            terms,
        }
    }

    /// Hermitian iff every simplified coefficient is real.
    pub fn is_hermitian(&self) -> bool {
        self.max_imaginary() <= HERMITIAN_TOL
    }

    pub(crate) fn max_imaginary(&self) -> f64 {
        self.simplify()
            .terms
            .iter()
            .map(|t| t.coefficient.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let m = self.max_imaginary();
        if m > HERMITIAN_TOL {
            Err(Error::NotHermitian(m))
        } else {
            Ok(())
        }
    }

    /// Σ |c_i| over all terms.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.norm()).sum()
    }

    /// Coefficient of the identity string.
    pub fn identity_coefficient(&self) -> Complex64 {
        self.terms
            .iter()
            .filter(|t| t.is_identity())
            .map(|t| t.coefficient)
            .sum()
    }

    /// Dense `2^w × 2^w` matrix.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.width > MAX_DENSE_WIDTH {
            return Err(Error::TooWide {
                width: self.width,
                limit: MAX_DENSE_WIDTH,
            });
        }
        let dim = 1usize << self.width;
        let mut m = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            let (x, z, n_y) = t.masks();
            let phase = i_pow(n_y) * t.coefficient;
            // P|k⟩ = i^{nY} (-1)^{|k∧z|} |k⊕x⟩
            for k in 0..dim {
                let sign = if (k & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(k ^ x, k)] += phase * sign;
            }
        }
        Ok(m)
    }

    /// Text form: one `re im AXES` line per term.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!(
                "{:?} {:?} {}\n",
                t.coefficient.re,
                t.coefficient.im,
                t.axes_string()
            ));
        }
        out
    }

    /// Parse the text form. Blank lines and lines starting with `#` are ignored.
    /// An input without terms yields a width-0 zero sum.
    pub fn from_text(text: &str) -> Result<PauliSum> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let re = f64::from_str(fields[0]).map_err(|e| err(e.to_string()))?;
            let im = f64::from_str(fields[1]).map_err(|e| err(e.to_string()))?;
            let term = PauliTerm::parse(Complex64::new(re, im), fields[2])
                .map_err(|e| err(e.to_string()))?;
            terms.push(term);
        }
        let width = terms.first().map_or(0, |t| t.width());
        PauliSum::from_terms(width, terms)
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i) {}", t.coefficient.re, t.coefficient.im, t.axes_string())?;
        }
        Ok(())
    }
}

pub(crate) fn i_pow(n: u32) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Placement of phonon levels on qubits: one qubit per retained level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingLayout {
    n_phonons: usize,
    levels: usize,
}

impl EncodingLayout {
    pub fn new(n_phonons: usize, levels_per_phonon: usize) -> Result<Self> {
        if n_phonons == 0 || levels_per_phonon < 2 {
            return Err(invalid(
                "encoding needs at least one phonon and two levels per phonon",
            ));
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

    pub fn n_qubits(&self) -> usize {
        self.n_phonons * self.levels
    }

    /// Phonon-major: `phonon · levels + level`.
    pub fn qubit_index(&self, phonon: usize, level: usize) -> usize {
        phonon * self.levels + level
    }

    /// Computational-basis index of the one-hot state for the given
    /// per-phonon occupations.
    pub fn one_hot_index(&self, occupations: &[usize]) -> usize {
        let n = self.n_qubits();
        occupations
            .iter()
            .enumerate()
            .map(|(m, &lvl)| 1usize << (n - 1 - self.qubit_index(m, lvl)))
            .fold(0, |acc, b| acc | b)
    }

    /// True iff each phonon has exactly one hot level qubit.
    pub fn is_one_hot(&self, basis_index: usize) -> bool {
        let n = self.n_qubits();
        (0..self.n_phonons).all(|m| {
            (0..self.levels)
                .filter(|&l| basis_index >> (n - 1 - self.qubit_index(m, l)) & 1 == 1)
                .count()
                == 1
        })
    }

    /// Basis indices of the one-hot subspace, listed in Fock-basis order
    /// (mode 0 most significant).
    pub fn one_hot_basis(&self) -> Vec<usize> {
        let dim = self.levels.pow(self.n_phonons as u32);
        (0..dim)
            .map(|mut idx| {
                let mut occ = vec![0; self.n_phonons];
                for slot in occ.iter_mut().rev() {
                    *slot = idx % self.levels;
                    idx /= self.levels;
                }
                self.one_hot_index(&occ)
            })
            .collect()
    }

    fn check_phonon(&self, phonon: usize) -> Result<()> {
        if phonon >= self.n_phonons {
            Err(Error::OutOfRange {
                index: phonon,
                limit: self.n_phonons,
            })
        } else {
            Ok(())
        }
    }
}

/// σ₊ = (X − iY)/2 = |1⟩⟨0| on `qubit`.
fn sigma_plus(width: usize, qubit: usize) -> PauliSum {
    let half = Complex64::new(0.5, 0.0);
    PauliSum::single(width, qubit, Pauli::X, half)
        .add(&PauliSum::single(width, qubit, Pauli::Y, Complex64::new(0.0, -0.5)))
        .expect("same width")
}

/// σ₋ = (X + iY)/2 = |0⟩⟨1| on `qubit`.
fn sigma_minus(width: usize, qubit: usize) -> PauliSum {
    let half = Complex64::new(0.5, 0.0);
    PauliSum::single(width, qubit, Pauli::X, half)
        .add(&PauliSum::single(width, qubit, Pauli::Y, Complex64::new(0.0, 0.5)))
        .expect("same width")
}

/// Occupancy projector `(1 − Z)/2` of one level qubit.
pub fn occupancy_projector(width: usize, qubit: usize) -> PauliSum {
    PauliSum::identity(width)
        .scale(Complex64::new(0.5, 0.0))
        .add(&PauliSum::single(width, qubit, Pauli::Z, Complex64::new(-0.5, 0.0)))
        .expect("same width")
}

/// One-hot image of a single ladder operator.
///
/// `a†_m = Σ_n √(n+1) σ₋^{n,m} σ₊^{n+1,m}` and `a_m` its adjoint.
pub fn encode_ladder(op: LadderOp, layout: &EncodingLayout) -> Result<PauliSum> {
    layout.check_phonon(op.mode)?;
    let w = layout.n_qubits();
    let mut out = PauliSum::zero(w);
    for n in 0..layout.levels - 1 {
        let lower = layout.qubit_index(op.mode, n);
        let upper = layout.qubit_index(op.mode, n + 1);
        let amp = Complex64::new(((n + 1) as f64).sqrt(), 0.0);
        let hop = match op.kind {
            LadderKind::Create => sigma_minus(w, lower).mul(&sigma_plus(w, upper))?,
            LadderKind::Annihilate => sigma_plus(w, lower).mul(&sigma_minus(w, upper))?,
        };
        out = out.add(&hop.scale(amp))?;
    }
    Ok(out.simplify())
}

/// One-hot image of a ladder product (coefficient included).
pub fn encode_product(product: &LadderProduct, layout: &EncodingLayout) -> Result<PauliSum> {
    let mut acc = PauliSum::identity(layout.n_qubits());
    for op in &product.factors {
        acc = acc.mul(&encode_ladder(*op, layout)?)?;
    }
    Ok(acc.scale(product.coefficient).simplify())
}

/// Number operator `n_m = Σ_n n · (1 − Z_{m,n})/2`.
pub fn encode_number(phonon: usize, layout: &EncodingLayout) -> Result<PauliSum> {
    layout.check_phonon(phonon)?;
    let w = layout.n_qubits();
    let mut out = PauliSum::zero(w);
    for n in 1..layout.levels {
        out = out.add(
            &occupancy_projector(w, layout.qubit_index(phonon, n)).scale(Complex64::new(n as f64, 0.0)),
        )?;
    }
    Ok(out.simplify())
}

/// Restriction of a dense qubit-space matrix to the one-hot subspace, in
/// Fock-basis order.
pub fn project_one_hot(matrix: &CMatrix, layout: &EncodingLayout) -> CMatrix {
    let basis = layout.one_hot_basis();
    let d = basis.len();
    CMatrix::from_fn(d, d, |i, j| matrix[(basis[i], basis[j])])
}
