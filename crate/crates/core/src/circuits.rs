//! Parameterised gate circuits, ansatz builders and CNOT→ECR rewriting.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

type C = Complex64;

const fn c(re: f64, im: f64) -> C {
    Complex64::new(re, im)
}

/// 2×2 unitary, row-major.
pub type Mat2 = [[C; 2]; 2];
/// 4×4 unitary over `(qubits[0], qubits[1])`, first qubit most significant.
pub type Mat4 = [[C; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    X,
    Y,
    Z,
    /// Square root of X, native on the reference hardware.
    SX,
    CNOT,
    CZ,
    ECR,
    /// Scalar `e^{iθ}`; addresses no qubits.
    GlobalPhase,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::CNOT | GateKind::CZ | GateKind::ECR => 2,
            GateKind::GlobalPhase => 0,
            _ => 1,
        }
    }

    pub fn is_parametric(self) -> bool {
        matches!(
            self,
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::GlobalPhase
        )
    }

    pub fn is_two_qubit(self) -> bool {
        self.arity() == 2
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::SX => "SX",
            GateKind::CNOT => "CNOT",
            GateKind::CZ => "CZ",
            GateKind::ECR => "ECR",
            GateKind::GlobalPhase => "GPHASE",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "RX" => GateKind::RX,
            "RY" => GateKind::RY,
            "RZ" => GateKind::RZ,
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "SX" => GateKind::SX,
            "CNOT" => GateKind::CNOT,
            "CZ" => GateKind::CZ,
            "ECR" => GateKind::ECR,
            "GPHASE" => GateKind::GlobalPhase,
            _ => return None,
        })
    }
}

/// Rotation angle: either fixed or a slot in the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    Bound(f64),
    Symbol(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angle: Option<Angle>,
}

impl Gate {
    pub fn fixed(kind: GateKind, qubits: &[usize]) -> Self {
        Self {
            kind,
            qubits: qubits.to_vec(),
            angle: None,
        }
    }

    pub fn rotation(kind: GateKind, qubit: usize, angle: Angle) -> Self {
        Self {
            kind,
            qubits: vec![qubit],
            angle: Some(angle),
        }
    }

    pub fn bound_angle(&self) -> Result<f64> {
        match self.angle {
            Some(Angle::Bound(a)) => Ok(a),
            Some(Angle::Symbol(i)) => Err(Error::UnboundParameter(i)),
            None => Ok(0.0),
        }
    }

    /// Single-qubit matrix for a bound one-qubit gate.
    pub fn matrix1(&self) -> Result<Mat2> {
        let theta = self.bound_angle()?;
        single_qubit_matrix(self.kind, theta)
    }

    /// Two-qubit matrix over `(qubits[0], qubits[1])`.
    pub fn matrix2(&self) -> Result<Mat4> {
        two_qubit_matrix(self.kind)
    }
}

pub fn single_qubit_matrix(kind: GateKind, theta: f64) -> Result<Mat2> {
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Ok(match kind {
        GateKind::RX => [[c(ch, 0.0), c(0.0, -sh)], [c(0.0, -sh), c(ch, 0.0)]],
        GateKind::RY => [[c(ch, 0.0), c(-sh, 0.0)], [c(sh, 0.0), c(ch, 0.0)]],
        GateKind::RZ => [[c(ch, -sh), c(0.0, 0.0)], [c(0.0, 0.0), c(ch, sh)]],
        GateKind::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        GateKind::Y => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        GateKind::Z => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
        GateKind::SX => [[c(0.5, 0.5), c(0.5, -0.5)], [c(0.5, -0.5), c(0.5, 0.5)]],
        other => return Err(invalid(format!("{} is not a single-qubit gate", other.name()))),
    })
}

pub fn two_qubit_matrix(kind: GateKind) -> Result<Mat4> {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    Ok(match kind {
        GateKind::CNOT => [[l, o, o, o], [o, l, o, o], [o, o, o, l], [o, o, l, o]],
        GateKind::CZ => [[l, o, o, o], [o, l, o, o], [o, o, l, o], [o, o, o, -l]],
        GateKind::ECR => {
            // (IX − XY)/√2
            let r = FRAC_1_SQRT_2;
            let (p, ip, im) = (c(r, 0.0), c(0.0, r), c(0.0, -r));
            [[o, p, o, ip], [p, o, im, o], [o, ip, o, p], [im, o, p, o]]
        }
        other => return Err(invalid(format!("{} is not a two-qubit gate", other.name()))),
    })
}

/// Ordered gate list over a fixed register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    width: usize,
    gates: Vec<Gate>,
    n_parameters: usize,
    global_phase: f64,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            gates: Vec::new(),
            n_parameters: 0,
            global_phase: 0.0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_parameters(&self) -> usize {
        self.n_parameters
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn add_global_phase(&mut self, phase: f64) {
        self.global_phase += phase;
    }

    /// Append a gate after checking its qubits and angle.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if gate.qubits.len() != gate.kind.arity() {
            return Err(invalid(format!(
                "{} takes {} qubits, got {}",
                gate.kind.name(),
                gate.kind.arity(),
                gate.qubits.len()
            )));
        }
        if let Some(&q) = gate.qubits.iter().find(|&&q| q >= self.width) {
            return Err(Error::OutOfRange {
                index: q,
                limit: self.width,
            });
        }
        if gate.kind.is_two_qubit() && gate.qubits[0] == gate.qubits[1] {
            return Err(invalid("two-qubit gate on a single qubit"));
        }
        if gate.kind.is_parametric() != gate.angle.is_some() {
            return Err(invalid(format!("angle mismatch for {}", gate.kind.name())));
        }
        if let Some(Angle::Symbol(i)) = gate.angle {
            self.n_parameters = self.n_parameters.max(i + 1);
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Append a rotation driven by a fresh parameter slot.
    pub fn push_parametric(&mut self, kind: GateKind, qubit: usize) -> Result<usize> {
        let slot = self.n_parameters;
        self.push(Gate::rotation(kind, qubit, Angle::Symbol(slot)))?;
        Ok(slot)
    }

    pub fn push_fixed(&mut self, kind: GateKind, qubits: &[usize]) -> Result<()> {
        self.push(Gate::fixed(kind, qubits))
    }

    pub fn push_rotation(&mut self, kind: GateKind, qubit: usize, angle: f64) -> Result<()> {
        self.push(Gate::rotation(kind, qubit, Angle::Bound(angle)))
    }

    /// Append every gate of `other` (which must be bound) and its phase.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.width != self.width {
            return Err(Error::WidthMismatch {
                left: self.width,
                right: other.width,
            });
        }
        for g in &other.gates {
            self.push(g.clone())?;
        }
        self.global_phase += other.global_phase;
        Ok(())
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.is_two_qubit()).count()
    }

    pub fn is_bound(&self) -> bool {
        !self
            .gates
            .iter()
            .any(|g| matches!(g.angle, Some(Angle::Symbol(_))))
    }

    /// Replace every symbolic angle with its value.
    pub fn bind(&self, values: &[f64]) -> Result<Circuit> {
        if values.len() != self.n_parameters {
            return Err(Error::ParameterCount {
                expected: self.n_parameters,
                actual: values.len(),
            });
        }
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let mut g = g.clone();
                if let Some(Angle::Symbol(i)) = g.angle {
                    g.angle = Some(Angle::Bound(values[i]));
                }
                g
            })
            .collect();
        Ok(Circuit {
            width: self.width,
            gates,
            n_parameters: 0,
            global_phase: self.global_phase,
        })
    }

    /// One line per gate: `KIND q0 [q1] [angle|pN]`, preceded by a header.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "WIDTH {}\nPARAMS {}\nPHASE {:?}\n",
            self.width, self.n_parameters, self.global_phase
        );
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut circuit: Option<Circuit> = None;
        let mut declared_params = 0;
        let mut phase = 0.0;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| Error::Parse {
                line: n + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "WIDTH" => {
                    let w = fields
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("bad width"))?;
                    circuit = Some(Circuit::new(w));
                }
                "PARAMS" => {
                    declared_params = fields
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("bad parameter count"))?;
                }
                "PHASE" => {
                    phase = fields
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("bad phase"))?;
                }
                name => {
                    let kind = GateKind::from_name(name).ok_or_else(|| err("unknown gate"))?;
                    let circ = circuit.as_mut().ok_or_else(|| err("gate before WIDTH"))?;
                    let arity = kind.arity();
                    let qubits = fields[1..]
                        .iter()
                        .take(arity)
                        .map(|s| s.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| err("bad qubit index"))?;
                    let angle = match fields.get(1 + arity) {
                        None => None,
                        Some(s) if s.starts_with('p') => Some(Angle::Symbol(
                            s[1..].parse().map_err(|_| err("bad parameter slot"))?,
                        )),
                        Some(s) => Some(Angle::Bound(s.parse().map_err(|_| err("bad angle"))?)),
                    };
                    circ.push(Gate {
                        kind,
                        qubits,
                        angle,
                    })
                    .map_err(|e| err(&e.to_string()))?;
                }
            }
        }
        let mut circuit = circuit.ok_or_else(|| invalid("missing WIDTH header"))?;
        circuit.n_parameters = circuit.n_parameters.max(declared_params);
        circuit.global_phase = phase;
        Ok(circuit)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        for q in &self.qubits {
            write!(f, " {q}")?;
        }
        match self.angle {
            Some(Angle::Bound(a)) => write!(f, " {a:?}"),
            Some(Angle::Symbol(i)) => write!(f, " p{i}"),
            None => Ok(()),
        }
    }
}

/// Hardware-efficient ansatz: `reps + 1` layers of RY then RZ on every
/// qubit, separated by a CNOT on every qubit pair.
pub fn build_efficient_su2(width: usize, reps: usize) -> Result<Circuit> {
    if width < 2 {
        return Err(invalid("ansatz needs at least two qubits"));
    }
    if reps < 1 {
        return Err(invalid("ansatz needs at least one repetition"));
    }
    let mut circ = Circuit::new(width);
    for layer in 0..=reps {
        for q in 0..width {
            circ.push_parametric(GateKind::RY, q)?;
        }
        for q in 0..width {
            circ.push_parametric(GateKind::RZ, q)?;
        }
        if layer < reps {
            for a in 0..width {
                for b in a + 1..width {
                    circ.push_fixed(GateKind::CNOT, &[a, b])?;
                }
            }
        }
    }
    Ok(circ)
}

pub const CUSTOM_LAYERS: usize = 4;

/// Real-amplitude ansatz: four layers of RY followed by a CNOT chain, closed
/// by a CZ between the last and first qubit.
pub fn build_custom_ansatz(width: usize) -> Result<Circuit> {
    if width < 2 {
        return Err(invalid("ansatz needs at least two qubits"));
    }
    let mut circ = Circuit::new(width);
    for _ in 0..CUSTOM_LAYERS {
        for q in 0..width {
            circ.push_parametric(GateKind::RY, q)?;
        }
        for q in 0..width - 1 {
            circ.push_fixed(GateKind::CNOT, &[q, q + 1])?;
        }
    }
    circ.push_fixed(GateKind::CZ, &[width - 1, 0])?;
    Ok(circ)
}

/// Ansatz families offered by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    EfficientSu2,
    Custom,
}

impl AnsatzKind {
    pub fn build(self, width: usize, reps: usize) -> Result<Circuit> {
        match self {
            AnsatzKind::EfficientSu2 => build_efficient_su2(width, reps),
            AnsatzKind::Custom => build_custom_ansatz(width),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AnsatzKind::EfficientSu2 => "efficient-su2",
            AnsatzKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for AnsatzKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "efficient-su2" | "su2" => Ok(AnsatzKind::EfficientSu2),
            "custom" => Ok(AnsatzKind::Custom),
            other => Err(invalid(format!("unknown ansatz '{other}'"))),
        }
    }
}

/// Global phase picked up by each CNOT→ECR rewrite.
pub const ECR_REWRITE_PHASE: f64 = FRAC_PI_2;

/// Replace every CNOT by an ECR dressed with single-qubit gates.
///
/// `CNOT(c, t) = e^{iπ/2} · [RZ(π)_t SX_t RZ(−π/2)_c] ECR(t, c) [X_c RZ(π)_t]`.
pub fn transpile_cnot_to_ecr(circuit: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(circuit.width);
    out.n_parameters = circuit.n_parameters;
    out.global_phase = circuit.global_phase;
    for g in &circuit.gates {
        if g.kind != GateKind::CNOT {
            out.push(g.clone())?;
            continue;
        }
        let (ctl, tgt) = (g.qubits[0], g.qubits[1]);
        out.push_fixed(GateKind::X, &[ctl])?;
        out.push_rotation(GateKind::RZ, tgt, PI)?;
        out.push_fixed(GateKind::ECR, &[tgt, ctl])?;
        out.push_rotation(GateKind::RZ, ctl, -FRAC_PI_2)?;
        out.push_fixed(GateKind::SX, &[tgt])?;
        out.push_rotation(GateKind::RZ, tgt, PI)?;
        out.global_phase += ECR_REWRITE_PHASE;
    }
    Ok(out)
}

/// Random bound circuit for tests and corpora.
pub fn random_circuit<R: rand::Rng>(width: usize, depth: usize, rng: &mut R) -> Result<Circuit> {
    use GateKind::*;
    let one = [RX, RY, RZ, X, Y, Z, SX];
    let two = [CNOT, CZ, ECR];
    let mut circ = Circuit::new(width);
    for _ in 0..depth {
        if width >= 2 && rng.gen_bool(0.4) {
            let a = rng.gen_range(0..width);
            let mut b = rng.gen_range(0..width - 1);
            if b >= a {
                b += 1;
            }
            circ.push_fixed(two[rng.gen_range(0..two.len())], &[a, b])?;
        } else {
            let kind = one[rng.gen_range(0..one.len())];
            let q = rng.gen_range(0..width);
            if kind.is_parametric() {
                circ.push_rotation(kind, q, rng.gen_range(-PI..PI))?;
            } else {
                circ.push_fixed(kind, &[q])?;
            }
        }
    }
    Ok(circ)
}
