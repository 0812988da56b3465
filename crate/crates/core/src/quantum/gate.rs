//! Gate descriptions and their 2x2 matrices.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense simulation cap: 2^12 = 4096 amplitudes.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    Rx,
    Ry,
    Rz,
    Phase,
    Cnot,
}

impl GateKind {
    pub fn takes_angle(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Phase)
    }

    pub fn takes_control(self) -> bool {
        matches!(self, GateKind::Cnot)
    }
}

/// One gate in a circuit. `control` is present iff the kind is CNOT and
/// `angle` iff the kind is a rotation or phase gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<f64>,
}

impl GateOp {
    pub fn i(target: usize) -> Self {
        Self { kind: GateKind::I, target, control: None, angle: None }
    }

    pub fn x(target: usize) -> Self {
        Self { kind: GateKind::X, target, control: None, angle: None }
    }

    pub fn y(target: usize) -> Self {
        Self { kind: GateKind::Y, target, control: None, angle: None }
    }

    pub fn z(target: usize) -> Self {
        Self { kind: GateKind::Z, target, control: None, angle: None }
    }

    pub fn h(target: usize) -> Self {
        Self { kind: GateKind::H, target, control: None, angle: None }
    }

    pub fn rx(target: usize, angle: f64) -> Self {
        Self { kind: GateKind::Rx, target, control: None, angle: Some(angle) }
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Self { kind: GateKind::Ry, target, control: None, angle: Some(angle) }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self { kind: GateKind::Rz, target, control: None, angle: Some(angle) }
    }

    pub fn phase(target: usize, angle: f64) -> Self {
        Self { kind: GateKind::Phase, target, control: None, angle: Some(angle) }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cnot, target, control: Some(control), angle: None }
    }

    /// Structural and index validity for a state of `n_qubits`.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.angle.is_some() != self.kind.takes_angle() {
            return Err(Error::Config(format!(
                "gate {:?}: angle must be present iff the kind is a rotation/phase gate",
                self.kind
            )));
        }
        if self.control.is_some() != self.kind.takes_control() {
            return Err(Error::Config(format!(
                "gate {:?}: control must be present iff the kind is CNOT",
                self.kind
            )));
        }
        if self.target >= n_qubits {
            return Err(Error::Index(format!(
                "gate target {} on a {n_qubits}-qubit state",
                self.target
            )));
        }
        if let Some(c) = self.control {
            if c >= n_qubits {
                return Err(Error::Index(format!("gate control {c} on a {n_qubits}-qubit state")));
            }
            if c == self.target {
                return Err(Error::Config(format!("CNOT control equals target ({c})")));
            }
        }
        if let Some(a) = self.angle {
            if !a.is_finite() {
                return Err(Error::Numeric(format!("gate angle {a} is not finite")));
            }
        }
        Ok(())
    }

    /// The 2x2 unitary for single-qubit kinds; `None` for CNOT.
    pub fn matrix2(&self) -> Option<[[Complex64; 2]; 2]> {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let m = match self.kind {
            GateKind::I => [[one, zero], [zero, one]],
            GateKind::X => [[zero, one], [one, zero]],
            GateKind::Y => [
                [zero, Complex64::new(0.0, -1.0)],
                [Complex64::new(0.0, 1.0), zero],
            ],
            GateKind::Z => [[one, zero], [zero, Complex64::new(-1.0, 0.0)]],
            GateKind::H => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[s, s], [s, -s]]
            }
            GateKind::Rx => {
                let t = self.angle.expect("validated") / 2.0;
                let (c, s) = (t.cos(), t.sin());
                [
                    [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                    [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
                ]
            }
            GateKind::Ry => {
                let t = self.angle.expect("validated") / 2.0;
                let (c, s) = (t.cos(), t.sin());
                [
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ]
            }
            GateKind::Rz => {
                let t = self.angle.expect("validated") / 2.0;
                [
                    [Complex64::from_polar(1.0, -t), zero],
                    [zero, Complex64::from_polar(1.0, t)],
                ]
            }
            GateKind::Phase => {
                let a = self.angle.expect("validated");
                [[one, zero], [zero, Complex64::from_polar(1.0, a)]]
            }
            GateKind::Cnot => return None,
        };
        Some(m)
    }
}

/// An ordered gate sequence over a fixed qubit count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "circuit needs 1..={MAX_QUBITS} qubits, got {n_qubits}"
            )));
        }
        Ok(Self { n_qubits, ops: Vec::new() })
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        op.validate(self.n_qubits)?;
        self.ops.push(op);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }
}
