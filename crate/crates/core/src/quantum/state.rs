//! Dense statevector and the operations on it.
//!
//! Qubit 0 is the most significant bit of the basis index, so for a 2-qubit
//! state the amplitude order is |00>, |01>, |10>, |11> and "|10>" means
//! qubit 0 = 1, qubit 1 = 0.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use super::gate::{Circuit, GateKind, GateOp, MAX_QUBITS};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "state needs 1..={MAX_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wrap an explicit amplitude vector; the length must be a power of two
    /// within capacity and the norm must already be 1.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() || len > (1 << MAX_QUBITS) {
            return Err(Error::Capacity(format!(
                "amplitude vector length {len} is not a power of two in 2..=2^{MAX_QUBITS}"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        let state = Self { n_qubits, amps };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Numeric(format!("state norm^2 = {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Basis-index bit mask for `qubit` (qubit 0 = most significant).
    fn stride(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Apply one gate, returning the new state.
    pub fn apply_gate(&self, gate: &GateOp) -> Result<Self> {
        let mut next = self.clone();
        next.apply_gate_mut(gate)?;
        Ok(next)
    }

    pub(crate) fn apply_gate_mut(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match gate.kind {
            GateKind::Cnot => {
                let sc = self.stride(gate.control.expect("validated"));
                let st = self.stride(gate.target);
                for i in 0..self.amps.len() {
                    if i & sc != 0 && i & st == 0 {
                        self.amps.swap(i, i | st);
                    }
                }
            }
            _ => {
                let m = gate.matrix2().expect("single-qubit kind");
                let st = self.stride(gate.target);
                for base in (0..self.amps.len()).step_by(st * 2) {
                    for i0 in base..base + st {
                        let i1 = i0 | st;
                        let a0 = self.amps[i0];
                        let a1 = self.amps[i1];
                        self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
                        self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
                    }
                }
            }
        }
        debug_assert!((self.norm_sqr() - 1.0).abs() <= NORM_TOL);
        Ok(())
    }

    /// <Z> on one qubit: +|amp|^2 where its bit is 0, -|amp|^2 where it is 1.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::Index(format!(
                "qubit {qubit} on a {}-qubit state",
                self.n_qubits
            )));
        }
        let st = self.stride(qubit);
        let mut e = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            e += if i & st == 0 { p } else { -p };
        }
        Ok(e)
    }

    /// Born probabilities over the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Bitstring label of a basis index, qubit 0 first.
    pub fn basis_label(&self, index: usize) -> String {
        (0..self.n_qubits)
            .map(|q| if index & self.stride(q) != 0 { '1' } else { '0' })
            .collect()
    }

    /// Draw `shots` basis outcomes; counts sum to `shots` and a fixed RNG
    /// reproduces the same map.
    pub fn sample_bitstrings<R: Rng>(
        &self,
        shots: u64,
        rng: &mut R,
    ) -> Result<BTreeMap<String, u64>> {
        if shots == 0 {
            return Err(Error::Config("shots must be >= 1".into()));
        }
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let total = acc;
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for _ in 0..shots {
            let u: f64 = rng.gen::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(self.amps.len() - 1);
            *counts.entry(self.basis_label(idx)).or_insert(0) += 1;
        }
        Ok(counts)
    }
}

impl Circuit {
    /// Run the gate sequence on `init`, left to right.
    pub fn run(&self, init: &StateVector) -> Result<StateVector> {
        if init.n_qubits() != self.n_qubits() {
            return Err(Error::Shape(format!(
                "circuit on {} qubits applied to a {}-qubit state",
                self.n_qubits(),
                init.n_qubits()
            )));
        }
        let mut state = init.clone();
        for op in self.ops() {
            state.apply_gate_mut(op)?;
        }
        Ok(state)
    }
}

/// Angle encoding: Ry(feature_i) on qubit i applied to |0...0>, one feature
/// per qubit.
pub fn angle_encode(features: &[f64]) -> Result<StateVector> {
    if features.is_empty() || features.len() > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "angle encoding takes 1..={MAX_QUBITS} features, got {}",
            features.len()
        )));
    }
    let mut state = StateVector::zero(features.len())?;
    for (q, &f) in features.iter().enumerate() {
        state.apply_gate_mut(&GateOp::ry(q, f))?;
    }
    Ok(state)
}
