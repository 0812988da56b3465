//! Parameterized circuits: hardware-efficient ansatz construction, forward
//! expectation evaluation, and exact gradients via the parameter-shift rule.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{angle_encode, GateOp, StateVector, MAX_QUBITS};
use crate::seeding::rng_from_seed;

/// Rotation axes that may carry a trainable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotKind {
    Rx,
    Ry,
    Rz,
}

impl RotKind {
    fn gate(self, target: usize, angle: f64) -> GateOp {
        match self {
            RotKind::Rx => GateOp::rx(target, angle),
            RotKind::Ry => GateOp::ry(target, angle),
            RotKind::Rz => GateOp::rz(target, angle),
        }
    }
}

/// One position in a parameterized circuit: either a fixed gate or a
/// rotation bound to a parameter slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    Fixed(GateOp),
    Rot { kind: RotKind, target: usize, param_index: usize },
}

/// A circuit with trainable rotation angles. Each parameter index owns
/// exactly one slot; binding a parameter vector yields a concrete circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCircuit {
    n_qubits: usize,
    slots: Vec<Slot>,
    n_params: usize,
}

impl ParamCircuit {
    pub fn new(n_qubits: usize, slots: Vec<Slot>, n_params: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "parameterized circuit needs 1..={MAX_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let mut seen = vec![0usize; n_params];
        for slot in &slots {
            match *slot {
                Slot::Fixed(op) => op.validate(n_qubits)?,
                Slot::Rot { kind, target, param_index } => {
                    kind.gate(target, 0.0).validate(n_qubits)?;
                    if param_index >= n_params {
                        return Err(Error::Index(format!(
                            "param index {param_index} with n_params = {n_params}"
                        )));
                    }
                    seen[param_index] += 1;
                }
            }
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(Error::Config(format!(
                "param index {i} used {} times; each must own exactly one slot",
                seen[i]
            )));
        }
        Ok(Self { n_qubits, slots, n_params })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Uniform [-pi, pi) initial parameters from a seed.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..self.n_params).map(|_| rng.gen_range(-PI..PI)).collect()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::Shape(format!(
                "{} params supplied, circuit has {}",
                params.len(),
                self.n_params
            )));
        }
        Ok(())
    }

    /// Run the circuit with bound parameters on `input`.
    pub fn run_bound(&self, params: &[f64], input: &StateVector) -> Result<StateVector> {
        self.check_params(params)?;
        if input.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!(
                "{}-qubit circuit on a {}-qubit state",
                self.n_qubits,
                input.n_qubits()
            )));
        }
        let mut state = input.clone();
        for slot in &self.slots {
            let op = match *slot {
                Slot::Fixed(op) => op,
                Slot::Rot { kind, target, param_index } => kind.gate(target, params[param_index]),
            };
            state.apply_gate_mut(&op)?;
        }
        Ok(state)
    }
}

/// Entangling-layer wiring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Entangler {
    Ring,
    Linear,
}

/// Hardware-efficient ansatz description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub depth: usize,
    pub entangler: Entangler,
}

/// Per layer: Ry on every qubit, Rz on every qubit (each a fresh parameter),
/// then CNOT entanglers. Total parameters: 2 * n_qubits * depth.
pub fn build_ansatz(spec: &AnsatzSpec) -> Result<ParamCircuit> {
    if spec.depth == 0 {
        return Err(Error::Config("ansatz depth must be >= 1".into()));
    }
    let n = spec.n_qubits;
    let mut slots = Vec::new();
    let mut param_index = 0;
    for _ in 0..spec.depth {
        for kind in [RotKind::Ry, RotKind::Rz] {
            for q in 0..n {
                slots.push(Slot::Rot { kind, target: q, param_index });
                param_index += 1;
            }
        }
        for q in 0..n.saturating_sub(1) {
            slots.push(Slot::Fixed(GateOp::cnot(q, q + 1)));
        }
        // Closing edge only when it is not the reverse of the single chain link.
        if spec.entangler == Entangler::Ring && n > 2 {
            slots.push(Slot::Fixed(GateOp::cnot(n - 1, 0)));
        }
    }
    ParamCircuit::new(n, slots, param_index)
}

/// Expectation <Z> on each measured qubit after running the bound circuit.
pub fn vqc_forward(
    pc: &ParamCircuit,
    params: &[f64],
    input: &StateVector,
    measured: &[usize],
) -> Result<Vec<f64>> {
    let state = pc.run_bound(params, input)?;
    measured.iter().map(|&q| state.expectation_z(q)).collect()
}

/// Loss gradient w.r.t. every circuit parameter by the two-point shift rule:
/// dL/dtheta_j = sum_k upstream_k * (E_k(theta_j + pi/2) - E_k(theta_j - pi/2)) / 2.
///
/// Runs exactly 2 * n_params circuit executions.
pub fn param_shift_grad(
    pc: &ParamCircuit,
    params: &[f64],
    input: &StateVector,
    measured: &[usize],
    upstream: &[f64],
) -> Result<Vec<f64>> {
    param_shift_grad_counted(pc, params, input, measured, upstream).map(|(g, _)| g)
}

/// As [`param_shift_grad`], also reporting the number of circuit executions.
pub fn param_shift_grad_counted(
    pc: &ParamCircuit,
    params: &[f64],
    input: &StateVector,
    measured: &[usize],
    upstream: &[f64],
) -> Result<(Vec<f64>, usize)> {
    if upstream.len() != measured.len() {
        return Err(Error::Shape(format!(
            "upstream has {} entries for {} measured qubits",
            upstream.len(),
            measured.len()
        )));
    }
    pc.check_params(params)?;
    let mut grad = vec![0.0; params.len()];
    let mut evals = 0usize;
    let mut shifted = params.to_vec();
    for j in 0..params.len() {
        shifted[j] = params[j] + FRAC_PI_2;
        let e_plus = vqc_forward(pc, &shifted, input, measured)?;
        shifted[j] = params[j] - FRAC_PI_2;
        let e_minus = vqc_forward(pc, &shifted, input, measured)?;
        shifted[j] = params[j];
        evals += 2;
        grad[j] = upstream
            .iter()
            .zip(e_plus.iter().zip(&e_minus))
            .map(|(u, (p, m))| u * (p - m) / 2.0)
            .sum();
    }
    Ok((grad, evals))
}

/// Loss gradient w.r.t. the Ry angle-encoding rotations that prepare the
/// circuit input, by the same shift rule. Used to backpropagate through the
/// encoding into a classical front-end.
pub fn input_angle_grad(
    pc: &ParamCircuit,
    params: &[f64],
    encode_angles: &[f64],
    measured: &[usize],
    upstream: &[f64],
) -> Result<Vec<f64>> {
    if encode_angles.len() != pc.n_qubits() {
        return Err(Error::Shape(format!(
            "{} encoding angles for a {}-qubit circuit",
            encode_angles.len(),
            pc.n_qubits()
        )));
    }
    if upstream.len() != measured.len() {
        return Err(Error::Shape(format!(
            "upstream has {} entries for {} measured qubits",
            upstream.len(),
            measured.len()
        )));
    }
    pc.check_params(params)?;
    let mut grad = vec![0.0; encode_angles.len()];
    let mut shifted = encode_angles.to_vec();
    for j in 0..encode_angles.len() {
        shifted[j] = encode_angles[j] + FRAC_PI_2;
        let e_plus = vqc_forward(pc, params, &angle_encode(&shifted)?, measured)?;
        shifted[j] = encode_angles[j] - FRAC_PI_2;
        let e_minus = vqc_forward(pc, params, &angle_encode(&shifted)?, measured)?;
        shifted[j] = encode_angles[j];
        grad[j] = upstream
            .iter()
            .zip(e_plus.iter().zip(&e_minus))
            .map(|(u, (p, m))| u * (p - m) / 2.0)
            .sum();
    }
    Ok(grad)
}
