//! Dense statevector simulation: states, gates, circuits, measurement,
//! sampling, and angle encoding of classical features.

mod gate;
mod state;

pub use gate::{Circuit, GateKind, GateOp, MAX_QUBITS};
pub use num_complex::Complex64;
pub use state::{angle_encode, StateVector};
