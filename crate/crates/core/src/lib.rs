//! Hybrid quantum-classical machine learning toolkit.
//!
//! Everything runs on a dense statevector simulator (up to 12 qubits) with
//! exact parameter-shift gradients, a small from-scratch neural-network stack,
//! and deterministic seeded training. The pieces compose into a hybrid
//! CNN+VQC classifier, a hybrid quantum GAN, and two generative
//! data-augmentation strategies over class-labeled image datasets.

pub mod augment;
pub mod data;
pub mod error;
pub mod hqcnn;
pub mod nn;
pub mod qgan;
pub mod quantum;
pub mod seeding;
pub mod vqc;

pub use error::{Error, Result};
