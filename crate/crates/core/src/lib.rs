//! Link-level simulation and phase optimization for RIS-assisted industrial
//! wireless links.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: complex containers, seeded random streams, order statistics
//!   and the inverse Gaussian tail function.
//! - [`channel`]: node geometry, log-distance path loss and fading draws.
//! - [`ris`]: the surface state, phase controllers, the practical amplitude
//!   response and the received-signal evaluation.
//! - [`impairment`]: CSI phase-mismatch models and the normalized-gain study.
//! - [`rate`]: zero-forcing precoding, SINR, Shannon and finite-blocklength
//!   rates.
//! - [`rl`]: a small MLP with hand-written backpropagation, a replay buffer and
//!   a TD3 agent driving the surface phases.
//! - [`harness`]: configuration, experiment orchestration and CSV/report
//!   emission used by the `rislink` binary.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so that NaN
// fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod harness;
pub mod impairment;
pub mod numerics;
pub mod rate;
pub mod ris;
pub mod rl;

pub use error::{Error, Result};
pub use numerics::C64;
