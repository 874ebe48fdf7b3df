//! Exact distributed self-attention on a deterministic simulated processor grid.
//!
//! The crate is layered bottom-up:
//!
//! * [`tensor`]: dense matrices and vectors with a fixed summation order.
//! * [`kernel`]: single-processor attention (dense reference, blockwise
//!   forward/backward, and the partial-result merge operator).
//! * [`mesh`]: an SPMD simulator with point-to-point and ring collectives
//!   that records every transferred word in a [`CommLedger`].
//! * [`dist`]: the 2D-parallel algorithms (non-overlapping and overlapping)
//!   and a load-balanced ring attention baseline, plus a driver that
//!   scatters global inputs and gathers results.
//! * [`cost`]: closed-form communication/memory models and ledger
//!   reconciliation.

pub mod cost;
pub mod dist;
pub mod error;
pub mod kernel;
pub mod mesh;
pub mod scalar;
pub mod tensor;

pub use error::{Error, FaultKind, Result};
pub use kernel::{MaskSpec, PartialAttn, TokenShard};
pub use mesh::{CommLedger, Phase, ProcCoord, ProcGrid};
pub use scalar::{Precision, Scalar};
pub use tensor::{DenseMatrix, RealVector};
