//! Quasi-static nonequilibrium Green's function thermodynamics for driven,
//! non-interacting fermionic systems coupled to semi-infinite tight-binding
//! reservoirs.
//!
//! The crate is `no_std` and only needs `alloc`. It provides
//!
//! - the grand-canonical weight functions ([`kernels`]),
//! - closed-form chain self-energies and a decimation cross-check ([`reservoir`]),
//! - the advanced system Green's function, its derivative identities and
//!   bound-state poles ([`greens`]),
//! - energy quadrature that tolerates band-edge square-root singularities
//!   ([`quadrature`]),
//! - partitioned snapshots and first-order rates ([`snapshot`], [`rates`]),
//! - driving protocols and cumulative work accounting ([`protocol`]),
//! - the alpha family of partitions ([`alpha`]),
//! - a finite-universe exact-diagonalization oracle ([`oracle`]).
//!
//! Energies are in units of the problem's energy scale with `k_B = hbar = 1`.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > y)` is deliberate: NaN must land on the failing side
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod alpha;
pub mod error;
pub mod greens;
pub mod kernels;
pub mod matrix;
pub mod oracle;
pub mod protocol;
pub mod quadrature;
pub mod rates;
pub mod reservoir;
pub mod snapshot;

pub use error::{Error, Result};
pub use greens::{BoundState, DriveParams, GreensEval, OperatingPoint, SystemModel};
pub use kernels::{Ensemble, Kernel};
pub use protocol::{run_protocol, Protocol, Ramp, Residuals, ScenarioResult, Segment, StepRecord};
pub use quadrature::{EnergyGrid, QuadratureConfig};
pub use rates::RateVector;
pub use reservoir::{ChainLead, SelfEnergyEval};
pub use snapshot::Snapshot;

/// Largest system dimension handled by the closed-form 2x2 algebra.
pub const MAX_DIM: usize = 2;
