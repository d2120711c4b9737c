//! Pilot assignment for distributed (cell-free) massive MIMO.
//!
//! The crate simulates Monte-Carlo network drops, assigns uplink pilots with
//! a centralized estimation-error-minimizing scheme (EEM), a distributed
//! priority-based scheme (DPB) and two baselines, and scores every
//! assignment with the closed-form partial full-pilot zero-forcing (PFZF)
//! SINR under optimal large-scale fading decoding (LSFD).
//!
//! Pipeline for one drop:
//!
//! 1. [`network::generate_drop`] draws AP/UE positions and the LSFC matrix.
//! 2. [`network::associate_aps`] builds the serving sets.
//! 3. [`assignment::assign_all`] runs a pilot scheme over the UEs in order.
//! 4. [`performance::evaluate`] computes per-UE SINR and spectral efficiency.
//!
//! [`protocol`] replays the distributed scheme as explicit messages between
//! UE and AP agents, and [`harness`] drives whole parameter sweeps.
//!
//! Indices are zero-based throughout: UE `t`, AP `m` and pilot `i` all start
//! at 0.

pub mod assignment;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod performance;
pub mod protocol;
pub mod seed;

pub use error::{Error, Result};
