//! Simulator and optimizer for multicell MIMO broadcast channels assisted by
//! simultaneously transmitting and reflecting surfaces (STAR-RIS), with
//! I/Q-imbalance-aware widely-linear signaling and 1-layer rate splitting.
//!
//! The crate maximizes the minimum weighted energy efficiency across users by
//! alternating between a generalized-Dinkelbach covariance step and a
//! convex-concave RIS-phase step, both built on tight concave rate surrogates.

pub mod channel;
pub mod rate;
pub mod wl;

pub use wl::{CMat, CVec, PsdMatrix, RMat, RVec, RealBlockMatrix, WidelyLinearMap, WlError};
