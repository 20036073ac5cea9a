//! State-estimation toolkit: Basic, Extended, and Unscented Kalman filters
//! with a simulation harness covering three benchmark systems (free fall
//! with optional viscous drag, Lotka-Volterra predator-prey, planar radar
//! re-entry tracking).
//!
//! Filter steps are pure functions from estimate to estimate; independent
//! filter instances can run concurrently. All randomness flows through
//! [`sim::RngStream`], so a seed pins every result bit for bit.

pub mod bkf;
pub mod ekf;
pub mod estimate;
pub mod linalg;
pub mod metrics;
pub mod scenarios;
pub mod sim;
pub mod ukf;

#[doc(hidden)]
pub mod testutil;

pub use estimate::{CorrectionReport, FilterError, StateEstimate};
pub use linalg::{LinAlgError, Matrix, Vector};
