//! Output-feedback stabilization of nonlinear systems in normal form whose
//! internal dynamics are linear in the unmeasured state and may be unstable.
//!
//! An extended high-gain observer estimates the measured output's derivatives
//! together with the virtual output `σ = C₁(ξ,u)η`; an extended Kalman filter
//! uses that virtual output to estimate `η`. The control is any state feedback
//! `γ(η, ξ)` evaluated on the estimates, with every observer-fed signal
//! saturated against peaking.
//!
//! The crate simulates both the output-feedback loop and its `ε → 0` limit
//! (the reduced loop with exact `ξ` and `σ`) and measures how closely the
//! former recovers the latter.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod numerics;
pub mod observers;
pub mod simulator;
pub mod system;

pub use controller::{FeedbackLaw, SaturationConfig};
pub use error::{Error, Result};
pub use numerics::{OdeSolution, SquareMatrix, VectorField};
pub use observers::{EhgoGains, EkfWeights, ObserverState, RiccatiState};
pub use simulator::{
    Design, InitialConditions, Mode, PeakingReport, RecoveryReport, SimConfig, Trajectory,
};
pub use system::{NormalFormSystem, PlantState};
