use std::fmt;
use std::str::FromStr;

use crate::controller::SaturationConfig;
use crate::error::{ensure_dim, Error, Result};
use crate::observers::{EhgoGains, EkfWeights};

use super::registry::{lookup, Design};
use super::run::calibrate_m_xi;

/// Observer step is `epsilon / STEPS_PER_EPSILON` unless configured.
pub const STEPS_PER_EPSILON: f64 = 20.0;
/// Output-feedback runs must resolve the fast time scale at least this finely.
pub const MIN_STEPS_PER_EPSILON: f64 = 10.0;
/// Step used when no fast dynamics are integrated.
pub const DEFAULT_REDUCED_STEP: f64 = 1e-3;
/// Default spacing of recorded samples, seconds.
pub const DEFAULT_RECORD_INTERVAL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Plant + EKF driven by the exact `ξ` and `σ` (the `ε → 0` limit).
    Reduced,
    /// Plant + EKF + extended high-gain observer, measuring only `y`.
    OutputFeedback,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Reduced => "reduced",
            Mode::OutputFeedback => "output",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reduced" => Ok(Mode::Reduced),
            "output" | "output_feedback" => Ok(Mode::OutputFeedback),
            other => Err(Error::Config(format!(
                "mode must be 'reduced' or 'output', got '{other}'"
            ))),
        }
    }
}

/// Initial plant state and observer estimates. `P(0)` lives in [`EkfWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct InitialConditions {
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub xi_hat: Vec<f64>,
    pub sigma_hat: f64,
}

impl InitialConditions {
    pub fn paper() -> Self {
        Self {
            eta: vec![0.5],
            xi: vec![0.9],
            eta_hat: vec![0.0],
            xi_hat: vec![0.1],
            sigma_hat: 0.0,
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Registry id of the plant and feedback law.
    pub system: String,
    pub gains: EhgoGains,
    pub weights: EkfWeights,
    pub sat: SaturationConfig,
    pub mode: Mode,
    pub y_substitution: bool,
    pub saturation_enabled: bool,
    pub t_final: f64,
    pub step: f64,
    pub record_stride: usize,
    pub initial: InitialConditions,
}

impl SimConfig {
    /// The scalar example with its published parameters: `ε = 0.001`,
    /// `α = (5, 1)`, `Q = 1`, `R = 10`, `P(0) = 0.1`, `σ̂` saturated at ±10.
    pub fn paper() -> Self {
        let design = lookup("example").expect("example is registered");
        let initial = InitialConditions::paper();
        let t_final = 20.0;
        let m_xi = calibrate_m_xi(&design, &initial.eta, &initial.xi, t_final)
            .expect("state feedback on the example converges");
        let epsilon = 0.001;
        let step = epsilon / STEPS_PER_EPSILON;
        Self {
            system: "example".into(),
            gains: EhgoGains::new(vec![5.0, 1.0], epsilon).expect("paper gains are Hurwitz"),
            weights: EkfWeights::scalar(1, 1.0, 10.0, 0.1).expect("paper weights are valid"),
            sat: SaturationConfig::with_default_kappa(m_xi, 10.0).expect("positive levels"),
            mode: Mode::OutputFeedback,
            y_substitution: true,
            saturation_enabled: true,
            t_final,
            step,
            record_stride: default_stride(step),
            initial,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.gains.epsilon()
    }

    /// Spacing of recorded samples.
    pub fn record_interval(&self) -> f64 {
        self.step * self.record_stride as f64
    }

    /// Checks the config against the invariants and against the plant it
    /// names.
    pub fn validate(&self, design: &Design) -> Result<()> {
        let sys = &design.system;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        if self.mode == Mode::OutputFeedback
            && self.step > self.epsilon() / MIN_STEPS_PER_EPSILON * (1.0 + 1e-12)
        {
            return Err(Error::Config(format!(
                "step {} exceeds epsilon/10 = {} in output-feedback mode",
                self.step,
                self.epsilon() / MIN_STEPS_PER_EPSILON
            )));
        }
        ensure_dim(
            "alpha length (rho + 1)",
            sys.rho() + 1,
            self.gains.alphas().len(),
        )?;
        ensure_dim("Q order", sys.internal_dim(), self.weights.q.nrows())?;
        ensure_dim("eta0", sys.internal_dim(), self.initial.eta.len())?;
        ensure_dim("xi0", sys.rho(), self.initial.xi.len())?;
        ensure_dim("eta_hat0", sys.internal_dim(), self.initial.eta_hat.len())?;
        ensure_dim("xi_hat0", sys.rho(), self.initial.xi_hat.len())?;
        if self.y_substitution && sys.rho() != 1 {
            return Err(Error::Config(format!(
                "y_substitution requires relative degree 1, system '{}' has {}",
                sys.name(),
                sys.rho()
            )));
        }
        let all_initial = self
            .initial
            .eta
            .iter()
            .chain(&self.initial.xi)
            .chain(&self.initial.eta_hat)
            .chain(&self.initial.xi_hat)
            .chain(std::iter::once(&self.initial.sigma_hat));
        if all_initial.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial conditions must be finite".into()));
        }
        Ok(())
    }
}

/// Stride giving roughly [`DEFAULT_RECORD_INTERVAL`] between samples.
pub fn default_stride(step: f64) -> usize {
    ((DEFAULT_RECORD_INTERVAL / step).round() as usize).max(1)
}
