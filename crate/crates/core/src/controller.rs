//! State feedback and the saturations that protect the loop from observer
//! peaking.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `u = γ(η, ξ)`.
///
/// The law must be C¹ with `γ(0,0) = 0`, and the loop
/// `ϑ' = f(ϑ, γ(η + ν, ξ))` must be input-to-state stable with respect to the
/// estimation error `ν`. The library cannot check the ISS requirement; the
/// simulator only exhibits convergence empirically.
type LawFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct FeedbackLaw {
    f: Arc<LawFn>,
}

impl fmt::Debug for FeedbackLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FeedbackLaw")
    }
}

impl FeedbackLaw {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { f: Arc::new(f) }
    }

    /// The backstepping law for [`crate::system::example_system`].
    pub fn example() -> Self {
        Self::new(|eta, xi| example_control(eta[0], xi[0]))
    }

    pub fn eval(&self, eta: &[f64], xi: &[f64]) -> f64 {
        (self.f)(eta, xi)
    }
}

/// `u = -4η - 3ξ - ξ² - 2η cos ξ`.
pub fn example_control(eta: f64, xi: f64) -> f64 {
    -4.0 * eta - 3.0 * xi - xi * xi - 2.0 * eta * xi.cos()
}

/// Saturation levels for the estimated chain state and the virtual output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationConfig {
    pub m_xi: f64,
    pub m_sigma: f64,
    /// Width of the smooth roll-off beyond `m_xi`.
    pub kappa: f64,
}

impl SaturationConfig {
    pub fn new(m_xi: f64, m_sigma: f64, kappa: f64) -> Result<Self> {
        for (name, v) in [("M_xi", m_xi), ("M_sigma", m_sigma), ("kappa", kappa)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            m_xi,
            m_sigma,
            kappa,
        })
    }

    /// `kappa = 0.1 M_xi`.
    pub fn with_default_kappa(m_xi: f64, m_sigma: f64) -> Result<Self> {
        Self::new(m_xi, m_sigma, 0.1 * m_xi)
    }

    pub fn psi(&self, xi: &[f64]) -> Vec<f64> {
        smooth_sat(xi, self.m_xi, self.kappa)
    }

    pub fn sigma(&self, sigma: f64) -> f64 {
        standard_sat(sigma, self.m_sigma)
    }
}

/// `M sat(v / M)`.
pub fn standard_sat(v: f64, m: f64) -> f64 {
    v.clamp(-m, m)
}

/// Radial saturation `ψ`: the identity on the ball `‖ξ‖ ≤ M`; outside it the
/// radius is mapped through `M + κ tanh((s - M)/κ)`, which is C¹ at `s = M`
/// and bounded by `M + κ`.
pub fn smooth_sat(xi: &[f64], m: f64, kappa: f64) -> Vec<f64> {
    let s = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if s <= m {
        return xi.to_vec();
    }
    let r = radial_profile(s, m, kappa);
    xi.iter().map(|x| x * (r / s)).collect()
}

fn radial_profile(s: f64, m: f64, kappa: f64) -> f64 {
    if s <= m {
        s
    } else {
        m + kappa * ((s - m) / kappa).tanh()
    }
}

/// Replaces the `ξ` argument of `f(η, ξ)` by `ψ(ξ)`.
pub fn lift_saturated<T, F>(f: F, sat: SaturationConfig) -> impl Fn(&[f64], &[f64]) -> T
where
    F: Fn(&[f64], &[f64]) -> T,
{
    move |eta, xi| f(eta, &sat.psi(xi))
}
