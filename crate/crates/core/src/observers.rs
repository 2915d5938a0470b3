//! Extended Kalman filter for the internal state and extended high-gain
//! observer for the integrator chain plus the virtual output `σ = C₁η`.
//!
//! The observer evaluates every plant function at a single point per call:
//! either `(ψ(ξ̂), γ(η̂, ψ(ξ̂)))` in the general form, or `(y, γ(η̂, y))` when the
//! measured output is substituted for `ξ̂` (only meaningful for `ρ = 1`).
//! Non-finite derivatives are reported by the integrator that consumes them.

use nalgebra::{DMatrix, DVector};

use crate::controller::{FeedbackLaw, SaturationConfig};
use crate::error::{ensure_dim, Error, Result};
use crate::numerics::{
    hurwitz_check, is_positive_definite, symmetric_defect, symmetric_eigen_range, OdeSolution,
    SquareMatrix,
};
use crate::system::NormalFormSystem;

/// Solution of the differential Riccati equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiState {
    pub p: SquareMatrix,
}

impl RiccatiState {
    pub fn new(p: SquareMatrix) -> Self {
        Self { p }
    }
}

/// Constant EKF weights `Q`, `R` and the Riccati initial value `P(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EkfWeights {
    pub q: SquareMatrix,
    pub r: f64,
    pub p0: SquareMatrix,
}

impl EkfWeights {
    pub fn new(q: SquareMatrix, r: f64, p0: SquareMatrix) -> Result<Self> {
        if q.shape() != p0.shape() || !q.is_square() {
            return Err(Error::Config(format!(
                "Q {:?} and P0 {:?} must be square of the same order",
                q.shape(),
                p0.shape()
            )));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("R must be positive, got {r}")));
        }
        for (name, m) in [("Q", &q), ("P0", &p0)] {
            if symmetric_defect(m) > 1e-12 || !is_positive_definite(m) {
                return Err(Error::Config(format!(
                    "{name} must be symmetric positive definite"
                )));
            }
        }
        Ok(Self { q, r, p0 })
    }

    /// `Q = q I`, `P(0) = p0 I` of order `m`.
    pub fn scalar(m: usize, q: f64, r: f64, p0: f64) -> Result<Self> {
        Self::new(DMatrix::identity(m, m) * q, r, DMatrix::identity(m, m) * p0)
    }
}

/// Observer polynomial coefficients `α₁…α_{ρ+1}` and the gain scale `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct EhgoGains {
    alphas: Vec<f64>,
    epsilon: f64,
}

impl EhgoGains {
    pub fn new(alphas: Vec<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !hurwitz_check(&alphas) {
            return Err(Error::Config(format!(
                "alpha = {alphas:?} does not define a Hurwitz polynomial"
            )));
        }
        Ok(Self { alphas, epsilon })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Observer order minus one.
    pub fn rho(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.alphas.clone(), epsilon)
    }
}

/// `(η̂, ξ̂, σ̂, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub eta_hat: DVector<f64>,
    pub xi_hat: DVector<f64>,
    pub sigma_hat: f64,
    pub riccati: RiccatiState,
}

/// `Ṗ = A₁P + PA₁ᵀ + Q - P C₁ᵀ R⁻¹ C₁ P`.
pub fn riccati_rhs(
    p: &RiccatiState,
    a1: &SquareMatrix,
    c1: &DVector<f64>,
    w: &EkfWeights,
) -> Result<SquareMatrix> {
    if !(w.r > 0.0) {
        return Err(Error::Config(format!("R must be positive, got {}", w.r)));
    }
    let m = p.p.nrows();
    ensure_dim("Riccati A1", m, a1.nrows())?;
    ensure_dim("Riccati C1", m, c1.len())?;
    let pc = &p.p * c1;
    let a1p = a1 * &p.p;
    Ok(&a1p + a1p.transpose() + &w.q - (&pc * pc.transpose()) / w.r)
}

/// `L = P C₁ᵀ / R`.
pub fn ekf_gain(p: &RiccatiState, c1: &DVector<f64>, r: f64) -> DVector<f64> {
    &p.p * c1 / r
}

/// `H_i = α_i / ε^i` for `i = 1..ρ`, and the `σ̂` gain `α_{ρ+1} / ε^{ρ+1}`.
pub fn ehgo_gain(g: &EhgoGains) -> (Vec<f64>, f64) {
    let mut scale = 1.0;
    let mut h = Vec::with_capacity(g.rho());
    for a in &g.alphas[..g.rho()] {
        scale *= g.epsilon;
        h.push(a / scale);
    }
    let last = g.alphas[g.rho()] / (scale * g.epsilon);
    (h, last)
}

/// Where the plant functions are evaluated inside the observer.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub xi: Vec<f64>,
    pub u: f64,
}

/// Plant, feedback law and saturation wiring shared by the observer equations.
#[derive(Debug, Clone, Copy)]
pub struct ObserverDesign<'a> {
    pub sys: &'a NormalFormSystem,
    pub law: &'a FeedbackLaw,
    pub sat: SaturationConfig,
    pub saturation_enabled: bool,
    pub y_substitution: bool,
}

impl<'a> ObserverDesign<'a> {
    pub fn new(
        sys: &'a NormalFormSystem,
        law: &'a FeedbackLaw,
        sat: SaturationConfig,
        saturation_enabled: bool,
        y_substitution: bool,
    ) -> Result<Self> {
        if y_substitution && sys.rho() != 1 {
            return Err(Error::Config(format!(
                "output substitution needs relative degree 1, system '{}' has {}",
                sys.name(),
                sys.rho()
            )));
        }
        Ok(Self {
            sys,
            law,
            sat,
            saturation_enabled,
            y_substitution,
        })
    }

    /// `ψ(ξ̂)`, or `ξ̂` itself when saturation is off.
    pub fn psi(&self, xi_hat: &[f64]) -> Vec<f64> {
        if self.saturation_enabled {
            self.sat.psi(xi_hat)
        } else {
            xi_hat.to_vec()
        }
    }

    /// `M_σ sat(σ̂ / M_σ)`, or `σ̂` when saturation is off.
    pub fn sigma_fed(&self, sigma_hat: f64) -> f64 {
        if self.saturation_enabled {
            self.sat.sigma(sigma_hat)
        } else {
            sigma_hat
        }
    }

    pub fn eval_point(&self, eta_hat: &[f64], xi_hat: &[f64], y: f64) -> EvalPoint {
        let xi = if self.y_substitution {
            vec![y]
        } else {
            self.psi(xi_hat)
        };
        let u = self.law.eval(eta_hat, &xi);
        EvalPoint { xi, u }
    }

    /// Output-feedback control `γ̂(η̂, ξ̂)` (or `γ(η̂, y)`).
    pub fn control(&self, obs: &ObserverState, y: f64) -> f64 {
        self.eval_point(obs.eta_hat.as_slice(), obs.xi_hat.as_slice(), y)
            .u
    }

    /// `η̂' = Â₁η̂ + φ̂₀ + L [M_σ sat(σ̂/M_σ) - Ĉ₁η̂]`.
    pub fn ekf_rhs(&self, obs: &ObserverState, y: f64, l: &DVector<f64>) -> DVector<f64> {
        let pt = self.eval_point(obs.eta_hat.as_slice(), obs.xi_hat.as_slice(), y);
        self.ekf_rhs_at(&pt, obs, l)
    }

    pub(crate) fn ekf_rhs_at(
        &self,
        pt: &EvalPoint,
        obs: &ObserverState,
        l: &DVector<f64>,
    ) -> DVector<f64> {
        let a1 = self.sys.a1(&pt.xi, pt.u);
        let phi0 = self.sys.phi0(&pt.xi, pt.u);
        let c1 = self.sys.c1(&pt.xi, pt.u);
        let innovation = self.sigma_fed(obs.sigma_hat) - c1.dot(&obs.eta_hat);
        a1 * &obs.eta_hat + phi0 + l * innovation
    }

    /// `(ξ̂', σ̂')` for a given applied input `u`.
    pub fn ehgo_rhs(
        &self,
        obs: &ObserverState,
        y: f64,
        u: f64,
        g: &EhgoGains,
    ) -> (DVector<f64>, f64) {
        let xi = if self.y_substitution {
            vec![y]
        } else {
            self.psi(obs.xi_hat.as_slice())
        };
        let (h, last) = ehgo_gain(g);
        let rho = obs.xi_hat.len();
        let innovation = y - obs.xi_hat[0];
        let mut xi_dot = DVector::zeros(rho);
        for i in 0..rho - 1 {
            xi_dot[i] = obs.xi_hat[i + 1];
        }
        xi_dot[rho - 1] = obs.sigma_hat + self.sys.a(&xi, u);
        for i in 0..rho {
            xi_dot[i] += h[i] * innovation;
        }
        let sigma_dot = self.sys.phi1(obs.eta_hat.as_slice(), &xi) + last * innovation;
        (xi_dot, sigma_dot)
    }

    /// `(Â₁, Ĉ₁)` at the observer's current evaluation point.
    pub fn riccati_coefficients(
        &self,
        obs: &ObserverState,
        y: f64,
    ) -> (SquareMatrix, DVector<f64>) {
        let pt = self.eval_point(obs.eta_hat.as_slice(), obs.xi_hat.as_slice(), y);
        (self.sys.a1(&pt.xi, pt.u), self.sys.c1(&pt.xi, pt.u))
    }
}

/// Largest gap between the registered `φ₁` and a centred finite difference
/// of `t ↦ C₁(ξ(t), γ(η(t), ξ(t))) η(t)` along a state-feedback probe.
///
/// The probe stores `(η, ξ)` on a uniform grid. Probes with fewer than three
/// samples cannot be checked and yield `+∞`.
pub fn validate_phi1(sys: &NormalFormSystem, law: &FeedbackLaw, probe: &OdeSolution) -> f64 {
    if probe.len() < 3 {
        return f64::INFINITY;
    }
    let m = sys.internal_dim();
    let sigma: Vec<f64> = probe
        .states
        .iter()
        .map(|x| {
            let (eta, xi) = x.split_at(m);
            let u = law.eval(eta, xi);
            sys.c1(xi, u).dot(&DVector::from_column_slice(eta))
        })
        .collect();
    (1..probe.len() - 1)
        .map(|k| {
            let fd = (sigma[k + 1] - sigma[k - 1]) / (probe.times[k + 1] - probe.times[k - 1]);
            let (eta, xi) = probe.states[k].split_at(m);
            (sys.phi1(eta, xi) - fd).abs()
        })
        .fold(0.0, f64::max)
}

/// Eigenvalue extremes and asymmetry of a Riccati solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub symmetric_defect: f64,
}

pub fn pd_monitor(p: &RiccatiState) -> PdReport {
    let (lambda_min, lambda_max) = if p.p.nrows() == 0 {
        (f64::INFINITY, f64::NEG_INFINITY)
    } else {
        symmetric_eigen_range(&p.p)
    };
    PdReport {
        lambda_min,
        lambda_max,
        symmetric_defect: symmetric_defect(&p.p),
    }
}
