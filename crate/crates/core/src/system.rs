//! Plants in normal form with internal dynamics linear in the unmeasured state:
//!
//! ```text
//! η' = A₁(ξ,u) η + φ₀(ξ,u)
//! ξ' = A ξ + B [C₁(ξ,u) η + a(ξ,u)]
//! y  = ξ₁
//! ```
//!
//! where `(A, B, C)` is a chain of `ρ` integrators.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{ensure_dim, Error, Result};

type MatrixFn = Arc<dyn Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64], f64) -> DVector<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type Phi1Fn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A plant of the class above, as an immutable bundle of functions.
///
/// `phi1` is the time derivative of `C₁(ξ,u)η` along the closed loop under
/// the intended state feedback, evaluated at `(η, ξ)`. It is supplied by hand
/// for each plant; [`crate::observers::validate_phi1`] checks it numerically.
#[derive(Clone)]
pub struct NormalFormSystem {
    name: String,
    n: usize,
    rho: usize,
    a1: MatrixFn,
    phi0: VectorFn,
    c1: VectorFn,
    a: ScalarFn,
    phi1: Phi1Fn,
}

impl fmt::Debug for NormalFormSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalFormSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("rho", &self.rho)
            .finish_non_exhaustive()
    }
}

impl NormalFormSystem {
    pub fn builder(name: impl Into<String>, n: usize, rho: usize) -> SystemBuilder {
        SystemBuilder {
            name: name.into(),
            n,
            rho,
            a1: None,
            phi0: None,
            c1: None,
            a: None,
            phi1: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Total state dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Relative degree.
    pub fn rho(&self) -> usize {
        self.rho
    }

    /// Dimension of η, `n - ρ`.
    pub fn internal_dim(&self) -> usize {
        self.n - self.rho
    }

    pub fn a1(&self, xi: &[f64], u: f64) -> DMatrix<f64> {
        (self.a1)(xi, u)
    }

    pub fn phi0(&self, xi: &[f64], u: f64) -> DVector<f64> {
        (self.phi0)(xi, u)
    }

    /// `C₁(ξ,u)` stored as a column; it multiplies η as a row.
    pub fn c1(&self, xi: &[f64], u: f64) -> DVector<f64> {
        (self.c1)(xi, u)
    }

    pub fn a(&self, xi: &[f64], u: f64) -> f64 {
        (self.a)(xi, u)
    }

    pub fn phi1(&self, eta: &[f64], xi: &[f64]) -> f64 {
        (self.phi1)(eta, xi)
    }

    /// Same plant with a different `φ₁`.
    pub fn with_phi1<F>(&self, name: impl Into<String>, phi1: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            phi1: Arc::new(phi1),
            ..self.clone()
        }
    }
}

pub struct SystemBuilder {
    name: String,
    n: usize,
    rho: usize,
    a1: Option<MatrixFn>,
    phi0: Option<VectorFn>,
    c1: Option<VectorFn>,
    a: Option<ScalarFn>,
    phi1: Option<Phi1Fn>,
}

impl SystemBuilder {
    /// `A₁(ξ, u)`, an `(n-ρ)×(n-ρ)` matrix.
    pub fn a1<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.a1 = Some(Arc::new(f));
        self
    }

    pub fn phi0<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> DVector<f64> + Send + Sync + 'static,
    {
        self.phi0 = Some(Arc::new(f));
        self
    }

    pub fn c1<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> DVector<f64> + Send + Sync + 'static,
    {
        self.c1 = Some(Arc::new(f));
        self
    }

    pub fn a<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        self.a = Some(Arc::new(f));
        self
    }

    pub fn phi1<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.phi1 = Some(Arc::new(f));
        self
    }

    /// Checks that every function is present and has the right shape at the
    /// origin.
    pub fn build(self) -> Result<NormalFormSystem> {
        if self.rho == 0 || self.rho > self.n {
            return Err(Error::Config(format!(
                "relative degree must satisfy 1 <= rho <= n, got rho = {}, n = {}",
                self.rho, self.n
            )));
        }
        let missing = |what: &str| Error::Config(format!("system '{}' has no {what}", self.name));
        let sys = NormalFormSystem {
            a1: self.a1.clone().ok_or_else(|| missing("A1"))?,
            phi0: self.phi0.clone().ok_or_else(|| missing("phi0"))?,
            c1: self.c1.clone().ok_or_else(|| missing("C1"))?,
            a: self.a.clone().ok_or_else(|| missing("a"))?,
            phi1: self.phi1.clone().ok_or_else(|| missing("phi1"))?,
            name: self.name,
            n: self.n,
            rho: self.rho,
        };
        let m = sys.internal_dim();
        let xi = vec![0.0; sys.rho];
        let a1 = sys.a1(&xi, 0.0);
        ensure_dim("A1 rows", m, a1.nrows())?;
        ensure_dim("A1 columns", m, a1.ncols())?;
        ensure_dim("phi0", m, sys.phi0(&xi, 0.0).len())?;
        ensure_dim("C1", m, sys.c1(&xi, 0.0).len())?;
        Ok(sys)
    }
}

/// Plant state `ϑ = (η, ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub eta: DVector<f64>,
    pub xi: DVector<f64>,
}

impl PlantState {
    pub fn new(eta: &[f64], xi: &[f64]) -> Self {
        Self {
            eta: DVector::from_column_slice(eta),
            xi: DVector::from_column_slice(xi),
        }
    }

    pub fn zeros(sys: &NormalFormSystem) -> Self {
        Self {
            eta: DVector::zeros(sys.internal_dim()),
            xi: DVector::zeros(sys.rho()),
        }
    }

    pub fn check(&self, sys: &NormalFormSystem) -> Result<()> {
        ensure_dim("eta", sys.internal_dim(), self.eta.len())?;
        ensure_dim("xi", sys.rho(), self.xi.len())
    }
}

/// The integrator chain `(A, B, C)` of length `rho`.
pub fn chain_matrices(rho: usize) -> (DMatrix<f64>, DVector<f64>, RowDVector<f64>) {
    let mut a = DMatrix::zeros(rho, rho);
    for i in 0..rho.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    let mut b = DVector::zeros(rho);
    let mut c = RowDVector::zeros(rho);
    if rho > 0 {
        b[rho - 1] = 1.0;
        c[0] = 1.0;
    }
    (a, b, c)
}

/// Writes `A ξ + B v` into `out` without forming `A`.
pub(crate) fn chain_rhs(xi: &[f64], v: f64, out: &mut [f64]) {
    let rho = xi.len();
    out[..rho - 1].copy_from_slice(&xi[1..]);
    out[rho - 1] = v;
}

fn finite_or(function: &'static str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::NonFinite { function })
    }
}

/// `(η', ξ')` at the given state and input.
pub fn plant_rhs(
    sys: &NormalFormSystem,
    state: &PlantState,
    u: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    state.check(sys)?;
    let xi = state.xi.as_slice();
    let a1 = sys.a1(xi, u);
    finite_or("A1", a1.iter().all(|x| x.is_finite()))?;
    let phi0 = sys.phi0(xi, u);
    finite_or("phi0", phi0.iter().all(|x| x.is_finite()))?;
    let c1 = sys.c1(xi, u);
    finite_or("C1", c1.iter().all(|x| x.is_finite()))?;
    let a = sys.a(xi, u);
    finite_or("a", a.is_finite())?;

    let eta_dot = a1 * &state.eta + phi0;
    let mut xi_dot = DVector::zeros(sys.rho());
    chain_rhs(xi, c1.dot(&state.eta) + a, xi_dot.as_mut_slice());
    Ok((eta_dot, xi_dot))
}

/// `y = ξ₁`.
pub fn plant_output(_sys: &NormalFormSystem, state: &PlantState) -> f64 {
    state.xi[0]
}

/// `σ = C₁(ξ,u) η`.
pub fn virtual_output(sys: &NormalFormSystem, state: &PlantState, u: f64) -> f64 {
    sys.c1(state.xi.as_slice(), u).dot(&state.eta)
}

/// `(|φ₀(0,0)|∞, |a(0,0)|)`; both must vanish for the origin to be an
/// equilibrium under a feedback with `γ(0,0) = 0`.
pub fn origin_residuals(sys: &NormalFormSystem) -> (f64, f64) {
    let xi = vec![0.0; sys.rho()];
    let phi0 = sys.phi0(&xi, 0.0);
    let phi0_max = phi0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (phi0_max, sys.a(&xi, 0.0).abs())
}

/// The scalar non-minimum-phase example:
///
/// ```text
/// η' = ξ + η cos ξ,   ξ' = ξ² + η + u,   y = ξ
/// ```
///
/// with `φ₁(η, y) = y + η cos y`.
pub fn example_system() -> NormalFormSystem {
    NormalFormSystem::builder("example", 2, 1)
        .a1(|xi, _| DMatrix::from_element(1, 1, xi[0].cos()))
        .phi0(|xi, _| DVector::from_element(1, xi[0]))
        .c1(|_, _| DVector::from_element(1, 1.0))
        .a(|xi, u| xi[0] * xi[0] + u)
        .phi1(|eta, xi| xi[0] + eta[0] * xi[0].cos())
        .build()
        .expect("example system is well formed")
}
