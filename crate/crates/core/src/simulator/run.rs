//! Closed-loop runs.
//!
//! Each run packs its whole state into one vector and integrates it with a
//! single RK4 clock. After every step the Riccati block is re-symmetrized and
//! checked for positive definiteness.
//!
//! Layouts (`m = n - ρ`):
//!
//! ```text
//! reduced:          [η (m), ξ (ρ), η̂ (m), P (m², row-major)]
//! output feedback:  [η (m), ξ (ρ), η̂ (m), ξ̂ (ρ), σ̂, P (m², row-major)]
//! ```

use nalgebra::{DMatrix, DVector};

use crate::controller::FeedbackLaw;
use crate::error::{Error, Result};
use crate::numerics::{
    companion_lambda, integrate_with, solve_lyapunov, FnField, OdeSolution, SquareMatrix,
};
use crate::observers::{ehgo_gain, EhgoGains, ObserverDesign, ObserverState, RiccatiState};
use crate::system::{chain_rhs, NormalFormSystem, PlantState};

use super::config::{Mode, SimConfig, DEFAULT_REDUCED_STEP};
use super::registry::{lookup, Design};
use super::trajectory::{norm, Record, Trajectory};

/// Any state component beyond this magnitude counts as a blow-up.
pub const DIVERGENCE_BOUND: f64 = 1e10;

/// Runs whichever closed loop `cfg.mode` selects, for a registered system.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    simulate_with(&lookup(&cfg.system)?, cfg)
}

pub fn simulate_with(design: &Design, cfg: &SimConfig) -> Result<Trajectory> {
    match cfg.mode {
        Mode::Reduced => simulate_reduced_with(design, cfg),
        Mode::OutputFeedback => simulate_output_feedback_with(design, cfg),
    }
}

pub fn simulate_reduced(cfg: &SimConfig) -> Result<Trajectory> {
    simulate_reduced_with(&lookup(&cfg.system)?, cfg)
}

pub fn simulate_output_feedback(cfg: &SimConfig) -> Result<Trajectory> {
    simulate_output_feedback_with(&lookup(&cfg.system)?, cfg)
}

/// `P₀` solving `P₀Λ + ΛᵀP₀ = -I` for the observer's companion matrix.
pub fn observer_lyapunov_matrix(g: &EhgoGains) -> Result<SquareMatrix> {
    solve_lyapunov(&companion_lambda(g.alphas()))
}

fn unpack_p(x: &[f64], m: usize) -> SquareMatrix {
    DMatrix::from_row_slice(m, m, x)
}

fn pack_p(p: &SquareMatrix, out: &mut [f64]) {
    let m = p.nrows();
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = p[(i, j)];
        }
    }
}

/// Symmetrizes the Riccati block in place and rejects indefinite or
/// exploding states.
fn riccati_guard(t: f64, x: &mut [f64], p_offset: usize, m: usize) -> Result<()> {
    let p = &mut x[p_offset..p_offset + m * m];
    for i in 0..m {
        for j in i + 1..m {
            let avg = 0.5 * (p[i * m + j] + p[j * m + i]);
            p[i * m + j] = avg;
            p[j * m + i] = avg;
        }
    }
    let positive = if m == 1 {
        p[0] > 0.0
    } else {
        m == 0 || DMatrix::from_row_slice(m, m, p).cholesky().is_some()
    };
    if !positive {
        return Err(Error::RiccatiIndefinite { t });
    }
    if x.iter().any(|v| v.abs() > DIVERGENCE_BOUND) {
        return Err(Error::Integration {
            t,
            what: "state (diverged)",
        });
    }
    Ok(())
}

fn riccati_derivative(
    p: &SquareMatrix,
    a1: &SquareMatrix,
    c1: &DVector<f64>,
    q: &SquareMatrix,
    r: f64,
) -> SquareMatrix {
    let pc = p * c1;
    let a1p = a1 * p;
    &a1p + a1p.transpose() + q - (&pc * pc.transpose()) / r
}

fn check_common(design: &Design, cfg: &SimConfig) -> Result<()> {
    cfg.validate(design)?;
    let m = design.system.internal_dim();
    if cfg.weights.p0.nrows() != m {
        return Err(Error::Dimension {
            context: "P0 order",
            expected: m,
            got: cfg.weights.p0.nrows(),
        });
    }
    Ok(())
}

/// Plant under `u = γ(η̂, ξ)` with the EKF driven by the exact `ξ` and
/// `σ = C₁(ξ,u)η`. `cfg.mode` is ignored.
pub fn simulate_reduced_with(design: &Design, cfg: &SimConfig) -> Result<Trajectory> {
    check_common(design, cfg)?;
    let sys = &design.system;
    let law = &design.law;
    let m = sys.internal_dim();
    let rho = sys.rho();
    let (o_xi, o_eh, o_p) = (m, m + rho, 2 * m + rho);
    let dim = o_p + m * m;
    let q = cfg.weights.q.clone();
    let r = cfg.weights.r;

    let field = FnField::new(dim, |_t, x: &[f64], dx: &mut [f64]| {
        let eta = &x[..o_xi];
        let xi = &x[o_xi..o_eh];
        let eta_hat = &x[o_eh..o_p];
        let p = unpack_p(&x[o_p..], m);
        let u = law.eval(eta_hat, xi);
        let a1 = sys.a1(xi, u);
        let phi0 = sys.phi0(xi, u);
        let c1 = sys.c1(xi, u);
        let eta_v = DVector::from_column_slice(eta);
        let eta_hat_v = DVector::from_column_slice(eta_hat);
        let sigma = c1.dot(&eta_v);

        let eta_dot = &a1 * &eta_v + &phi0;
        dx[..o_xi].copy_from_slice(eta_dot.as_slice());
        chain_rhs(xi, sigma + sys.a(xi, u), &mut dx[o_xi..o_eh]);

        let l = &p * &c1 / r;
        let eta_hat_dot = &a1 * &eta_hat_v + &phi0 + l * (sigma - c1.dot(&eta_hat_v));
        dx[o_eh..o_p].copy_from_slice(eta_hat_dot.as_slice());
        pack_p(&riccati_derivative(&p, &a1, &c1, &q, r), &mut dx[o_p..]);
    });

    let init = &cfg.initial;
    let mut x0 = Vec::with_capacity(dim);
    x0.extend_from_slice(&init.eta);
    x0.extend_from_slice(&init.xi);
    x0.extend_from_slice(&init.eta_hat);
    x0.extend(cfg.weights.p0.transpose().iter());

    let sol = integrate_with(
        &field,
        0.0,
        &x0,
        cfg.step,
        cfg.t_final,
        cfg.record_stride,
        |t, x| riccati_guard(t, x, o_p, m),
    )?;

    let mut traj = Trajectory::empty(Mode::Reduced, None, m, rho);
    traj.records.reserve(sol.len());
    for (t, x) in sol.times.iter().zip(&sol.states) {
        let eta = &x[..o_xi];
        let xi = &x[o_xi..o_eh];
        let eta_hat = &x[o_eh..o_p];
        let p = RiccatiState::new(unpack_p(&x[o_p..], m));
        let u = law.eval(eta_hat, xi);
        let sigma = sys.c1(xi, u).dot(&DVector::from_column_slice(eta));
        let eta_tilde: Vec<f64> = eta.iter().zip(eta_hat).map(|(a, b)| a - b).collect();
        let chi = vec![0.0; rho + 1];
        let (v2, _) = lyapunov_monitors(&chi, &eta_tilde, &p, &DMatrix::zeros(rho + 1, rho + 1))
            .map_err(|_| Error::RiccatiIndefinite { t: *t })?;
        traj.records.push(Record {
            t: *t,
            eta: eta.to_vec(),
            xi: xi.to_vec(),
            y: xi[0],
            u,
            eta_hat: eta_hat.to_vec(),
            xi_hat: xi.to_vec(),
            sigma_hat: sigma,
            sigma_fed: sigma,
            p: x[o_p..].to_vec(),
            eta_tilde,
            chi,
            v2,
            w: 0.0,
        });
    }
    Ok(traj)
}

/// Plant driven by `u = γ̂(η̂, ξ̂)` (or `γ(η̂, y)` under output substitution),
/// with the EKF, the extended high-gain observer and the Riccati equation
/// integrated as one system.
pub fn simulate_output_feedback_with(design: &Design, cfg: &SimConfig) -> Result<Trajectory> {
    check_common(design, cfg)?;
    let sys = &design.system;
    let law = &design.law;
    let m = sys.internal_dim();
    let rho = sys.rho();
    let (o_xi, o_eh, o_xh) = (m, m + rho, 2 * m + rho);
    let o_sh = o_xh + rho;
    let o_p = o_sh + 1;
    let dim = o_p + m * m;
    let q = cfg.weights.q.clone();
    let r = cfg.weights.r;
    let obs_design = ObserverDesign::new(
        sys,
        law,
        cfg.sat,
        cfg.saturation_enabled,
        cfg.y_substitution,
    )?;
    let (h_gain, last_gain) = ehgo_gain(&cfg.gains);

    let field = FnField::new(dim, |_t, x: &[f64], dx: &mut [f64]| {
        let eta = &x[..o_xi];
        let xi = &x[o_xi..o_eh];
        let eta_hat = &x[o_eh..o_xh];
        let xi_hat = &x[o_xh..o_sh];
        let sigma_hat = x[o_sh];
        let p = unpack_p(&x[o_p..], m);
        let y = xi[0];

        let pt = obs_design.eval_point(eta_hat, xi_hat, y);
        let u = pt.u;

        // plant
        let eta_v = DVector::from_column_slice(eta);
        let eta_dot = sys.a1(xi, u) * &eta_v + sys.phi0(xi, u);
        dx[..o_xi].copy_from_slice(eta_dot.as_slice());
        chain_rhs(
            xi,
            sys.c1(xi, u).dot(&eta_v) + sys.a(xi, u),
            &mut dx[o_xi..o_eh],
        );

        // EKF on the saturated virtual output
        let a1_hat = sys.a1(&pt.xi, u);
        let c1_hat = sys.c1(&pt.xi, u);
        let eta_hat_v = DVector::from_column_slice(eta_hat);
        let l = &p * &c1_hat / r;
        let innovation = obs_design.sigma_fed(sigma_hat) - c1_hat.dot(&eta_hat_v);
        let eta_hat_dot = &a1_hat * &eta_hat_v + sys.phi0(&pt.xi, u) + l * innovation;
        dx[o_eh..o_xh].copy_from_slice(eta_hat_dot.as_slice());

        // extended high-gain observer
        let e = y - xi_hat[0];
        chain_rhs(xi_hat, sigma_hat + sys.a(&pt.xi, u), &mut dx[o_xh..o_sh]);
        for (d, h) in dx[o_xh..o_sh].iter_mut().zip(&h_gain) {
            *d += h * e;
        }
        dx[o_sh] = sys.phi1(eta_hat, &pt.xi) + last_gain * e;

        pack_p(
            &riccati_derivative(&p, &a1_hat, &c1_hat, &q, r),
            &mut dx[o_p..],
        );
    });

    let init = &cfg.initial;
    let mut x0 = Vec::with_capacity(dim);
    x0.extend_from_slice(&init.eta);
    x0.extend_from_slice(&init.xi);
    x0.extend_from_slice(&init.eta_hat);
    x0.extend_from_slice(&init.xi_hat);
    x0.push(init.sigma_hat);
    x0.extend(cfg.weights.p0.transpose().iter());

    let sol = integrate_with(
        &field,
        0.0,
        &x0,
        cfg.step,
        cfg.t_final,
        cfg.record_stride,
        |t, x| riccati_guard(t, x, o_p, m),
    )
    .map_err(|e| match e {
        Error::Integration { t, .. } if !cfg.saturation_enabled => Error::Peaking { t },
        other => other,
    })?;

    let p0 = observer_lyapunov_matrix(&cfg.gains)?;
    let mut traj = Trajectory::empty(Mode::OutputFeedback, Some(cfg.epsilon()), m, rho);
    traj.records.reserve(sol.len());
    for (t, x) in sol.times.iter().zip(&sol.states) {
        let plant = PlantState::new(&x[..o_xi], &x[o_xi..o_eh]);
        let obs = ObserverState {
            eta_hat: DVector::from_column_slice(&x[o_eh..o_xh]),
            xi_hat: DVector::from_column_slice(&x[o_xh..o_sh]),
            sigma_hat: x[o_sh],
            riccati: RiccatiState::new(unpack_p(&x[o_p..], m)),
        };
        let y = plant.xi[0];
        let u = obs_design.control(&obs, y);
        let eta_tilde: Vec<f64> = (&plant.eta - &obs.eta_hat).iter().copied().collect();
        let chi = scaled_error_coords(sys, law, &plant, &obs, &cfg.gains);
        let (v2, w) = lyapunov_monitors(&chi, &eta_tilde, &obs.riccati, &p0)
            .map_err(|_| Error::RiccatiIndefinite { t: *t })?;
        traj.records.push(Record {
            t: *t,
            eta: plant.eta.iter().copied().collect(),
            xi: plant.xi.iter().copied().collect(),
            y,
            u,
            eta_hat: obs.eta_hat.iter().copied().collect(),
            xi_hat: obs.xi_hat.iter().copied().collect(),
            sigma_hat: obs.sigma_hat,
            sigma_fed: obs_design.sigma_fed(obs.sigma_hat),
            p: x[o_p..].to_vec(),
            eta_tilde,
            chi,
            v2,
            w,
        });
    }
    Ok(traj)
}

/// Scaled observer error: `χ_i = (ξ_i - ξ̂_i)/ε^{ρ+1-i}` for `i ≤ ρ` and
/// `χ_{ρ+1} = C₁(ξ, γ(η̂, ξ))η - σ̂`.
pub fn scaled_error_coords(
    sys: &NormalFormSystem,
    law: &FeedbackLaw,
    plant: &PlantState,
    obs: &ObserverState,
    g: &EhgoGains,
) -> Vec<f64> {
    let rho = plant.xi.len();
    let eps = g.epsilon();
    let mut chi = Vec::with_capacity(rho + 1);
    for i in 0..rho {
        // 0-based i corresponds to exponent ρ - i
        chi.push((plant.xi[i] - obs.xi_hat[i]) / eps.powi((rho - i) as i32));
    }
    let xi = plant.xi.as_slice();
    let u = law.eval(obs.eta_hat.as_slice(), xi);
    chi.push(sys.c1(xi, u).dot(&plant.eta) - obs.sigma_hat);
    chi
}

/// `(V₂, W) = (η̃ᵀP⁻¹η̃, χᵀP₀χ)`.
pub fn lyapunov_monitors(
    chi: &[f64],
    eta_tilde: &[f64],
    p: &RiccatiState,
    p0: &SquareMatrix,
) -> Result<(f64, f64)> {
    let v2 = if eta_tilde.is_empty() {
        0.0
    } else {
        let chol =
            p.p.clone()
                .cholesky()
                .ok_or(Error::Singular("Riccati matrix"))?;
        let e = DVector::from_column_slice(eta_tilde);
        e.dot(&chol.solve(&e))
    };
    let c = DVector::from_column_slice(chi);
    let w = if chi.iter().all(|x| *x == 0.0) {
        0.0
    } else {
        c.dot(&(p0 * &c))
    };
    Ok((v2, w))
}

/// Exact state feedback `u = γ(η, ξ)`; states are stored as `[η, ξ]`.
pub fn simulate_state_feedback(
    sys: &NormalFormSystem,
    law: &FeedbackLaw,
    eta0: &[f64],
    xi0: &[f64],
    step: f64,
    t_final: f64,
    record_stride: usize,
) -> Result<OdeSolution> {
    let m = sys.internal_dim();
    let field = FnField::new(sys.n(), |_t, x: &[f64], dx: &mut [f64]| {
        let (eta, xi) = x.split_at(m);
        let u = law.eval(eta, xi);
        let eta_v = DVector::from_column_slice(eta);
        let eta_dot = sys.a1(xi, u) * &eta_v + sys.phi0(xi, u);
        dx[..m].copy_from_slice(eta_dot.as_slice());
        chain_rhs(xi, sys.c1(xi, u).dot(&eta_v) + sys.a(xi, u), &mut dx[m..]);
    });
    let mut x0 = eta0.to_vec();
    x0.extend_from_slice(xi0);
    integrate_with(&field, 0.0, &x0, step, t_final, record_stride, |t, x| {
        if x.iter().any(|v| v.abs() > DIVERGENCE_BOUND) {
            Err(Error::Integration {
                t,
                what: "state (diverged)",
            })
        } else {
            Ok(())
        }
    })
}

/// Saturation level for `ξ̂`: 1.5 times the largest `‖ξ‖` seen under exact
/// state feedback from the given initial state. Falls back to 1 when `ξ`
/// never leaves the origin.
pub fn calibrate_m_xi(design: &Design, eta0: &[f64], xi0: &[f64], t_final: f64) -> Result<f64> {
    let sol = simulate_state_feedback(
        &design.system,
        &design.law,
        eta0,
        xi0,
        DEFAULT_REDUCED_STEP,
        t_final,
        1,
    )?;
    let m = design.system.internal_dim();
    let peak = sol.states.iter().map(|x| norm(&x[m..])).fold(0.0, f64::max);
    Ok(if peak > 0.0 { 1.5 * peak } else { 1.0 })
}
