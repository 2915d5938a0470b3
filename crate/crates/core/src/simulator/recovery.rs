//! Comparison of output-feedback runs against the reduced closed loop.

use crate::error::{Error, Result};
use crate::numerics::SquareMatrix;
use crate::observers::EhgoGains;

use super::config::{Mode, SimConfig, DEFAULT_REDUCED_STEP, STEPS_PER_EPSILON};
use super::registry::{lookup, Design};
use super::run::{simulate_output_feedback_with, simulate_reduced_with};
use super::trajectory::{dist, norm, Trajectory};

/// Sample times closer than this (relative) are the same grid point.
const GRID_TOLERANCE: f64 = 1e-9;

/// `(sup ‖ϑ - ϑ_r‖, sup ‖η̃ - η̃_r‖)` over a shared recording grid.
pub fn recovery_metric(traj_of: &Trajectory, traj_red: &Trajectory) -> Result<(f64, f64)> {
    if traj_of.len() != traj_red.len() {
        return Err(Error::GridMismatch(format!(
            "{} samples vs {}",
            traj_of.len(),
            traj_red.len()
        )));
    }
    let mut dev_theta = 0.0f64;
    let mut dev_eta_tilde = 0.0f64;
    for (a, b) in traj_of.records.iter().zip(&traj_red.records) {
        if (a.t - b.t).abs() > GRID_TOLERANCE * a.t.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("t = {} vs t = {}", a.t, b.t)));
        }
        let d2 = dist(&a.eta, &b.eta).powi(2) + dist(&a.xi, &b.xi).powi(2);
        dev_theta = dev_theta.max(d2.sqrt());
        dev_eta_tilde = dev_eta_tilde.max(dist(&a.eta_tilde, &b.eta_tilde));
    }
    Ok((dev_theta, dev_eta_tilde))
}

/// Per-`ε` deviations of output-feedback runs from the reduced run.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub epsilons: Vec<f64>,
    pub sup_dev_theta: Vec<f64>,
    pub sup_dev_eta_tilde: Vec<f64>,
    /// Start of the window used for the post-transient columns.
    pub transient_cutoff: f64,
    /// `max ‖ξ - ξ̂‖` over `t ≥ transient_cutoff`.
    pub post_transient_xi_error: Vec<f64>,
    /// `max ‖χ‖` over the whole run.
    pub max_abs_chi: Vec<f64>,
}

impl RecoveryReport {
    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }
}

/// Step and stride for a run whose step may not exceed `max_step` but whose
/// samples must fall every `interval` seconds.
pub fn grid_for(interval: f64, max_step: f64) -> (f64, usize) {
    let stride = ((interval / max_step) - 1e-9).ceil().max(1.0) as usize;
    (interval / stride as f64, stride)
}

/// Output-feedback config for one `ε` on the recording grid of `base`.
pub fn config_for_epsilon(base: &SimConfig, epsilon: f64) -> Result<SimConfig> {
    let (step, stride) = grid_for(base.record_interval(), epsilon / STEPS_PER_EPSILON);
    Ok(SimConfig {
        gains: base.gains.with_epsilon(epsilon)?,
        mode: Mode::OutputFeedback,
        step,
        record_stride: stride,
        ..base.clone()
    })
}

/// Reduced config on the recording grid of `base`.
pub fn reduced_config(base: &SimConfig) -> SimConfig {
    let (step, stride) = grid_for(base.record_interval(), DEFAULT_REDUCED_STEP);
    SimConfig {
        mode: Mode::Reduced,
        step,
        record_stride: stride,
        ..base.clone()
    }
}

/// Default post-transient window start: 100 times the largest `ε`.
pub fn default_transient_cutoff(epsilons: &[f64]) -> f64 {
    100.0 * epsilons.iter().copied().fold(0.0, f64::max)
}

pub fn epsilon_sweep(cfg: &SimConfig, epsilons: &[f64]) -> Result<RecoveryReport> {
    epsilon_sweep_with(&lookup(&cfg.system)?, cfg, epsilons)
}

/// One reduced run plus one output-feedback run per `ε`, all from the
/// initial data in `cfg` and recorded every `cfg.record_interval()` seconds.
/// Runs execute on separate threads; results keep the input order.
pub fn epsilon_sweep_with(
    design: &Design,
    cfg: &SimConfig,
    epsilons: &[f64],
) -> Result<RecoveryReport> {
    if epsilons.is_empty() {
        return Err(Error::Config("epsilon list is empty".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Config(format!(
            "epsilons must be positive: {epsilons:?}"
        )));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!(
            "epsilons must be strictly decreasing: {epsilons:?}"
        )));
    }
    let interval = cfg.record_interval();
    let samples = cfg.t_final / interval;
    if (samples - samples.round()).abs() > 1e-9 * samples.max(1.0) {
        return Err(Error::Config(format!(
            "t_final {} is not a multiple of the record interval {interval}",
            cfg.t_final
        )));
    }

    let reduced_cfg = reduced_config(cfg);
    let of_cfgs = epsilons
        .iter()
        .map(|&e| config_for_epsilon(cfg, e))
        .collect::<Result<Vec<_>>>()?;

    let (reduced, runs) = std::thread::scope(|s| {
        let red = s.spawn(|| simulate_reduced_with(design, &reduced_cfg));
        let handles: Vec<_> = of_cfgs
            .iter()
            .map(|c| s.spawn(move || simulate_output_feedback_with(design, c)))
            .collect();
        let runs: Vec<_> = handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect();
        (red.join().expect("simulation thread panicked"), runs)
    });
    let reduced = reduced?;
    let cutoff = default_transient_cutoff(epsilons);

    let mut report = RecoveryReport {
        epsilons: epsilons.to_vec(),
        sup_dev_theta: Vec::with_capacity(epsilons.len()),
        sup_dev_eta_tilde: Vec::with_capacity(epsilons.len()),
        transient_cutoff: cutoff,
        post_transient_xi_error: Vec::with_capacity(epsilons.len()),
        max_abs_chi: Vec::with_capacity(epsilons.len()),
    };
    for (&epsilon, run) in epsilons.iter().zip(runs) {
        let wrap = |e: Error| Error::Sweep {
            epsilon,
            source: Box::new(e),
        };
        let traj = run.map_err(wrap)?;
        let (theta, eta_tilde) = recovery_metric(&traj, &reduced).map_err(wrap)?;
        report.sup_dev_theta.push(theta);
        report.sup_dev_eta_tilde.push(eta_tilde);
        report
            .post_transient_xi_error
            .push(post_transient_xi_error(&traj, cutoff));
        report.max_abs_chi.push(max_abs_chi(&traj));
    }
    Ok(report)
}

/// `max ‖ξ - ξ̂‖` over samples with `t ≥ cutoff`.
pub fn post_transient_xi_error(traj: &Trajectory, cutoff: f64) -> f64 {
    traj.after(cutoff)
        .map(|r| dist(&r.xi, &r.xi_hat))
        .fold(0.0, f64::max)
}

pub fn max_abs_chi(traj: &Trajectory) -> f64 {
    traj.records
        .iter()
        .map(|r| norm(&r.chi))
        .fold(0.0, f64::max)
}

/// Peak of the scaled observer error and the time the run settles into the
/// tube `W(χ) ≤ tube_level · ε²` for good.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakingReport {
    pub max_abs_chi: f64,
    /// `None` when the last sample is still outside the tube.
    pub entry_time: Option<f64>,
}

pub fn peaking_report(
    traj: &Trajectory,
    g: &EhgoGains,
    p0: &SquareMatrix,
    tube_level: f64,
) -> PeakingReport {
    let eps2 = g.epsilon() * g.epsilon();
    let w = |chi: &[f64]| {
        let c = nalgebra::DVector::from_column_slice(chi);
        c.dot(&(p0 * &c))
    };
    let last_outside = traj
        .records
        .iter()
        .rposition(|r| w(&r.chi) > tube_level * eps2);
    let entry_time = match last_outside {
        None => traj.records.first().map(|r| r.t),
        Some(k) => traj.records.get(k + 1).map(|r| r.t),
    };
    PeakingReport {
        max_abs_chi: max_abs_chi(traj),
        entry_time,
    }
}

/// Tube level `4 max W(χ(t)) / ε²` over samples with `t ≥ 100 ε`, i.e. a
/// tube wide enough to hold the slow phase of this particular run. The entry
/// time it produces is an empirical diagnostic, not the proof's `T(ε)`.
pub fn default_tube_level(traj: &Trajectory, g: &EhgoGains) -> f64 {
    let eps = g.epsilon();
    traj.after(100.0 * eps).map(|r| r.w).fold(0.0, f64::max) * 4.0 / (eps * eps)
}

/// Least-squares slope of `ln ‖ϑ(t)‖` over `[from, to]`, negated. Diagnostic
/// only; samples with `ϑ = 0` are skipped.
pub fn fitted_decay_rate(traj: &Trajectory, from: f64, to: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = traj
        .records
        .iter()
        .filter(|r| r.t >= from && r.t <= to)
        .filter_map(|r| {
            let n = (norm(&r.eta).powi(2) + norm(&r.xi).powi(2)).sqrt();
            (n > 0.0).then(|| (r.t, n.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}
