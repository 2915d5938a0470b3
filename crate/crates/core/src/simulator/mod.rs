//! Reduced and output-feedback closed loops, recovery metrics and monitors.

mod config;
mod recovery;
mod registry;
mod run;
mod trajectory;

pub use config::{
    default_stride, InitialConditions, Mode, SimConfig, DEFAULT_RECORD_INTERVAL,
    DEFAULT_REDUCED_STEP, MIN_STEPS_PER_EPSILON, STEPS_PER_EPSILON,
};
pub use recovery::{
    config_for_epsilon, default_transient_cutoff, default_tube_level, epsilon_sweep,
    epsilon_sweep_with, fitted_decay_rate, grid_for, max_abs_chi, peaking_report,
    post_transient_xi_error, recovery_metric, reduced_config, PeakingReport, RecoveryReport,
};
pub use registry::{lookup, Design, SYSTEM_IDS};
pub use run::{
    calibrate_m_xi, lyapunov_monitors, observer_lyapunov_matrix, scaled_error_coords, simulate,
    simulate_output_feedback, simulate_output_feedback_with, simulate_reduced,
    simulate_reduced_with, simulate_state_feedback, simulate_with, DIVERGENCE_BOUND,
};
pub use trajectory::{Record, Trajectory};
