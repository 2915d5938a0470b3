//! Fixed-step ODE integration and small dense linear algebra.

mod linalg;
mod ode;

pub use linalg::{
    companion_lambda, hurwitz_check, is_hurwitz_matrix, is_positive_definite, solve_lyapunov,
    spectral_abscissa, symmetric_defect, symmetric_eigen_range, symmetrize, SquareMatrix,
    HURWITZ_TOLERANCE,
};
pub use ode::{
    integrate_fixed, integrate_with, rk4_step, step_count, FnField, OdeSolution, Rk4, VectorField,
};
