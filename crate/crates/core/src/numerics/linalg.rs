//! Small dense linear algebra: companion matrices, Hurwitz test, Lyapunov solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense square matrix. Only small orders (the internal-state dimension and
/// the observer order) ever occur here.
pub type SquareMatrix = DMatrix<f64>;

/// Real parts within this distance of zero count as unstable.
pub const HURWITZ_TOLERANCE: f64 = 1e-9;

/// Observable-canonical matrix for `s^m + a_1 s^{m-1} + ... + a_m`:
/// `-a` down the first column, ones on the super-diagonal.
pub fn companion_lambda(alphas: &[f64]) -> SquareMatrix {
    let m = alphas.len();
    let mut lambda = DMatrix::zeros(m, m);
    for (i, a) in alphas.iter().enumerate() {
        lambda[(i, 0)] = -a;
        if i + 1 < m {
            lambda[(i, i + 1)] = 1.0;
        }
    }
    lambda
}

/// Largest real part among the eigenvalues of `m`.
pub fn spectral_abscissa(m: &SquareMatrix) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz_matrix(m: &SquareMatrix) -> bool {
    m.iter().all(|x| x.is_finite()) && spectral_abscissa(m) < -HURWITZ_TOLERANCE
}

/// True iff the monic polynomial with the given trailing coefficients has all
/// roots strictly in the left half-plane. Marginal roots are rejected.
pub fn hurwitz_check(alphas: &[f64]) -> bool {
    !alphas.is_empty() && is_hurwitz_matrix(&companion_lambda(alphas))
}

/// Solves `P Λ + Λᵀ P = -I` for symmetric positive definite `P`.
///
/// The entries of `P` are the unknowns of an `m² × m²` linear system, one
/// equation per entry of the matrix identity.
pub fn solve_lyapunov(lambda: &SquareMatrix) -> Result<SquareMatrix> {
    let m = lambda.nrows();
    if m == 0 || lambda.ncols() != m {
        return Err(Error::Dimension {
            context: "lyapunov operand",
            expected: m.max(1),
            got: lambda.ncols(),
        });
    }
    if !is_hurwitz_matrix(lambda) {
        return Err(Error::NotHurwitz);
    }

    let idx = |i: usize, j: usize| i * m + j;
    let mut k = DMatrix::zeros(m * m, m * m);
    let mut rhs = DVector::zeros(m * m);
    for i in 0..m {
        for j in 0..m {
            let row = idx(i, j);
            for l in 0..m {
                // (P Λ)_ij = Σ_l P_il Λ_lj ; (Λᵀ P)_ij = Σ_l Λ_li P_lj
                k[(row, idx(i, l))] += lambda[(l, j)];
                k[(row, idx(l, j))] += lambda[(l, i)];
            }
            if i == j {
                rhs[row] = -1.0;
            }
        }
    }
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("Lyapunov operator"))?;
    let p = DMatrix::from_row_slice(m, m, sol.as_slice());
    Ok(symmetrize(&p))
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &SquareMatrix) -> SquareMatrix {
    (m + m.transpose()) * 0.5
}

/// `max |M - Mᵀ|`.
pub fn symmetric_defect(m: &SquareMatrix) -> f64 {
    (m - m.transpose()).amax()
}

/// Cholesky succeeds on the symmetric part.
pub fn is_positive_definite(m: &SquareMatrix) -> bool {
    m.iter().all(|x| x.is_finite()) && symmetrize(m).cholesky().is_some()
}

/// Extreme eigenvalues of the symmetric part of `m`.
pub fn symmetric_eigen_range(m: &SquareMatrix) -> (f64, f64) {
    let eig = symmetrize(m).symmetric_eigenvalues();
    (eig.min(), eig.max())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(p: &SquareMatrix, lambda: &SquareMatrix) -> f64 {
        let m = lambda.nrows();
        (p * lambda + lambda.transpose() * p + DMatrix::identity(m, m)).amax()
    }

    #[test]
    fn companion_of_paper_gains() {
        let l = companion_lambda(&[5.0, 1.0]);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[-5.0, 1.0, -1.0, 0.0]));
        // det(sI - L) = s(s + 5) + 1
        let trace = l.trace();
        let det = l.determinant();
        assert_eq!((-trace, det), (5.0, 1.0));
    }

    #[test]
    fn companion_of_scalar() {
        assert_eq!(companion_lambda(&[1.0]), DMatrix::from_element(1, 1, -1.0));
    }

    #[test]
    fn companion_of_cubed_root_has_eigenvalues_near_minus_one() {
        let l = companion_lambda(&[3.0, 3.0, 1.0]);
        for z in l.complex_eigenvalues().iter() {
            assert!((z.re + 1.0).abs() < 1e-4 && z.im.abs() < 1e-4, "{z}");
        }
        // Triple roots are ill-conditioned; their mean is not.
        let mean: f64 = l.complex_eigenvalues().iter().map(|z| z.re).sum::<f64>() / 3.0;
        assert!((mean + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hurwitz_examples() {
        assert!(hurwitz_check(&[5.0, 1.0]));
        assert!(!hurwitz_check(&[-1.0]));
        assert!(hurwitz_check(&[3.0, 3.0, 1.0]));
        assert!(!hurwitz_check(&[]));
        assert!(!hurwitz_check(&[f64::NAN, 1.0]));
        // s² + 1: marginal, rejected
        assert!(!hurwitz_check(&[0.0, 1.0]));
    }

    #[test]
    fn lyapunov_scalar_and_diagonal() {
        let p = solve_lyapunov(&DMatrix::from_element(1, 1, -1.0)).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);

        let p = solve_lyapunov(&DMatrix::from_diagonal(&DVector::from_vec(vec![
            -1.0, -2.0,
        ])))
        .unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]));
        assert!((p - want).amax() < 1e-15);
    }

    #[test]
    fn lyapunov_on_paper_companion() {
        let lambda = companion_lambda(&[5.0, 1.0]);
        let p = solve_lyapunov(&lambda).unwrap();
        assert!(residual(&p, &lambda) <= 1e-10);
        assert!(symmetric_defect(&p) <= 1e-12);
        let (lo, _) = symmetric_eigen_range(&p);
        assert!(lo > 0.0);
        // Hand solution of the 3 independent entry equations:
        // -10 p11 - 2 p12 = -1, p11 - 5 p12 - p22 = 0, 2 p12 = -1.
        let p12 = -0.5;
        let p11 = (1.0 - 2.0 * p12) / 10.0;
        let p22 = p11 - 5.0 * p12;
        let want = DMatrix::from_row_slice(2, 2, &[p11, p12, p12, p22]);
        assert!((p - want).amax() < 1e-13);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        assert_eq!(
            solve_lyapunov(&DMatrix::from_element(1, 1, 1.0)),
            Err(Error::NotHurwitz)
        );
    }

    #[test]
    fn positive_definite_and_ranges() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        assert!(is_positive_definite(&d));
        assert_eq!(symmetric_eigen_range(&d), (1.0, 4.0));
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = symmetric_eigen_range(&m);
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
        assert!(!is_positive_definite(&DMatrix::from_row_slice(
            2,
            2,
            &[1.0, 2.0, 2.0, 1.0]
        )));
    }
}
