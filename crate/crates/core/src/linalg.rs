//! Minimal-norm least-squares solves shared by the stencil and jet-fitting
//! paths.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_TOL: f64 = 1e-12;

/// Minimal-norm least-squares solution of `m x = rhs` via SVD, treating
/// singular values below `RANK_TOL` times the largest as zero.
///
/// Returns the solution and the achieved rank.
pub fn min_norm_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = if sigma_max > 0.0 { RANK_TOL * sigma_max } else { f64::MAX };
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd
        .solve(rhs, eps)
        .expect("SVD solve with computed factors");
    (x, rank)
}

/// Moore–Penrose pseudo-inverse with the same rank policy as
/// [`min_norm_solve`]; used where many right-hand sides share one matrix.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = if sigma_max > 0.0 { RANK_TOL * sigma_max } else { f64::MAX };
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let pinv = svd
        .pseudo_inverse(eps)
        .expect("SVD pseudo-inverse with computed factors");
    (pinv, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system_recovers_exact_solution() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let rhs = DVector::from_vec(vec![2.0, 8.0]);
        let (x, rank) = min_norm_solve(&m, &rhs);
        assert_eq!(rank, 2);
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn underdetermined_system_yields_minimal_norm() {
        // x + y = 2 has minimal-norm solution (1, 1)
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let rhs = DVector::from_vec(vec![2.0]);
        let (x, _) = min_norm_solve(&m, &rhs);
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficiency_is_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let rhs = DVector::from_vec(vec![1.0, 2.0]);
        let (_, rank) = min_norm_solve(&m, &rhs);
        assert_eq!(rank, 1);
    }

    #[test]
    fn pinv_matches_solve() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.25, 3.0]);
        let rhs = DVector::from_vec(vec![1.0, -2.0]);
        let (x, _) = min_norm_solve(&m, &rhs);
        let (pinv, _) = pseudo_inverse(&m);
        let y = pinv * rhs;
        assert!((x - y).norm() < 1e-12);
    }
}
