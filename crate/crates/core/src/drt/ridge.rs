use crate::eis::KernelMatrix;
use crate::error::{Error, Result};
use crate::linalg::{spd_solve, Matrix};

/// `(AᵀA + λD, AᵀZ)` where `D` is the identity with the R0 entry zeroed.
pub fn regularized_normal_equations(
    a: &KernelMatrix,
    z: &[f64],
    lambda: f64,
) -> Result<(Matrix, Vec<f64>)> {
    if z.len() != a.rows() {
        return Err(Error::arg(format!(
            "kernel has {} rows but Z has {} entries",
            a.rows(),
            z.len()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::arg(format!("lambda must be positive, got {lambda}")));
    }
    let mut g = a.matrix.gram();
    for (i, w) in a.penalty_mask().into_iter().enumerate() {
        g.set(i, i, g.get(i, i) + lambda * w);
    }
    Ok((g, a.matrix.tr_matvec(z)))
}

/// Closed-form Tikhonov minimizer of `‖Ag − Z‖² + λ‖g‖²` with no sign
/// constraint. The R0 column, when present, is not penalized.
pub fn solve_ridge(a: &KernelMatrix, z: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (g, h) = regularized_normal_equations(a, z, lambda)?;
    spd_solve(&g, &h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;

    #[test]
    fn identity_kernel_shrinks_by_one_plus_lambda() {
        let a = KernelMatrix::new(Matrix::identity(4), false).unwrap();
        let z = [0.3, -1.2, 4.0, 0.0];
        let g = solve_ridge(&a, &z, 0.25).unwrap();
        for (gi, zi) in g.iter().zip(z) {
            assert!((gi - zi / 1.25).abs() < 1e-15);
        }
    }

    #[test]
    fn large_lambda_bound() {
        let a = KernelMatrix::new(
            Matrix::from_fn(6, 4, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.2 + 0.1),
            false,
        )
        .unwrap();
        let z = [1.0, 2.0, -0.5, 0.3, 0.9, 1.1];
        let bound = norm2(&a.matrix.tr_matvec(&z));
        for lambda in [1e2, 1e4, 1e8] {
            let g = solve_ridge(&a, &z, lambda).unwrap();
            assert!(norm2(&g) <= bound / lambda * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let a = KernelMatrix::new(Matrix::identity(3), false).unwrap();
        assert!(solve_ridge(&a, &[1.0, 2.0], 0.1).is_err());
        assert!(solve_ridge(&a, &[1.0, 2.0, 3.0], 0.0).is_err());
        assert!(solve_ridge(&a, &[1.0, 2.0, 3.0], -1.0).is_err());
    }
}
