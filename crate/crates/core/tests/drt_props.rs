use drtsoh_core::drt::{kkt_violation, lcurve_select, solve_nnls_tikhonov, solve_ridge};
use drtsoh_core::eis::KernelMatrix;
use drtsoh_core::linalg::Matrix;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (KernelMatrix, Vec<f64>)> {
    (3usize..25, 2usize..20, any::<bool>()).prop_flat_map(|(m, n, r0)| {
        let cols = n + usize::from(r0);
        (
            prop::collection::vec(-1.0..1.0f64, m * cols),
            prop::collection::vec(-1.0..1.0f64, m),
        )
            .prop_map(move |(mut a, z)| {
                if r0 {
                    for r in 0..m {
                        a[r * cols] = 1.0;
                    }
                }
                let k = KernelMatrix::new(Matrix::from_row_major(m, cols, a).unwrap(), r0).unwrap();
                (k, z)
            })
    })
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nnls_matches_ridge_when_ridge_is_feasible((a, z) in instance(), lexp in -4.0..1.0f64) {
        let lambda = 10f64.powf(lexp);
        let ridge = solve_ridge(&a, &z, lambda).unwrap();
        if ridge.iter().all(|v| *v >= 0.0) {
            let (g, _) = solve_nnls_tikhonov(&a, &z, lambda).unwrap();
            prop_assert!(rel(&g, &ridge) <= 1e-8, "rel {}", rel(&g, &ridge));
        }
    }

    #[test]
    fn nnls_satisfies_kkt((a, z) in instance(), lexp in -6.0..1.0f64) {
        let lambda = 10f64.powf(lexp);
        let (g, report) = solve_nnls_tikhonov(&a, &z, lambda).unwrap();
        prop_assert!(report.converged);
        prop_assert!(g.iter().all(|v| *v >= 0.0));
        prop_assert!(kkt_violation(&a, &z, lambda, &g).unwrap() <= 1e-8);
    }

    #[test]
    fn nnls_is_bitwise_deterministic((a, z) in instance(), lexp in -6.0..1.0f64) {
        let lambda = 10f64.powf(lexp);
        let (g1, r1) = solve_nnls_tikhonov(&a, &z, lambda).unwrap();
        let (g2, r2) = solve_nnls_tikhonov(&a, &z, lambda).unwrap();
        prop_assert_eq!(g1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), g2.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(r1, r2);
    }

    #[test]
    fn lcurve_is_monotone((a, z) in instance()) {
        let grid: Vec<f64> = (0..12).map(|k| 10f64.powf(-6.0 + 0.6 * k as f64)).collect();
        let (_, pts) = lcurve_select(&a, &z, &grid).unwrap();
        for w in pts.windows(2) {
            prop_assert!(w[1].residual_norm >= w[0].residual_norm - 1e-10);
            prop_assert!(w[1].solution_norm <= w[0].solution_norm + 1e-10);
        }
    }
}
