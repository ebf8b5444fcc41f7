use serde::{Deserialize, Serialize};

use super::nnls::solve_nnls_tikhonov;
use crate::eis::KernelMatrix;
use crate::error::{Error, Result};
use crate::linalg::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LCurvePoint {
    pub lambda: f64,
    /// `‖A ĝ − Z‖₂`
    pub residual_norm: f64,
    /// `‖ĝ‖₂` over the regularized entries (R0 excluded).
    pub solution_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerMethod {
    MaxCurvature,
    ChordDistance,
    /// Every λ produced the zero distribution; all choices are equivalent.
    Flat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LCurveSelection {
    pub lambda_star: f64,
    pub index: usize,
    pub method: CornerMethod,
    pub points: Vec<LCurvePoint>,
    /// Constrained solutions, one per λ on the grid.
    pub solutions: Vec<Vec<f64>>,
}

/// Sweep `lambda_grid` and return the λ at the corner of the
/// (log residual, log solution norm) curve.
pub fn lcurve_select(
    a: &KernelMatrix,
    z: &[f64],
    lambda_grid: &[f64],
) -> Result<(f64, Vec<LCurvePoint>)> {
    let sel = lcurve_select_detailed(a, z, lambda_grid)?;
    Ok((sel.lambda_star, sel.points))
}

pub fn lcurve_select_detailed(
    a: &KernelMatrix,
    z: &[f64],
    lambda_grid: &[f64],
) -> Result<LCurveSelection> {
    if lambda_grid.len() < 5 {
        return Err(Error::arg(format!(
            "L-curve needs at least 5 lambda values, got {}",
            lambda_grid.len()
        )));
    }
    if lambda_grid.iter().any(|l| !(l.is_finite() && *l > 0.0))
        || !lambda_grid.windows(2).all(|w| w[1] > w[0])
    {
        return Err(Error::arg("lambda grid must be positive and strictly increasing"));
    }
    let skip = usize::from(a.includes_r0_column);

    let mut points = Vec::with_capacity(lambda_grid.len());
    let mut solutions = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let (g, _) = solve_nnls_tikhonov(a, z, lambda)?;
        let fitted = a.matrix.matvec(&g);
        let resid: Vec<f64> = fitted.iter().zip(z).map(|(f, z)| f - z).collect();
        points.push(LCurvePoint {
            lambda,
            residual_norm: norm2(&resid),
            solution_norm: norm2(&g[skip..]),
        });
        solutions.push(g);
    }

    let (index, method) = select_corner(&points)?;
    Ok(LCurveSelection {
        lambda_star: points[index].lambda,
        index,
        method,
        points,
        solutions,
    })
}

fn log_point(p: &LCurvePoint) -> (f64, f64) {
    (
        p.residual_norm.max(f64::MIN_POSITIVE).ln(),
        p.solution_norm.max(f64::MIN_POSITIVE).ln(),
    )
}

fn select_corner(points: &[LCurvePoint]) -> Result<(usize, CornerMethod)> {
    let n = points.len();
    if points.iter().all(|p| p.solution_norm == 0.0) {
        return Ok((n - 1, CornerMethod::Flat));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(log_point).collect();

    // Signed Menger curvature of each consecutive triple. Walking toward
    // larger λ the curve turns from "down" to "right", which is a
    // counter-clockwise turn, so the corner has positive curvature.
    let mut curvature = vec![f64::NEG_INFINITY; n];
    let mut any_bend = false;
    for i in 1..n - 1 {
        let (p, q, r) = (xy[i - 1], xy[i], xy[i + 1]);
        let u = (q.0 - p.0, q.1 - p.1);
        let v = (r.0 - q.0, r.1 - q.1);
        let cross = u.0 * v.1 - u.1 * v.0;
        let lu = u.0.hypot(u.1);
        let lv = v.0.hypot(v.1);
        let lw = (r.0 - p.0).hypot(r.1 - p.1);
        if lu == 0.0 || lv == 0.0 || lw == 0.0 {
            continue;
        }
        if cross.abs() > 1e-12 * lu * lv {
            any_bend = true;
        }
        curvature[i] = 2.0 * cross / (lu * lv * lw);
    }
    if !any_bend {
        return Err(Error::Selection(
            "L-curve is degenerate (all points collinear); try a wider lambda grid".into(),
        ));
    }

    let mut best = 1;
    for i in 1..n - 1 {
        // `>=` breaks ties toward larger λ
        if curvature[i] >= curvature[best] {
            best = i;
        }
    }
    if curvature[best] > 0.0 && best > 1 && best < n - 2 {
        return Ok((best, CornerMethod::MaxCurvature));
    }

    // Fallback: point farthest below the chord joining the end points.
    let (a, b) = (xy[0], xy[n - 1]);
    let d = (b.0 - a.0, b.1 - a.1);
    let mut best = 0;
    let mut best_dist = f64::NEG_INFINITY;
    for (i, p) in xy.iter().enumerate() {
        let dist = -(d.0 * (p.1 - a.1) - d.1 * (p.0 - a.0));
        if dist >= best_dist {
            best_dist = dist;
            best = i;
        }
    }
    Ok((best, CornerMethod::ChordDistance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lambda: f64, r: f64, s: f64) -> LCurvePoint {
        LCurvePoint {
            lambda,
            residual_norm: r,
            solution_norm: s,
        }
    }

    #[test]
    fn picks_sharp_corner() {
        // vertical drop then horizontal run in log space
        let pts: Vec<_> = [
            (1.0, 1e4),
            (1.0001, 1e3),
            (1.0002, 1e2),
            (1.001, 10.0),
            (10.0, 9.0),
            (100.0, 8.5),
            (1000.0, 8.2),
        ]
        .iter()
        .enumerate()
        .map(|(i, &(r, s))| pt(10f64.powi(i as i32), r, s))
        .collect();
        let (idx, method) = select_corner(&pts).unwrap();
        assert_eq!(method, CornerMethod::MaxCurvature);
        assert_eq!(idx, 3);
    }

    #[test]
    fn collinear_curve_is_an_error() {
        let pts: Vec<_> = (0..6)
            .map(|i| pt(i as f64 + 1.0, 10f64.powi(i), 10f64.powi(-i)))
            .collect();
        assert!(matches!(select_corner(&pts), Err(Error::Selection(_))));
    }

    #[test]
    fn all_zero_solutions_pick_largest_lambda() {
        let pts: Vec<_> = (0..5).map(|i| pt(i as f64 + 1.0, 0.1, 0.0)).collect();
        assert_eq!(select_corner(&pts).unwrap(), (4, CornerMethod::Flat));
    }

    #[test]
    fn short_grid_rejected() {
        let a = KernelMatrix::new(crate::linalg::Matrix::identity(3), false).unwrap();
        assert!(lcurve_select(&a, &[1.0, 2.0, 3.0], &[1e-3, 1e-2, 1e-1]).is_err());
        assert!(lcurve_select(&a, &[1.0, 2.0, 3.0], &[1e-3, 1e-2, 1e-1, 1e-1, 1.0]).is_err());
    }
}
