use nalgebra::{DMatrix, DVector};

use super::active_set::{minimize_from, ConvexQp};
use crate::error::{Error, Result};
use crate::geometry::Polytope;

/// Phase-one margins at or below this value count as feasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub value: f64,
}

/// Minimizes `cost' x` over the polytope.
pub fn solve_lp(cost: &DVector<f64>, constraints: &Polytope) -> Result<LpSolution> {
    minimize_linear(cost, &constraints.t, &constraints.d)
}

/// Minimizes `cost' x` subject to `a x <= b`.
pub fn minimize_linear(
    cost: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<LpSolution> {
    if cost.len() != a.ncols() {
        return Err(Error::DimensionMismatch("LP cost".into()));
    }
    let start = max_margin_point(a, b)?;
    if start.margin < -FEASIBILITY_TOLERANCE {
        return Err(Error::Infeasible);
    }
    let n = a.ncols();
    let zero = DMatrix::zeros(n, n);
    let qp = ConvexQp {
        hessian: &zero,
        linear: cost,
        a,
        b,
    };
    let out = minimize_from(&qp, start.x, &[])?;
    Ok(LpSolution {
        value: cost.dot(&out.x),
        x: out.x,
    })
}

/// Point maximizing the smallest normalized slack of `a x <= b`.
#[derive(Debug, Clone)]
pub struct MarginPoint {
    pub x: DVector<f64>,
    /// Smallest slack `b_i - a_i x` over rows scaled to unit norm, capped at 1.
    /// Negative when the system is infeasible.
    pub margin: f64,
}

/// Phase one: `min t  s.t.  a_i x / |a_i| - t <= b_i / |a_i|,  t >= -1`.
pub fn max_margin_point(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<MarginPoint> {
    let (rows, n) = a.shape();
    if b.len() != rows {
        return Err(Error::DimensionMismatch("LP offsets".into()));
    }
    let mut aa = DMatrix::zeros(rows + 1, n + 1);
    let mut bb = DVector::zeros(rows + 1);
    for i in 0..rows {
        let norm = a.row(i).norm();
        let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        for j in 0..n {
            aa[(i, j)] = a[(i, j)] * s;
        }
        aa[(i, n)] = -1.0;
        bb[i] = b[i] * s;
    }
    aa[(rows, n)] = -1.0;
    bb[rows] = 1.0;
    let mut cost = DVector::zeros(n + 1);
    cost[n] = 1.0;
    let t0 = (0..rows).map(|i| -bb[i]).fold(-1.0f64, f64::max);
    let mut x0 = DVector::zeros(n + 1);
    x0[n] = t0;
    let zero = DMatrix::zeros(n + 1, n + 1);
    let qp = ConvexQp {
        hessian: &zero,
        linear: &cost,
        a: &aa,
        b: &bb,
    };
    let out = minimize_from(&qp, x0, &[])?;
    Ok(MarginPoint {
        x: out.x.rows(0, n).into_owned(),
        margin: -out.x[n],
    })
}
