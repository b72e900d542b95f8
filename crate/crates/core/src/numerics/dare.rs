use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 10_000;
const STEP_TOLERANCE: f64 = 1e-12;

/// Stabilizing solution of the discrete-time algebraic Riccati equation and
/// the associated LQR gain, for the control law `u = -K x`.
#[derive(Debug, Clone)]
pub struct DareResult {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub iterations: usize,
}

/// Solves `P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q` by Riccati value iteration
/// started from `P = Q`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DareResult> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::DimensionMismatch("DARE operands".into()));
    }
    if r.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("input weight R"));
    }
    let at = a.transpose();
    let mut p = q.clone();
    for it in 1..=MAX_ITERATIONS {
        let k = gain(&p, a, b, r)?;
        let mut next = &at * &p * a - &at * &p * b * &k + q;
        next = 0.5 * (&next + next.transpose());
        let step = (&next - &p).amax();
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if step <= STEP_TOLERANCE {
            if p.clone().cholesky().is_none() {
                return Err(Error::NotPositiveDefinite("Riccati solution P"));
            }
            let k = gain(&p, a, b, r)?;
            return Ok(DareResult {
                p,
                k,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "Riccati iteration",
        iterations: MAX_ITERATIONS,
    })
}

/// `(R + B'PB)^-1 B'PA`.
fn gain(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let bt = b.transpose();
    let s = r + &bt * p * b;
    let chol = s.cholesky().ok_or(Error::NotPositiveDefinite("R + B'PB"))?;
    Ok(chol.solve(&(&bt * p * a)))
}

/// Residual `A'PA - P - A'PB (R + B'PB)^-1 B'PA + Q` measured in the max norm.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let at = a.transpose();
    let bt = b.transpose();
    let s = r + &bt * p * b;
    let inv = s.try_inverse().expect("R + B'PB invertible");
    (&at * p * a - p - &at * p * b * inv * &bt * p * a + q).amax()
}
