//! Primal active-set method for convex QPs with a positive semidefinite
//! Hessian, including the linear-programming case `H = 0`.
//!
//! Every iteration works on the null space of the working-set rows. When the
//! reduced Hessian is singular and the reduced gradient has a component in
//! its kernel, the method follows that descent ray until a constraint blocks
//! it; otherwise it takes the (pseudo-)Newton step on the null space.

use nalgebra::{DMatrix, DVector};

use super::qr::qr_factorize;
use crate::error::{Error, Result};

/// `minimize 1/2 x'Hx + c'x  subject to  A x <= b`.
#[derive(Debug, Clone, Copy)]
pub struct ConvexQp<'a> {
    pub hessian: &'a DMatrix<f64>,
    pub linear: &'a DVector<f64>,
    pub a: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
}

impl ConvexQp<'_> {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(self.hessian * x)) + self.linear.dot(x)
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        if self.a.nrows() == 0 {
            return 0.0;
        }
        (self.a * x - self.b).max().max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ActiveSetOutcome {
    pub x: DVector<f64>,
    pub working_set: Vec<usize>,
    /// Multipliers for every row (zero outside the working set).
    pub multipliers: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub working_set_changes: usize,
    /// Largest objective increase observed between consecutive iterates.
    pub max_objective_increase: f64,
}

/// Runs the active-set iteration from a feasible `x0`. Rows of `initial` that
/// are not tight at `x0` or not linearly independent are ignored.
pub fn minimize_from(
    qp: &ConvexQp<'_>,
    x0: DVector<f64>,
    initial: &[usize],
) -> Result<ActiveSetOutcome> {
    let p = qp.hessian.nrows();
    let rows = qp.a.nrows();
    if qp.a.ncols() != p || qp.linear.len() != p || qp.b.len() != rows || x0.len() != p {
        return Err(Error::DimensionMismatch("active-set problem".into()));
    }
    let row_norms: Vec<f64> = (0..rows).map(|i| qp.a.row(i).norm()).collect();

    let mut x = x0;
    let mut working: Vec<usize> = Vec::new();
    for &i in initial {
        if i >= rows || working.contains(&i) || row_norms[i] == 0.0 {
            continue;
        }
        let resid = qp.a.row(i).dot(&x.transpose()) - qp.b[i];
        if resid.abs() > 1e-9 * (1.0 + qp.b[i].abs()) {
            continue;
        }
        working.push(i);
        if qr_factorize(&stack_rows(qp.a, &working).transpose()).is_err() {
            working.pop();
        }
    }

    let max_iterations = 10 * (rows + p) + 50;
    let mut iterations = 0;
    let mut changes = 0;
    let mut zero_steps = 0usize;
    let mut bland = false;
    let mut stationary = false;
    let mut objective = qp.objective(&x);
    let mut max_increase = 0.0f64;

    loop {
        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::CycleDetected(iterations - 1));
        }
        let g = qp.hessian * &x + qp.linear;
        let aw = stack_rows(qp.a, &working);
        let (range, complement, upper) = if working.is_empty() {
            (
                DMatrix::zeros(p, 0),
                DMatrix::identity(p, p),
                DMatrix::zeros(0, 0),
            )
        } else {
            let f = qr_factorize(&aw.transpose())?;
            (f.range, f.complement, f.upper)
        };

        let mut direction: Option<(DVector<f64>, bool)> = None;
        if !stationary && complement.ncols() > 0 {
            let hr = complement.transpose() * qp.hessian * &complement;
            let gr = complement.transpose() * &g;
            let eig = hr.symmetric_eigen();
            let scale = eig.eigenvalues.amax().max(1.0);
            let mut kernel = DVector::zeros(gr.len());
            let mut newton = DVector::zeros(gr.len());
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                let v = eig.eigenvectors.column(k);
                let coeff = v.dot(&gr);
                if lam <= 1e-10 * scale {
                    kernel += coeff * v;
                } else {
                    newton -= (coeff / lam) * v;
                }
            }
            if kernel.norm() > 1e-11 * g.norm().max(1.0) {
                direction = Some((-(&complement * kernel), true));
            } else {
                let d = &complement * newton;
                if d.norm() > 1e-12 * x.norm().max(1.0) {
                    direction = Some((d, false));
                }
            }
        }
        stationary = false;

        match direction {
            None => {
                // Stationary on the working set: inspect multipliers.
                let lambda = if working.is_empty() {
                    DVector::zeros(0)
                } else {
                    let rhs = -(range.transpose() * &g);
                    upper
                        .solve_upper_triangular(&rhs)
                        .ok_or_else(|| Error::RankDeficient("working set".into()))?
                };
                let tol = 1e-10 * g.norm().max(1.0);
                let mut drop: Option<usize> = None;
                for (k, &l) in lambda.iter().enumerate() {
                    if l >= -tol {
                        continue;
                    }
                    drop = match drop {
                        None => Some(k),
                        Some(best) => {
                            let better = if bland {
                                working[k] < working[best]
                            } else {
                                l < lambda[best]
                            };
                            Some(if better { k } else { best })
                        }
                    };
                }
                match drop {
                    None => {
                        let mut multipliers = DVector::zeros(rows);
                        for (k, &i) in working.iter().enumerate() {
                            multipliers[i] = lambda[k].max(0.0);
                        }
                        return Ok(ActiveSetOutcome {
                            x,
                            working_set: working,
                            multipliers,
                            objective,
                            iterations,
                            working_set_changes: changes,
                            max_objective_increase: max_increase,
                        });
                    }
                    Some(k) => {
                        working.remove(k);
                        changes += 1;
                        zero_steps += 1;
                    }
                }
            }
            Some((d, ray)) => {
                let dnorm = d.norm();
                let ad = qp.a * &d;
                let ax = qp.a * &x;
                let mut candidates: Vec<(usize, f64)> = Vec::new();
                for i in 0..rows {
                    if working.contains(&i) || ad[i] <= 1e-12 * row_norms[i] * dnorm {
                        continue;
                    }
                    let slack = (qp.b[i] - ax[i]).max(0.0);
                    candidates.push((i, slack / ad[i]));
                }
                let tmin = candidates
                    .iter()
                    .map(|&(_, t)| t)
                    .fold(f64::INFINITY, f64::min);
                let limit = if ray { f64::INFINITY } else { 1.0 };
                let (alpha, blocking) = if tmin < limit {
                    let tie = tmin + 1e-12 * (1.0 + tmin);
                    let i = candidates
                        .iter()
                        .filter(|&&(_, t)| t <= tie)
                        .map(|&(i, _)| i)
                        .min()
                        .expect("nonempty candidates");
                    (tmin, Some(i))
                } else if ray {
                    return Err(Error::Unbounded);
                } else {
                    (1.0, None)
                };
                x += alpha * &d;
                let next = qp.objective(&x);
                max_increase = max_increase.max(next - objective);
                objective = next;
                if alpha == 0.0 {
                    zero_steps += 1;
                } else {
                    zero_steps = 0;
                    bland = false;
                }
                match blocking {
                    Some(i) => {
                        working.push(i);
                        changes += 1;
                    }
                    None => stationary = true,
                }
            }
        }
        if zero_steps > 2 * p + 5 {
            bland = true;
        }
    }
}

pub(crate) fn stack_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |k, j| a[(rows[k], j)])
}
