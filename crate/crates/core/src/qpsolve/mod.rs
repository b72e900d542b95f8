//! Dense active-set solver for the condensed QPs, with the optimal active,
//! inactive and weakly active row sets.

use nalgebra::{DMatrix, DVector};

use crate::condense::CondensedQp;
use crate::error::{Error, Result};
use crate::numerics::{
    max_margin_point, minimize_from, qr_factorize, stack_rows, ConvexQp, FEASIBILITY_TOLERANCE,
};

/// Residual below which a row counts as active.
pub const ACTIVE_TOLERANCE: f64 = 1e-7;
/// Multiplier below which an active row counts as weakly active.
pub const WEAK_TOLERANCE: f64 = 1e-8;
/// Bound on the stationarity residual of a returned solution.
pub const KKT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveSets {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    pub weakly_active: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub epsilon: DVector<f64>,
    /// One multiplier per row, zero outside the final working set.
    pub lambda: DVector<f64>,
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    pub weakly_active: Vec<usize>,
    /// `1/2 ε'Ĥε + c'ε`.
    pub objective: f64,
    /// Linearly independent rows the solver terminated with.
    pub working_set: Vec<usize>,
    pub iterations: usize,
    pub working_set_changes: usize,
    pub max_objective_increase: f64,
}

impl QpSolution {
    pub fn input(&self, qp: &CondensedQp, x: &DVector<f64>) -> DVector<f64> {
        qp.input(x, &self.epsilon)
    }

    /// `‖Ĥε + c + G'λ‖∞`.
    pub fn stationarity(&self, qp: &CondensedQp) -> f64 {
        (&qp.hessian * &self.epsilon + &qp.linear + qp.g.transpose() * &self.lambda).amax()
    }
}

/// Splits rows by their residual at `ε`; rows without a decision-variable
/// part only restrict `x` and are always reported inactive.
pub fn classify(
    qp: &CondensedQp,
    x: &DVector<f64>,
    epsilon: &DVector<f64>,
    lambda: &DVector<f64>,
) -> ActiveSets {
    let residual = &qp.g * epsilon - qp.rhs(x);
    let mut sets = ActiveSets::default();
    for i in 0..qp.num_rows() {
        if residual[i].abs() <= ACTIVE_TOLERANCE && !qp.is_state_only_row(i) {
            sets.active.push(i);
            if lambda[i] <= WEAK_TOLERANCE {
                sets.weakly_active.push(i);
            }
        } else {
            sets.inactive.push(i);
        }
    }
    sets
}

/// Feasibility restoration: a point maximizing the smallest slack of the
/// non-vertex rows, with the epigraph variable raised onto the highest
/// vertex row. Fails with `Infeasible` outside the feasible state set.
pub fn phase1(qp: &CondensedQp, x: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(phase1_with_seed(qp, x)?.0)
}

fn phase1_with_seed(qp: &CondensedQp, x: &DVector<f64>) -> Result<(DVector<f64>, Vec<usize>)> {
    let p = qp.num_vars();
    let free = if qp.epigraph.is_some() { p - 1 } else { p };
    let rows = qp.constraint_rows();
    let rhs = qp.rhs(x);
    let a = qp.g.view((rows.start, 0), (rows.len(), free)).into_owned();
    let b = rhs.rows(rows.start, rows.len()).into_owned();
    let start = max_margin_point(&a, &b)?;
    if start.margin < -FEASIBILITY_TOLERANCE {
        return Err(Error::Infeasible);
    }
    let mut eps = DVector::zeros(p);
    eps.rows_mut(0, free).copy_from(&start.x);
    let mut seed = Vec::new();
    if let Some(e) = qp.epigraph {
        let mut best = (f64::NEG_INFINITY, 0);
        for j in 0..qp.vertex_rows {
            let level = qp.g.row(j).columns(0, free).dot(&start.x.transpose()) - rhs[j];
            if level > best.0 {
                best = (level, j);
            }
        }
        eps[e] = best.0;
        seed.push(best.1);
    }
    Ok((eps, seed))
}

/// Minimizer of the QP restricted to `G_W ε = rhs_W`, if the working set is
/// independent, the reduced Hessian is positive definite and the point is
/// feasible for all rows.
fn equality_start(
    qp: &CondensedQp,
    rhs: &DVector<f64>,
    working: &[usize],
) -> Option<(DVector<f64>, Vec<usize>)> {
    let mut ws: Vec<usize> = working
        .iter()
        .copied()
        .filter(|&i| i < qp.num_rows() && !qp.is_state_only_row(i))
        .collect();
    ws.sort_unstable();
    ws.dedup();
    if ws.is_empty() {
        return None;
    }
    let gw = stack_rows(&qp.g, &ws);
    let qr = qr_factorize(&gw.transpose()).ok()?;
    let rw = DVector::from_iterator(ws.len(), ws.iter().map(|&i| rhs[i]));
    let coords = qr.upper.transpose().solve_lower_triangular(&rw)?;
    let particular = &qr.range * coords;
    let j = &qr.complement;
    let eps = if j.ncols() == 0 {
        particular
    } else {
        let reduced = j.transpose() * &qp.hessian * j;
        let grad = j.transpose() * (&qp.hessian * &particular + &qp.linear);
        let y = reduced.cholesky()?.solve(&(-grad));
        particular + j * y
    };
    let violation = (&qp.g * &eps - rhs).max();
    (violation <= FEASIBILITY_TOLERANCE).then_some((eps, ws))
}

/// Solves the QP at `x`, optionally starting from a previous working set.
pub fn solve(
    qp: &CondensedQp,
    x: &DVector<f64>,
    warm_start: Option<&[usize]>,
) -> Result<QpSolution> {
    if x.len() != qp.n {
        return Err(Error::DimensionMismatch("state dimension".into()));
    }
    let rhs = qp.rhs(x);
    let warm = warm_start.and_then(|ws| equality_start(qp, &rhs, ws));
    let (start, seed) = match warm {
        Some(found) => found,
        None => phase1_with_seed(qp, x)?,
    };
    let problem = ConvexQp {
        hessian: &qp.hessian,
        linear: &qp.linear,
        a: &qp.g,
        b: &rhs,
    };
    let out = minimize_from(&problem, start, &seed)?;
    let sets = classify(qp, x, &out.x, &out.multipliers);
    Ok(QpSolution {
        objective: qp.qp_objective(&out.x),
        epsilon: out.x,
        lambda: out.multipliers,
        active: sets.active,
        inactive: sets.inactive,
        weakly_active: sets.weakly_active,
        working_set: out.working_set,
        iterations: out.iterations,
        working_set_changes: out.working_set_changes,
        max_objective_increase: out.max_objective_increase,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub solves: usize,
    pub iterations: usize,
    pub working_set_changes: usize,
}

/// Solver that warm-starts every solve from the previous working set.
#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    last_working_set: Option<Vec<usize>>,
    pub stats: SolverStats,
}

impl QpSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, qp: &CondensedQp, x: &DVector<f64>) -> Result<QpSolution> {
        let sol = solve(qp, x, self.last_working_set.as_deref())?;
        self.stats.solves += 1;
        self.stats.iterations += sol.iterations;
        self.stats.working_set_changes += sol.working_set_changes;
        self.last_working_set = Some(sol.working_set.clone());
        Ok(sol)
    }

    pub fn reset(&mut self) {
        self.last_working_set = None;
    }
}

/// Rows of `G` indexed by `rows`, as a matrix.
pub fn active_rows(qp: &CondensedQp, rows: &[usize]) -> DMatrix<f64> {
    stack_rows(&qp.g, rows)
}
