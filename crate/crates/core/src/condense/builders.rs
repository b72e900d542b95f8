use nalgebra::{DMatrix, DVector};

use super::prediction::StageMaps;
use super::{CondensedQp, Formulation, ProblemData, RowKind};
use crate::error::{Error, Result};
use crate::geometry::{box_vertices, linear_map, pontryagin_difference, Polytope};

/// A constraint `a' ξ <= d` on the stacked vector `ξ = (x, V, W)`.
struct StackedRow {
    a: DVector<f64>,
    d: f64,
    kind: RowKind,
}

/// State and input rows per stage in stage order, then the terminal rows.
fn stage_rows(
    maps: &StageMaps,
    x_set: &Polytope,
    u_set: &Polytope,
    terminal: &Polytope,
) -> Vec<StackedRow> {
    let horizon = maps.inputs.len();
    let mut rows = Vec::new();
    for stage in 0..horizon {
        for row in 0..x_set.num_rows() {
            rows.push(StackedRow {
                a: (x_set.t.row(row) * &maps.states[stage]).transpose(),
                d: x_set.d[row],
                kind: RowKind::State { stage, row },
            });
        }
        for row in 0..u_set.num_rows() {
            rows.push(StackedRow {
                a: (u_set.t.row(row) * &maps.inputs[stage]).transpose(),
                d: u_set.d[row],
                kind: RowKind::Input { stage, row },
            });
        }
    }
    for row in 0..terminal.num_rows() {
        rows.push(StackedRow {
            a: (terminal.t.row(row) * &maps.states[horizon]).transpose(),
            d: terminal.d[row],
            kind: RowKind::Terminal(row),
        });
    }
    rows
}

/// Rows of `G ε <= W + S x` collected before assembly.
#[derive(Default)]
struct RowSet {
    g: Vec<DVector<f64>>,
    s: Vec<DVector<f64>>,
    w: Vec<f64>,
    kinds: Vec<RowKind>,
}

impl RowSet {
    fn push(&mut self, g: DVector<f64>, s: DVector<f64>, w: f64, kind: RowKind) {
        self.g.push(g);
        self.s.push(s);
        self.w.push(w);
        self.kinds.push(kind);
    }

    /// Like `push`, scaling the row to a unit `G` part (or a unit `S` part
    /// when `G` vanishes).
    fn push_normalized(&mut self, g: DVector<f64>, s: DVector<f64>, w: f64, kind: RowKind) {
        let norm = if g.norm() > 1e-14 { g.norm() } else { s.norm() };
        if norm > 0.0 {
            self.push(g / norm, s / norm, w / norm, kind);
        } else {
            self.push(g, s, w, kind);
        }
    }

    fn assemble(
        self,
        p: usize,
        n: usize,
    ) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>, Vec<RowKind>) {
        let q = self.w.len();
        let g = DMatrix::from_fn(q, p, |i, j| self.g[i][j]);
        let s = DMatrix::from_fn(q, n, |i, j| self.s[i][j]);
        (g, s, DVector::from_vec(self.w), self.kinds)
    }
}

fn block(m: &DMatrix<f64>, r: (usize, usize), c: (usize, usize)) -> DMatrix<f64> {
    m.view((r.0, c.0), (r.1, c.1)).into_owned()
}

fn selector(rows: usize, cols: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(rows, cols);
    e.view_mut((0, 0), (rows, rows)).fill_with_identity();
    e
}

/// Min-max epigraph QP in `ε = (Z, γ)` with `Z = V + H^-1 L' x`.
///
/// For each disturbance vertex sequence `W_j` the cost is
/// `1/2 Z'HZ + Z' M_vw W_j + x'(M_xw - L H^-1 M_vw) W_j + W_j' M_ww W_j + x'Yx`,
/// so `max_j` is an epigraph over rows affine in `Z`. State, input and
/// terminal rows are tightened by their worst case over the disturbance box.
pub fn build_minmax_qp(data: &ProblemData) -> Result<CondensedQp> {
    condense_regulator(data, Formulation::MinMax)
}

/// Standard condensed MPC in `Z = V + H^-1 L' x` without disturbances.
pub fn build_nominal_qp(data: &ProblemData) -> Result<CondensedQp> {
    condense_regulator(data, Formulation::Nominal)
}

fn condense_regulator(data: &ProblemData, formulation: Formulation) -> Result<CondensedQp> {
    data.validate()?;
    let robust = formulation == Formulation::MinMax;
    let sys = &data.system;
    let (n, m, horizon) = (sys.n, sys.m, data.horizon);
    let maps = StageMaps::new(sys, horizon, robust);
    let (nv, nw) = (maps.nv, maps.nw);
    let cost = maps.cost_matrix(&data.q, &data.r, &data.p);

    let h = 2.0 * block(&cost, (n, nv), (n, nv));
    let l = 2.0 * block(&cost, (0, n), (n, nv));
    let chol = h
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("input-sequence Hessian H"))?;
    let hinv_lt = chol.solve(&l.transpose());
    let value_offset = {
        let y = block(&cost, (0, n), (0, n)) - 0.5 * &l * &hinv_lt;
        0.5 * (&y + y.transpose())
    };

    let p = if robust { nv + 1 } else { nv };
    let mut rows = RowSet::default();

    let (lo, hi) = if robust {
        data.disturbance_box()?
    } else {
        (vec![], vec![])
    };
    let worst_case = |c: DVector<f64>| -> f64 {
        c.iter()
            .enumerate()
            .map(|(k, &ck)| (lo[k % lo.len()] * ck).max(hi[k % hi.len()] * ck))
            .sum()
    };

    if robust {
        let m_vw = 2.0 * block(&cost, (n, nv), (n + nv, nw));
        let m_xw = 2.0 * block(&cost, (0, n), (n + nv, nw));
        let m_ww = block(&cost, (n + nv, nw), (n + nv, nw));
        let x_gain = &m_xw - hinv_lt.transpose() * &m_vw;
        for (j, wj) in box_vertices(&lo, &hi, horizon)?.iter().enumerate() {
            let mut g = DVector::zeros(p);
            g.rows_mut(0, nv).copy_from(&(&m_vw * wj));
            g[nv] = -1.0;
            let offset = -wj.dot(&(&m_ww * wj));
            rows.push(g, -(&x_gain * wj), offset, RowKind::Vertex(j));
        }
    }
    let vertex_rows = rows.w.len();

    for row in stage_rows(&maps, &data.x_set, &data.u_set, &data.terminal) {
        let a_x = row.a.rows(0, n).into_owned();
        let a_v = row.a.rows(n, nv).into_owned();
        let tightening = if robust {
            worst_case(row.a.rows(n + nv, nw).into_owned())
        } else {
            0.0
        };
        let mut g = DVector::zeros(p);
        g.rows_mut(0, nv).copy_from(&a_v);
        let s = -(a_x - hinv_lt.transpose() * &a_v);
        rows.push_normalized(g, s, row.d - tightening, row.kind);
    }

    let (g, s, w, row_kinds) = rows.assemble(p, n);
    let mut hessian = DMatrix::zeros(p, p);
    hessian.view_mut((0, 0), (nv, nv)).copy_from(&h);
    let mut linear = DVector::zeros(p);
    let epigraph = robust.then_some(nv);
    if let Some(e) = epigraph {
        linear[e] = 1.0;
    }
    let input_x = -&sys.k_inf - hinv_lt.rows(0, m);
    Ok(CondensedQp {
        formulation,
        n,
        m,
        horizon,
        hessian,
        linear,
        g,
        w,
        s,
        vertex_rows,
        epigraph,
        input_x,
        input_eps: selector(m, p),
        sequence_x: -&hinv_lt,
        sequence_eps: selector(nv, p),
        h,
        l,
        value_offset,
        row_kinds,
    })
}

/// Tube MPC in `ε = (V̄, x̄0)`: nominal predictions from the free initial
/// state `x̄0` with `x - x̄0 ∈ R`, constraints tightened by `R`, and the
/// applied input `u = -K x + v̄0`.
pub fn build_tube_qp(data: &ProblemData, rpi: &Polytope) -> Result<CondensedQp> {
    data.validate()?;
    let sys = &data.system;
    let (n, m, horizon) = (sys.n, sys.m, data.horizon);
    if rpi.dim() != n {
        return Err(Error::DimensionMismatch("RPI set".into()));
    }
    let x_tight = pontryagin_difference(&data.x_set, rpi).map_err(|e| match e {
        Error::EmptyResult(_) => Error::EmptyTightened("state constraints"),
        other => other,
    })?;
    let k_rpi = linear_map(&(-&sys.k_inf), rpi)?;
    let u_tight = pontryagin_difference(&data.u_set, &k_rpi).map_err(|e| match e {
        Error::EmptyResult(_) => Error::EmptyTightened("input constraints"),
        other => other,
    })?;

    let maps = StageMaps::new(sys, horizon, false);
    let nv = maps.nv;
    let p = nv + n;
    // ξ = (x̄0, V̄) reordered to ε = (V̄, x̄0)
    let to_eps = |a: &DVector<f64>| {
        let mut g = DVector::zeros(p);
        g.rows_mut(0, nv).copy_from(&a.rows(n, nv));
        g.rows_mut(nv, n).copy_from(&a.rows(0, n));
        g
    };
    let cost = maps.cost_matrix(&data.q, &data.r, &data.p);
    let mut hessian = DMatrix::zeros(p, p);
    for i in 0..p {
        let ei = if i < nv { n + i } else { i - nv };
        for j in 0..p {
            let ej = if j < nv { n + j } else { j - nv };
            hessian[(i, j)] = 2.0 * cost[(ei, ej)];
        }
    }
    if hessian.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("tube Hessian"));
    }

    let mut rows = RowSet::default();
    for i in 0..rpi.num_rows() {
        let t = rpi.t.row(i).transpose();
        let mut g = DVector::zeros(p);
        g.rows_mut(nv, n).copy_from(&(-&t));
        rows.push_normalized(g, -t, rpi.d[i], RowKind::Tube(i));
    }
    for row in stage_rows(&maps, &x_tight, &u_tight, &data.terminal) {
        rows.push_normalized(to_eps(&row.a), DVector::zeros(n), row.d, row.kind);
    }
    let (g, s, w, row_kinds) = rows.assemble(p, n);
    let h = 2.0 * block(&cost, (n, nv), (n, nv));
    Ok(CondensedQp {
        formulation: Formulation::Tube,
        n,
        m,
        horizon,
        hessian,
        linear: DVector::zeros(p),
        g,
        w,
        s,
        vertex_rows: 0,
        epigraph: None,
        input_x: -&sys.k_inf,
        input_eps: selector(m, p),
        sequence_x: DMatrix::zeros(nv, n),
        sequence_eps: selector(nv, p),
        h,
        l: DMatrix::zeros(n, nv),
        value_offset: DMatrix::zeros(n, n),
        row_kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::{constraint_count, decision_count, Scenario};
    use crate::qpsolve::solve;
    use nalgebra::dvector;

    #[test]
    fn table_row_and_variable_counts() {
        let sc = Scenario::double_integrator();
        let expected = [
            (Formulation::MinMax, [(32, 4), (68, 6), (1090, 11)]),
            (Formulation::Tube, [(74, 5), (86, 7), (116, 12)]),
            (Formulation::Nominal, [(24, 3), (36, 5), (66, 10)]),
        ];
        for (formulation, cells) in expected {
            for (horizon, (q, p)) in [3, 5, 10].into_iter().zip(cells) {
                let qp = sc.qp(formulation, horizon).unwrap();
                assert_eq!(
                    (qp.num_rows(), qp.num_vars()),
                    (q, p),
                    "{formulation:?} N={horizon}"
                );
                let formula = constraint_count(
                    formulation,
                    horizon,
                    sc.system.dimensions(),
                    sc.rpi.num_rows(),
                    sc.terminal_for(formulation).num_rows(),
                );
                assert_eq!(formula, q as u128);
                assert_eq!(
                    decision_count(formulation, horizon, sc.system.dimensions()),
                    p
                );
                assert!(qp.h.clone().cholesky().is_some());
            }
        }
    }

    #[test]
    fn vertex_rows_come_first_with_unit_epigraph_coefficient() {
        let qp = Scenario::double_integrator()
            .qp(Formulation::MinMax, 3)
            .unwrap();
        assert_eq!(qp.vertex_rows, 8);
        for j in 0..8 {
            assert_eq!(qp.g[(j, 3)], -1.0);
            assert_eq!(qp.row_kinds[j], RowKind::Vertex(j));
        }
        assert!(matches!(
            qp.row_kinds[8],
            RowKind::State { stage: 0, row: 0 }
        ));
        assert!(qp.is_state_only_row(8));
    }

    #[test]
    fn zero_disturbance_min_max_equals_nominal() {
        let sc = Scenario::double_integrator();
        let mut data = sc.problem(Formulation::MinMax, 4);
        data.w_set = Polytope::symmetric_box(&[0.0]);
        data.terminal = sc.terminal_nominal.clone();
        let minmax = build_minmax_qp(&data).unwrap();
        let nominal = build_nominal_qp(&data).unwrap();
        for x in [
            dvector![-4.0, 1.0],
            dvector![2.0, -1.5],
            dvector![7.0, -2.0],
            dvector![0.1, 0.2],
        ] {
            let (Ok(a), Ok(b)) = (solve(&minmax, &x, None), solve(&nominal, &x, None)) else {
                continue;
            };
            assert!((a.input(&minmax, &x) - b.input(&nominal, &x)).amax() <= 1e-8);
            assert!((minmax.cost(&x, &a.epsilon) - nominal.cost(&x, &b.epsilon)).abs() <= 1e-7);
        }
    }

    #[test]
    fn recovered_input_is_robustly_feasible() {
        let sc = Scenario::double_integrator();
        let qp = sc.qp(Formulation::MinMax, 5).unwrap();
        for x in [
            dvector![-6.0, 2.0],
            dvector![5.0, -1.0],
            dvector![-1.0, -1.0],
        ] {
            let sol = solve(&qp, &x, None).unwrap();
            let u = sol.input(&qp, &x);
            assert!(sc.u_set.contains(&u, 1e-9));
            for w in [-1.0, 1.0] {
                assert!(sc
                    .x_set
                    .contains(&sc.system.step(&x, &u, &dvector![w]), 1e-9));
            }
            assert!(sol.active.iter().any(|&i| i < qp.vertex_rows));
        }
    }

    #[test]
    fn tube_input_uses_nominal_initial_state() {
        let sc = Scenario::double_integrator();
        let qp = sc.qp(Formulation::Tube, 3).unwrap();
        let x = dvector![-3.0, 1.0];
        let sol = solve(&qp, &x, None).unwrap();
        let xbar0 = sol.epsilon.rows(3, 2).into_owned();
        assert!(sc.rpi.contains(&(&x - &xbar0), 1e-9));
        let u = sol.input(&qp, &x);
        let expected = -&sc.system.k_inf * (&x - &xbar0)
            + (-&sc.system.k_inf * &xbar0 + sol.epsilon.rows(0, 1));
        assert!((u - expected).amax() < 1e-12);
    }
}
