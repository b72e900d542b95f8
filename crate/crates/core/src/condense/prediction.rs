use nalgebra::{DMatrix, DVector};

use super::{LtiSystem, ProblemData};

/// Stacked predictions `X = Phi x + Gamma_v V + Gamma_w W` of the states
/// `x̃(1), ..., x̃(N)` under `x̃(i+1) = A_cl x̃(i) + B ṽ(i) + D w̃(i)`.
#[derive(Debug, Clone)]
pub struct PredictionMatrices {
    pub phi: DMatrix<f64>,
    pub gamma_v: DMatrix<f64>,
    pub gamma_w: DMatrix<f64>,
}

impl PredictionMatrices {
    pub fn predict(&self, x: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.phi * x + &self.gamma_v * v + &self.gamma_w * w
    }
}

pub fn build_prediction(data: &ProblemData) -> PredictionMatrices {
    let sys = &data.system;
    let maps = StageMaps::new(sys, data.horizon, true);
    let (n, m, s, big_n) = (sys.n, sys.m, sys.s, data.horizon);
    let mut phi = DMatrix::zeros(n * big_n, n);
    let mut gamma_v = DMatrix::zeros(n * big_n, m * big_n);
    let mut gamma_w = DMatrix::zeros(n * big_n, s * big_n);
    for i in 1..=big_n {
        let x = &maps.states[i];
        phi.rows_mut((i - 1) * n, n).copy_from(&x.columns(0, n));
        gamma_v
            .rows_mut((i - 1) * n, n)
            .copy_from(&x.columns(n, m * big_n));
        gamma_w
            .rows_mut((i - 1) * n, n)
            .copy_from(&x.columns(n + m * big_n, s * big_n));
    }
    PredictionMatrices {
        phi,
        gamma_v,
        gamma_w,
    }
}

/// Predicted states `x̃(0..=N)` and inputs `ũ(0..N)` as linear maps of the
/// stacked vector `(x, V, W)`; `W` is omitted without disturbances.
#[derive(Debug, Clone)]
pub(crate) struct StageMaps {
    pub states: Vec<DMatrix<f64>>,
    pub inputs: Vec<DMatrix<f64>>,
    pub n: usize,
    pub nv: usize,
    pub nw: usize,
}

impl StageMaps {
    pub fn new(sys: &LtiSystem, horizon: usize, with_disturbance: bool) -> Self {
        let (n, m) = (sys.n, sys.m);
        let s = if with_disturbance { sys.s } else { 0 };
        let (nv, nw) = (m * horizon, s * horizon);
        let dim = n + nv + nw;
        let mut x = DMatrix::zeros(n, dim);
        x.columns_mut(0, n).fill_with_identity();
        let mut states = vec![x];
        let mut inputs = Vec::with_capacity(horizon);
        for i in 0..horizon {
            let mut v = DMatrix::zeros(m, dim);
            v.columns_mut(n + i * m, m).fill_with_identity();
            let prev = &states[i];
            inputs.push(-&sys.k_inf * prev + &v);
            let mut next = &sys.a_cl * prev + &sys.b * &v;
            if with_disturbance {
                let mut w = DMatrix::zeros(s, dim);
                w.columns_mut(n + nv + i * s, s).fill_with_identity();
                next += &sys.d * w;
            }
            states.push(next);
        }
        Self {
            states,
            inputs,
            n,
            nv,
            nw,
        }
    }

    pub fn dim(&self) -> usize {
        self.n + self.nv + self.nw
    }

    /// `𝕄` with `J(x, V, W) = ξ' 𝕄 ξ` for stage weights `(Q, R)` and terminal `P`.
    pub fn cost_matrix(
        &self,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
        p: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let horizon = self.inputs.len();
        let mut cost = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..horizon {
            let x = &self.states[i];
            let u = &self.inputs[i];
            cost += x.transpose() * q * x + u.transpose() * r * u;
        }
        let xn = &self.states[horizon];
        cost += xn.transpose() * p * xn;
        0.5 * (&cost + cost.transpose())
    }
}
