//! Condensed QPs for min-max, tube-based and nominal MPC of a pre-stabilized
//! linear system, plus row-count formulas and the horizon rule.

mod builders;
mod config;
mod counts;
mod prediction;

pub use builders::{build_minmax_qp, build_nominal_qp, build_tube_qp};
pub use config::{nominal_terminal_set, robust_terminal_set, ProblemConfig, Scenario};
pub use counts::{constraint_count, decision_count, horizon_bound, horizon_rule, Dimensions};
pub use prediction::{build_prediction, PredictionMatrices};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::numerics::solve_dare;
use crate::serde_mat;

/// `x+ = A x + B u + D w` with the pre-feedback `u = -K x + v`.
#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k_inf: DMatrix<f64>,
    /// `A - B K`.
    pub a_cl: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
    pub s: usize,
}

impl LtiSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DMatrix<f64>,
        k_inf: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let s = d.ncols();
        if a.ncols() != n || b.nrows() != n || d.nrows() != n || k_inf.shape() != (m, n) {
            return Err(Error::DimensionMismatch("system matrices".into()));
        }
        let a_cl = &a - &b * &k_inf;
        let sys = Self {
            a,
            b,
            d,
            k_inf,
            a_cl,
            n,
            m,
            s,
        };
        let rho = sys.closed_loop_spectral_radius();
        if rho >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "closed loop A - BK is not Schur stable (spectral radius {rho:.6})"
            )));
        }
        Ok(sys)
    }

    /// System with the LQR gain for `(Q, R)`; also returns the Riccati solution.
    pub fn with_lqr(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        d: DMatrix<f64>,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) -> Result<(Self, DMatrix<f64>)> {
        let dare = solve_dare(&a, &b, q, r)?;
        Ok((Self::new(a, b, d, dare.k)?, dare.p))
    }

    pub fn closed_loop_spectral_radius(&self) -> f64 {
        self.a_cl
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `A x + B u + D w`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.d * w
    }

    pub fn dimensions(&self) -> Dimensions {
        Dimensions {
            n: self.n,
            m: self.m,
            s: self.s,
        }
    }
}

/// Everything a formulation needs besides the tube set.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub system: LtiSystem,
    pub x_set: Polytope,
    pub u_set: Polytope,
    pub w_set: Polytope,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub terminal: Polytope,
    pub horizon: usize,
}

impl ProblemData {
    pub fn validate(&self) -> Result<()> {
        let (n, m, s) = (self.system.n, self.system.m, self.system.s);
        if self.x_set.dim() != n
            || self.u_set.dim() != m
            || self.w_set.dim() != s
            || self.terminal.dim() != n
        {
            return Err(Error::DimensionMismatch("constraint sets".into()));
        }
        if self.q.shape() != (n, n) || self.p.shape() != (n, n) || self.r.shape() != (m, m) {
            return Err(Error::DimensionMismatch("weights".into()));
        }
        if self.r.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("input weight R"));
        }
        if self.p.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("terminal weight P"));
        }
        if self.q.clone().symmetric_eigen().eigenvalues.min() < -1e-12 {
            return Err(Error::NotPositiveDefinite("state weight Q"));
        }
        if self.terminal.is_empty()? {
            return Err(Error::EmptyTerminal);
        }
        Ok(())
    }

    /// Bounds of the disturbance set, which must be an axis-aligned box.
    pub fn disturbance_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        for i in 0..self.w_set.num_rows() {
            let nonzero = self.w_set.t.row(i).iter().filter(|v| **v != 0.0).count();
            if nonzero > 1 {
                return Err(Error::InvalidConfig("disturbance set must be a box".into()));
            }
        }
        let (lo, hi) = self.w_set.bounding_box()?;
        Ok((lo.iter().copied().collect(), hi.iter().copied().collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    MinMax,
    Tube,
    Nominal,
}

impl Formulation {
    pub const ALL: [Formulation; 3] =
        [Formulation::MinMax, Formulation::Tube, Formulation::Nominal];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::MinMax => "minmax",
            Formulation::Tube => "tube",
            Formulation::Nominal => "nominal",
        }
    }

    pub fn is_robust(self) -> bool {
        !matches!(self, Formulation::Nominal)
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" | "min-max" => Ok(Formulation::MinMax),
            "tube" => Ok(Formulation::Tube),
            "nominal" => Ok(Formulation::Nominal),
            other => Err(Error::InvalidConfig(format!("unknown approach '{other}'"))),
        }
    }
}

/// Which constraint of the optimal control problem a QP row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// Epigraph row of one disturbance vertex sequence.
    Vertex(usize),
    State {
        stage: usize,
        row: usize,
    },
    Input {
        stage: usize,
        row: usize,
    },
    Terminal(usize),
    /// Initial tube constraint `x - x̄0 ∈ R`.
    Tube(usize),
}

/// `min 1/2 ε'Ĥε + c'ε  s.t.  G ε <= W + S x`, with the applied input and
/// the optimal value recovered as affine/quadratic functions of `(x, ε)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondensedQp {
    pub formulation: Formulation,
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    #[serde(with = "serde_mat::matrix")]
    pub hessian: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub linear: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub g: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub w: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub s: DMatrix<f64>,
    /// Number of leading epigraph (vertex) rows.
    pub vertex_rows: usize,
    /// Column of the epigraph variable, if any.
    pub epigraph: Option<usize>,
    /// Hessian of the input-correction sequence.
    #[serde(with = "serde_mat::matrix")]
    pub h: DMatrix<f64>,
    /// Cross term between state and correction sequence.
    #[serde(with = "serde_mat::matrix")]
    pub l: DMatrix<f64>,
    /// Applied input `u = input_x x + input_eps ε`.
    #[serde(with = "serde_mat::matrix")]
    pub input_x: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub input_eps: DMatrix<f64>,
    /// Correction sequence `V = sequence_x x + sequence_eps ε`.
    #[serde(with = "serde_mat::matrix")]
    pub sequence_x: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub sequence_eps: DMatrix<f64>,
    /// Optimal cost is the QP objective plus `x' Y x`.
    #[serde(with = "serde_mat::matrix")]
    pub value_offset: DMatrix<f64>,
    pub row_kinds: Vec<RowKind>,
}

impl CondensedQp {
    /// Total row count `q`.
    pub fn num_rows(&self) -> usize {
        self.g.nrows()
    }

    /// Decision-variable count `p`.
    pub fn num_vars(&self) -> usize {
        self.g.ncols()
    }

    /// Rows after the vertex block.
    pub fn constraint_rows(&self) -> std::ops::Range<usize> {
        self.vertex_rows..self.num_rows()
    }

    /// `W + S x`.
    pub fn rhs(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.w + &self.s * x
    }

    /// Rows whose `G` part vanishes only restrict the state.
    pub fn is_state_only_row(&self, i: usize) -> bool {
        self.g.row(i).iter().all(|v| *v == 0.0)
    }

    pub fn input(&self, x: &DVector<f64>, eps: &DVector<f64>) -> DVector<f64> {
        &self.input_x * x + &self.input_eps * eps
    }

    pub fn qp_objective(&self, eps: &DVector<f64>) -> f64 {
        0.5 * eps.dot(&(&self.hessian * eps)) + self.linear.dot(eps)
    }

    /// Optimal-control cost for the decision `ε` at state `x`.
    pub fn cost(&self, x: &DVector<f64>, eps: &DVector<f64>) -> f64 {
        self.qp_objective(eps) + x.dot(&(&self.value_offset * x))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("QP serializes")
    }
}

/// Builds the QP of the requested formulation. The tube formulation needs
/// the RPI set of the error dynamics.
pub fn build_qp(
    formulation: Formulation,
    data: &ProblemData,
    rpi: &Polytope,
) -> Result<CondensedQp> {
    match formulation {
        Formulation::MinMax => build_minmax_qp(data),
        Formulation::Tube => build_tube_qp(data, rpi),
        Formulation::Nominal => build_nominal_qp(data),
    }
}
