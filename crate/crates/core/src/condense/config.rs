use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{build_qp, CondensedQp, Formulation, LtiSystem, ProblemData};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::geometry::{
    linear_map, maximal_admissible_set, mrpi_approximation, pontryagin_difference, Polytope,
};
use crate::serde_mat;

fn default_suboptimal_steps() -> usize {
    15
}

fn default_alpha_max() -> f64 {
    0.01
}

fn default_max_steps() -> usize {
    200
}

/// JSON problem description. Sets are boxes given as `[lo, hi]` per
/// coordinate; the RPI and terminal sets are computed unless supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    #[serde(rename = "A", with = "serde_mat::matrix")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "serde_mat::matrix")]
    pub b: DMatrix<f64>,
    #[serde(rename = "D", with = "serde_mat::matrix")]
    pub d: DMatrix<f64>,
    #[serde(rename = "Q", with = "serde_mat::matrix")]
    pub q: DMatrix<f64>,
    #[serde(rename = "R", with = "serde_mat::matrix")]
    pub r: DMatrix<f64>,
    pub x_bounds: Vec<[f64; 2]>,
    pub u_bounds: Vec<[f64; 2]>,
    pub w_bounds: Vec<[f64; 2]>,
    pub horizon: usize,
    #[serde(default = "default_suboptimal_steps")]
    pub suboptimal_steps: usize,
    #[serde(default = "default_alpha_max")]
    pub alpha_max: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rpi: Option<Polytope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Polytope>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The bundled double-integrator example with sets left to be computed.
    pub fn double_integrator() -> Self {
        Self::from_json(fixtures::DOUBLE_INTEGRATOR_JSON).expect("bundled config parses")
    }

    /// The double-integrator example using the published RPI and terminal sets.
    pub fn double_integrator_published() -> Self {
        let mut cfg = Self::double_integrator();
        cfg.rpi = Some(fixtures::rpi_set());
        cfg.terminal = Some(fixtures::terminal_set());
        cfg
    }
}

fn box_set(bounds: &[[f64; 2]]) -> Polytope {
    let lo: Vec<f64> = bounds.iter().map(|b| b[0]).collect();
    let hi: Vec<f64> = bounds.iter().map(|b| b[1]).collect();
    Polytope::from_box(&lo, &hi)
}

/// A configured plant with its LQR data and all derived sets.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ProblemConfig,
    pub system: LtiSystem,
    /// Riccati solution used as terminal weight.
    pub p: DMatrix<f64>,
    pub x_set: Polytope,
    pub u_set: Polytope,
    pub w_set: Polytope,
    /// Robust positively invariant set of `A_cl` under `D w`.
    pub rpi: Polytope,
    /// Robust terminal set for the min-max and tube formulations.
    pub terminal: Polytope,
    /// Terminal set of the undisturbed formulation.
    pub terminal_nominal: Polytope,
}

impl Scenario {
    pub fn from_config(config: ProblemConfig) -> Result<Self> {
        let (system, p) = LtiSystem::with_lqr(
            config.a.clone(),
            config.b.clone(),
            config.d.clone(),
            &config.q,
            &config.r,
        )?;
        if config.x_bounds.len() != system.n
            || config.u_bounds.len() != system.m
            || config.w_bounds.len() != system.s
        {
            return Err(Error::DimensionMismatch("box bounds in config".into()));
        }
        let x_set = box_set(&config.x_bounds);
        let u_set = box_set(&config.u_bounds);
        let w_set = box_set(&config.w_bounds);
        let rpi = match &config.rpi {
            Some(r) => r.clone(),
            None => {
                let dw = linear_map(&system.d, &w_set)?;
                mrpi_approximation(&system.a_cl, &dw, config.alpha_max)?
            }
        };
        let terminal = match &config.terminal {
            Some(t) => t.clone(),
            None => robust_terminal_set(&system, &x_set, &u_set, &rpi)?,
        };
        let terminal_nominal = nominal_terminal_set(&system, &x_set, &u_set)?;
        Ok(Self {
            config,
            system,
            p,
            x_set,
            u_set,
            w_set,
            rpi,
            terminal,
            terminal_nominal,
        })
    }

    pub fn double_integrator() -> Self {
        Self::from_config(ProblemConfig::double_integrator_published())
            .expect("bundled scenario is valid")
    }

    pub fn problem(&self, formulation: Formulation, horizon: usize) -> ProblemData {
        ProblemData {
            system: self.system.clone(),
            x_set: self.x_set.clone(),
            u_set: self.u_set.clone(),
            w_set: self.w_set.clone(),
            q: self.config.q.clone(),
            r: self.config.r.clone(),
            p: self.p.clone(),
            terminal: self.terminal_for(formulation).clone(),
            horizon,
        }
    }

    pub fn qp(&self, formulation: Formulation, horizon: usize) -> Result<CondensedQp> {
        build_qp(formulation, &self.problem(formulation, horizon), &self.rpi)
    }

    pub fn terminal_for(&self, formulation: Formulation) -> &Polytope {
        if formulation.is_robust() {
            &self.terminal
        } else {
            &self.terminal_nominal
        }
    }

    /// Set whose entry ends a closed-loop run.
    pub fn target_for(&self, formulation: Formulation) -> &Polytope {
        if formulation.is_robust() {
            &self.rpi
        } else {
            &self.terminal_nominal
        }
    }

    pub fn disturbance_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.config.w_bounds.iter().map(|b| b[0]).collect(),
            self.config.w_bounds.iter().map(|b| b[1]).collect(),
        )
    }
}

/// Maximal admissible set of `A - BK` inside `(X ⊖ R) ∩ {x | -Kx ∈ U ⊖ (-K R)}`.
pub fn robust_terminal_set(
    sys: &LtiSystem,
    x_set: &Polytope,
    u_set: &Polytope,
    rpi: &Polytope,
) -> Result<Polytope> {
    let x_tight = pontryagin_difference(x_set, rpi)?;
    let u_tight = pontryagin_difference(u_set, &linear_map(&(-&sys.k_inf), rpi)?)?;
    let s = x_tight.intersect(&u_tight.preimage(&(-&sys.k_inf)))?;
    maximal_admissible_set(&sys.a_cl, &s)
}

/// Maximal admissible set of `A - BK` inside `X ∩ {x | -Kx ∈ U}`.
pub fn nominal_terminal_set(
    sys: &LtiSystem,
    x_set: &Polytope,
    u_set: &Polytope,
) -> Result<Polytope> {
    let s = x_set.intersect(&u_set.preimage(&(-&sys.k_inf)))?;
    maximal_admissible_set(&sys.a_cl, &s)
}
