//! Closed-loop regional controllers: reuse a law while the state stays in
//! its region, walk facets to update the active set, or keep a law in its
//! feasibility region for a bounded number of steps.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::condense::{CondensedQp, Formulation};
use crate::error::{Error, FallbackReason, Result};
use crate::geometry::Polytope;
use crate::qpsolve::QpSolver;
use crate::regional::{build_regional_law, update_active_set_along_line, Membership, RegionalLaw};

/// Tolerance of the target-set membership test.
pub const TARGET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// A QP at every step; the timing baseline.
    PointByPoint,
    Basic,
    ActiveSetUpdates,
    Suboptimal,
}

impl Variant {
    pub const REGIONAL: [Variant; 3] = [
        Variant::Basic,
        Variant::ActiveSetUpdates,
        Variant::Suboptimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PointByPoint => "pbp",
            Variant::Basic => "basic",
            Variant::ActiveSetUpdates => "asu",
            Variant::Suboptimal => "subopt",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pbp" | "point-by-point" => Ok(Variant::PointByPoint),
            "basic" => Ok(Variant::Basic),
            "asu" | "active-set-updates" => Ok(Variant::ActiveSetUpdates),
            "subopt" | "suboptimal" => Ok(Variant::Suboptimal),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub variant: Variant,
    /// Reuse steps allowed outside the optimality region before switching
    /// to point-by-point for good.
    pub m_budget: usize,
    pub target: Polytope,
    pub formulation: Formulation,
}

impl ControllerConfig {
    pub fn new(
        variant: Variant,
        m_budget: usize,
        target: Polytope,
        formulation: Formulation,
    ) -> Result<Self> {
        if m_budget == 0 {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        if !target.is_proper() {
            return Err(Error::InvalidConfig("target set is not proper".into()));
        }
        Ok(Self {
            variant,
            m_budget,
            target,
            formulation,
        })
    }

    pub fn in_target(&self, x: &DVector<f64>) -> bool {
        self.target.contains(x, TARGET_TOLERANCE)
    }
}

/// What one controller step did.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: DVector<f64>,
    /// The event `e(k)`.
    pub qp_solved: bool,
    pub laws_built: usize,
    pub fallback: Option<FallbackReason>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerStats {
    pub steps: usize,
    pub qps_solved: usize,
    pub laws_built: usize,
    pub rank_failures: usize,
    pub fallbacks: usize,
}

/// One controller instance serving one plant.
#[derive(Debug, Clone)]
pub struct Controller<'a> {
    qp: &'a CondensedQp,
    config: ControllerConfig,
    solver: QpSolver,
    law: Option<RegionalLaw>,
    previous: Option<DVector<f64>>,
    reuse_counter: usize,
    point_by_point: bool,
    events: Vec<bool>,
    stats: ControllerStats,
    history: Option<Vec<RegionalLaw>>,
}

impl<'a> Controller<'a> {
    pub fn new(qp: &'a CondensedQp, config: ControllerConfig) -> Self {
        let point_by_point = config.variant == Variant::PointByPoint;
        Self {
            qp,
            config,
            solver: QpSolver::new(),
            law: None,
            previous: None,
            reuse_counter: 0,
            point_by_point,
            events: Vec::new(),
            stats: ControllerStats::default(),
            history: None,
        }
    }

    /// Keeps every law the controller builds, for plotting.
    pub fn record_laws(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn in_target(&self, x: &DVector<f64>) -> bool {
        self.config.in_target(x)
    }

    /// `e(k)` for every step so far.
    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn stats(&self) -> ControllerStats {
        self.stats
    }

    pub fn current_law(&self) -> Option<&RegionalLaw> {
        self.law.as_ref()
    }

    pub fn laws(&self) -> &[RegionalLaw] {
        self.history.as_deref().unwrap_or(&[])
    }

    /// Whether the suboptimal variant has given up on reuse.
    pub fn switched_to_point_by_point(&self) -> bool {
        self.point_by_point && self.config.variant != Variant::PointByPoint
    }

    pub fn step(&mut self, x: &DVector<f64>) -> Result<StepOutcome> {
        let outcome = match self.config.variant {
            Variant::PointByPoint => self.solve_only(x)?,
            Variant::Basic => self.step_basic(x)?,
            Variant::ActiveSetUpdates => self.step_active_set_updates(x)?,
            Variant::Suboptimal => self.step_suboptimal(x)?,
        };
        self.previous = Some(x.clone());
        self.events.push(outcome.qp_solved);
        self.stats.steps += 1;
        if outcome.qp_solved {
            self.stats.qps_solved += 1;
        }
        self.stats.laws_built += outcome.laws_built;
        if outcome.fallback.is_some() {
            self.stats.fallbacks += 1;
        }
        Ok(outcome)
    }

    fn reuse(&self, x: &DVector<f64>) -> StepOutcome {
        let law = self.law.as_ref().expect("reuse needs a law");
        StepOutcome {
            u: law.apply(x),
            qp_solved: false,
            laws_built: 0,
            fallback: None,
        }
    }

    fn solve_only(&mut self, x: &DVector<f64>) -> Result<StepOutcome> {
        let sol = self.solver.solve(self.qp, x)?;
        self.law = None;
        Ok(StepOutcome {
            u: sol.input(self.qp, x),
            qp_solved: true,
            laws_built: 0,
            fallback: None,
        })
    }

    /// Solves the QP and builds the law of its active set; a rank-deficient
    /// active set leaves no law, so the next step solves again.
    fn solve_and_build(&mut self, x: &DVector<f64>) -> Result<StepOutcome> {
        let sol = self.solver.solve(self.qp, x)?;
        let u = sol.input(self.qp, x);
        let built = match build_regional_law(self.qp, &sol.active) {
            Ok(law) => Some(law),
            Err(Error::RankDeficient(_) | Error::IllConditioned { .. }) => {
                self.stats.rank_failures += 1;
                None
            }
            Err(other) => return Err(other),
        };
        let laws_built = usize::from(built.is_some());
        self.adopt(built);
        Ok(StepOutcome {
            u,
            qp_solved: true,
            laws_built,
            fallback: None,
        })
    }

    fn adopt(&mut self, law: Option<RegionalLaw>) {
        if let (Some(history), Some(law)) = (self.history.as_mut(), law.as_ref()) {
            history.push(law.clone());
        }
        self.law = law;
    }

    fn law_contains(&self, x: &DVector<f64>, mode: Membership) -> bool {
        self.law.as_ref().is_some_and(|law| law.contains(x, mode))
    }

    fn step_basic(&mut self, x: &DVector<f64>) -> Result<StepOutcome> {
        if self.law_contains(x, Membership::Full) {
            return Ok(self.reuse(x));
        }
        self.solve_and_build(x)
    }

    fn step_active_set_updates(&mut self, x: &DVector<f64>) -> Result<StepOutcome> {
        if self.law_contains(x, Membership::Full) {
            return Ok(self.reuse(x));
        }
        let (Some(law), Some(from)) = (self.law.as_ref(), self.previous.as_ref()) else {
            return self.solve_and_build(x);
        };
        match update_active_set_along_line(self.qp, law, from, x) {
            Ok(mut laws) => {
                let built = laws.len();
                if let Some(history) = self.history.as_mut() {
                    history.extend(laws.iter().cloned());
                }
                if let Some(last) = laws.pop() {
                    self.law = Some(last);
                }
                let mut out = self.reuse(x);
                out.laws_built = built;
                Ok(out)
            }
            Err(Error::FallbackRequired(reason)) => {
                let mut out = self.solve_and_build(x)?;
                out.fallback = Some(reason);
                Ok(out)
            }
            Err(other) => Err(other),
        }
    }

    fn step_suboptimal(&mut self, x: &DVector<f64>) -> Result<StepOutcome> {
        if !self.point_by_point && self.reuse_counter >= self.config.m_budget && !self.in_target(x)
        {
            self.point_by_point = true;
        }
        if self.point_by_point {
            return self.solve_only(x);
        }
        if self.law_contains(x, Membership::FeasibleOnly) {
            self.reuse_counter += 1;
            return Ok(self.reuse(x));
        }
        self.reuse_counter = 0;
        self.solve_and_build(x)
    }
}
