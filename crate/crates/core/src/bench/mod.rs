//! Closed-loop simulation and the Monte-Carlo benchmark over formulations,
//! controller variants and horizons.

mod plot;

pub use plot::{region_polygon, trajectory_svg, PlotBounds};

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condense::{CondensedQp, Formulation, LtiSystem, Scenario};
use crate::control::{Controller, ControllerConfig, Variant};
use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::qpsolve::phase1;

/// Slack allowed by the constraint audit.
pub const AUDIT_TOLERANCE: f64 = 1e-9;
/// Draws after which a low acceptance rate counts as stalled.
const MIN_SAMPLING_DRAWS: usize = 10_000;
const MIN_ACCEPTANCE_RATE: f64 = 1e-4;
/// Keystream words reserved per disturbance draw.
const WORDS_PER_STEP: u128 = 64;

/// `A x + B u + D w`.
pub fn plant_step(
    sys: &LtiSystem,
    x: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> DVector<f64> {
    sys.step(x, u, w)
}

/// Uniform rejection sampling over the bounding box of `x_set`, keeping
/// states where the QP is feasible and which lie outside `exclude`.
pub fn sample_initial_states(
    qp: &CondensedQp,
    x_set: &Polytope,
    exclude: &Polytope,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if count == 0 {
        return Err(Error::InvalidConfig(
            "sample count must be at least 1".into(),
        ));
    }
    let (lo, hi) = x_set.bounding_box()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut states = Vec::with_capacity(count);
    let mut tried = 0;
    while states.len() < count {
        tried += 1;
        let x = DVector::from_fn(lo.len(), |i, _| rng.random_range(lo[i]..=hi[i]));
        if x_set.contains(&x, 0.0)
            && !exclude.contains(&x, AUDIT_TOLERANCE)
            && phase1(qp, &x).is_ok()
        {
            states.push(x);
        }
        if tried >= MIN_SAMPLING_DRAWS && (states.len() as f64) < MIN_ACCEPTANCE_RATE * tried as f64
        {
            return Err(Error::SamplingStalled {
                accepted: states.len(),
                tried,
            });
        }
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbancePolicy {
    Uniform,
    /// Every component at one of its bounds.
    VertexAdversarial,
    Zero,
}

impl std::str::FromStr for DisturbancePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(DisturbancePolicy::Uniform),
            "vertex" | "vertex-adversarial" => Ok(DisturbancePolicy::VertexAdversarial),
            "zero" | "none" => Ok(DisturbancePolicy::Zero),
            other => Err(Error::InvalidConfig(format!(
                "unknown disturbance policy '{other}'"
            ))),
        }
    }
}

/// Disturbance `w(k)` of trajectory `trajectory`; every `(seed, trajectory, k)`
/// has its own slice of the keystream, so draws do not depend on call order.
pub fn sample_disturbance(
    lo: &[f64],
    hi: &[f64],
    policy: DisturbancePolicy,
    seed: u64,
    trajectory: u64,
    k: usize,
) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng.set_word_pos(k as u128 * WORDS_PER_STEP);
    DVector::from_fn(lo.len(), |i, _| match policy {
        DisturbancePolicy::Uniform => rng.random_range(lo[i]..=hi[i]),
        DisturbancePolicy::VertexAdversarial => {
            if rng.random_bool(0.5) {
                hi[i]
            } else {
                lo[i]
            }
        }
        DisturbancePolicy::Zero => 0.0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub e: bool,
    pub laws_built: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub x0: Vec<f64>,
    pub records: Vec<StepRecord>,
    pub final_state: Vec<f64>,
    pub steps: usize,
    pub qps_solved: usize,
    pub qps_avoided: usize,
    pub dqp_pct: f64,
    pub laws_built: usize,
    pub fallbacks: usize,
    pub switched_to_point_by_point: bool,
    #[serde(skip)]
    pub controller_time: Duration,
}

/// Constraint checks applied along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct Audit<'a> {
    pub x_set: &'a Polytope,
    pub u_set: &'a Polytope,
    /// Also require a feasible QP at every visited state.
    pub recursive_feasibility: bool,
}

/// Steps the closed loop from `x0` until the controller's target is reached.
pub fn run_trajectory(
    controller: &mut Controller,
    sys: &LtiSystem,
    x0: &DVector<f64>,
    disturbance: impl Fn(usize) -> DVector<f64>,
    audit: Option<Audit>,
    qp: &CondensedQp,
    max_steps: usize,
) -> Result<TrajectoryLog> {
    let mut x = x0.clone();
    let mut records = Vec::new();
    let mut controller_time = Duration::ZERO;
    let mut k = 0;
    while !controller.in_target(&x) {
        if k >= max_steps {
            return Err(Error::MaxStepsExceeded(max_steps));
        }
        if let Some(audit) = audit {
            if !audit.x_set.contains(&x, AUDIT_TOLERANCE) {
                return Err(Error::ConstraintViolation {
                    step: k,
                    what: format!("state {x} outside X"),
                });
            }
            if audit.recursive_feasibility && phase1(qp, &x).is_err() {
                return Err(Error::ConstraintViolation {
                    step: k,
                    what: format!("QP infeasible at {x}"),
                });
            }
        }
        let start = Instant::now();
        let out = controller.step(&x)?;
        controller_time += start.elapsed();
        if let Some(audit) = audit {
            if !audit.u_set.contains(&out.u, AUDIT_TOLERANCE) {
                return Err(Error::ConstraintViolation {
                    step: k,
                    what: format!("input {} outside U", out.u),
                });
            }
        }
        let w = disturbance(k);
        records.push(StepRecord {
            k,
            x: x.iter().copied().collect(),
            u: out.u.iter().copied().collect(),
            w: w.iter().copied().collect(),
            e: out.qp_solved,
            laws_built: out.laws_built,
        });
        x = plant_step(sys, &x, &out.u, &w);
        k += 1;
    }
    let steps = records.len();
    let qps_solved = records.iter().filter(|r| r.e).count();
    let qps_avoided = steps - qps_solved;
    let stats = controller.stats();
    Ok(TrajectoryLog {
        x0: x0.iter().copied().collect(),
        final_state: x.iter().copied().collect(),
        steps,
        qps_solved,
        qps_avoided,
        dqp_pct: if steps == 0 {
            0.0
        } else {
            100.0 * qps_avoided as f64 / steps as f64
        },
        laws_built: stats.laws_built,
        fallbacks: stats.fallbacks,
        switched_to_point_by_point: controller.switched_to_point_by_point(),
        records,
        controller_time,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub approaches: Vec<Formulation>,
    pub variants: Vec<Variant>,
    pub horizons: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub m_budget: usize,
    pub max_steps: usize,
    /// Disturbances of the robust formulations; nominal runs are undisturbed.
    pub policy: DisturbancePolicy,
    /// Measure time relative to a point-by-point run (not reproducible).
    pub timing: bool,
    /// Check QP feasibility at every visited state.
    pub audit_feasibility: bool,
}

impl BenchConfig {
    /// The full grid of the double-integrator study.
    pub fn table(scenario: &Scenario, samples: usize, seed: u64) -> Self {
        Self {
            approaches: Formulation::ALL.to_vec(),
            variants: Variant::REGIONAL.to_vec(),
            horizons: vec![3, 5, 10],
            samples,
            seed,
            m_budget: scenario.config.suboptimal_steps,
            max_steps: scenario.config.max_steps,
            policy: DisturbancePolicy::Uniform,
            timing: false,
            audit_feasibility: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub approach: Formulation,
    pub variant: Variant,
    pub horizon: usize,
    pub q: usize,
    pub p: usize,
    pub requested: usize,
    /// Trajectories that reached the target; all means are over these.
    pub n_traj: usize,
    pub mean_steps: f64,
    pub mean_qps: f64,
    pub mean_dqp: f64,
    /// Mean of the per-trajectory percentages.
    pub mean_dqp_pct: f64,
    /// Avoided QPs over all steps of all trajectories.
    pub pooled_dqp_pct: f64,
    pub mean_laws_built: f64,
    pub fallbacks: usize,
    pub switched: usize,
    pub rel_time: Option<f64>,
    pub max_steps_hit: usize,
    pub failures: usize,
    pub errors: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub cells: Vec<CellReport>,
}

pub const CSV_HEADER: &str =
    "approach,variant,N,q,p,mean_steps,mean_dqp,mean_dqp_pct,rel_time,n_traj,seed";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let rel = c.rel_time.map(|t| format!("{t:.4}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{:.4},{:.4},{:.4},{},{},{}",
                c.approach.name(),
                c.variant.name(),
                c.horizon,
                c.q,
                c.p,
                c.mean_steps,
                c.mean_dqp,
                c.mean_dqp_pct,
                rel,
                c.n_traj,
                c.seed
            )
            .expect("writing to a string");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `bench.csv` and `bench.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench.csv"), self.to_csv())?;
        std::fs::write(dir.join("bench.json"), self.to_json())?;
        Ok(())
    }

    pub fn cell(
        &self,
        approach: Formulation,
        variant: Variant,
        horizon: usize,
    ) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.approach == approach && c.variant == variant && c.horizon == horizon)
    }
}

/// Runs one trajectory per initial state in parallel; results keep the
/// order of `states`.
#[allow(clippy::too_many_arguments)]
pub fn run_batch(
    scenario: &Scenario,
    qp: &CondensedQp,
    variant: Variant,
    states: &[DVector<f64>],
    policy: DisturbancePolicy,
    seed: u64,
    m_budget: usize,
    max_steps: usize,
    audit_feasibility: bool,
) -> Result<Vec<Result<TrajectoryLog>>> {
    let formulation = qp.formulation;
    let config = ControllerConfig::new(
        variant,
        m_budget,
        scenario.target_for(formulation).clone(),
        formulation,
    )?;
    let (lo, hi) = scenario.disturbance_bounds();
    let policy = if formulation.is_robust() {
        policy
    } else {
        DisturbancePolicy::Zero
    };
    let audit = Audit {
        x_set: &scenario.x_set,
        u_set: &scenario.u_set,
        recursive_feasibility: audit_feasibility,
    };
    Ok(states
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let mut controller = Controller::new(qp, config.clone());
            let draw = |k| sample_disturbance(&lo, &hi, policy, seed, i as u64, k);
            run_trajectory(
                &mut controller,
                &scenario.system,
                x0,
                draw,
                Some(audit),
                qp,
                max_steps,
            )
        })
        .collect())
}

fn summarize(
    approach: Formulation,
    variant: Variant,
    qp: &CondensedQp,
    requested: usize,
    seed: u64,
    results: &[Result<TrajectoryLog>],
) -> CellReport {
    let logs: Vec<&TrajectoryLog> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let max_steps_hit = results
        .iter()
        .filter(|r| matches!(r, Err(Error::MaxStepsExceeded(_))))
        .count();
    let errors: Vec<String> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Err(Error::MaxStepsExceeded(_)) | Ok(_) => None,
            Err(e) => Some(format!("trajectory {i}: {e}")),
        })
        .collect();
    let n = logs.len();
    let mean = |f: &dyn Fn(&TrajectoryLog) -> f64| {
        if n == 0 {
            0.0
        } else {
            logs.iter().map(|l| f(l)).sum::<f64>() / n as f64
        }
    };
    let total_steps: usize = logs.iter().map(|l| l.steps).sum();
    let total_avoided: usize = logs.iter().map(|l| l.qps_avoided).sum();
    CellReport {
        approach,
        variant,
        horizon: qp.horizon,
        q: qp.num_rows(),
        p: qp.num_vars(),
        requested,
        n_traj: n,
        mean_steps: mean(&|l| l.steps as f64),
        mean_qps: mean(&|l| l.qps_solved as f64),
        mean_dqp: mean(&|l| l.qps_avoided as f64),
        mean_dqp_pct: mean(&|l| l.dqp_pct),
        pooled_dqp_pct: if total_steps == 0 {
            0.0
        } else {
            100.0 * total_avoided as f64 / total_steps as f64
        },
        mean_laws_built: mean(&|l| l.laws_built as f64),
        fallbacks: logs.iter().map(|l| l.fallbacks).sum(),
        switched: logs.iter().filter(|l| l.switched_to_point_by_point).count(),
        rel_time: None,
        max_steps_hit,
        failures: errors.len(),
        errors: errors.into_iter().take(10).collect(),
        seed,
    }
}

fn total_time(results: &[Result<TrajectoryLog>]) -> Duration {
    results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|l| l.controller_time)
        .sum()
}

/// Every (approach, horizon, variant) cell. All variants of a cell start
/// from the same sampled states and see the same disturbance sequences.
pub fn run_benchmark(scenario: &Scenario, config: &BenchConfig) -> Result<BenchReport> {
    if config.samples == 0 || config.horizons.contains(&0) {
        return Err(Error::InvalidConfig(
            "samples and horizons must be positive".into(),
        ));
    }
    let mut cells = Vec::new();
    for &approach in &config.approaches {
        for &horizon in &config.horizons {
            let qp = scenario.qp(approach, horizon)?;
            let states = sample_initial_states(
                &qp,
                &scenario.x_set,
                scenario.target_for(approach),
                config.samples,
                config.seed,
            )?;
            let run = |variant| {
                run_batch(
                    scenario,
                    &qp,
                    variant,
                    &states,
                    config.policy,
                    config.seed,
                    config.m_budget,
                    config.max_steps,
                    config.audit_feasibility,
                )
            };
            let baseline = if config.timing {
                Some(total_time(&run(Variant::PointByPoint)?))
            } else {
                None
            };
            for &variant in &config.variants {
                let results = run(variant)?;
                let mut cell = summarize(
                    approach,
                    variant,
                    &qp,
                    config.samples,
                    config.seed,
                    &results,
                );
                if let Some(base) = baseline {
                    cell.rel_time =
                        Some(total_time(&results).as_secs_f64() / base.as_secs_f64().max(1e-12));
                }
                cells.push(cell);
            }
        }
    }
    Ok(BenchReport {
        config: config.clone(),
        cells,
    })
}
