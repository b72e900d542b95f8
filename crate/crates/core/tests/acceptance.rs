//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use regional_mpc::bench::{run_benchmark, BenchConfig, BenchReport, DisturbancePolicy};
use regional_mpc::condense::{
    constraint_count, horizon_rule, robust_terminal_set, Formulation, ProblemConfig, Scenario,
};
use regional_mpc::control::{Controller, ControllerConfig, Variant};
use regional_mpc::fixtures;
use regional_mpc::geometry::{
    linear_map, maximal_admissible_set, robust_invariance_slack, support_gap,
};
use regional_mpc::numerics::solve_dare;
use regional_mpc::qpsolve::solve;

const COUNT_TABLE: [(Formulation, [(usize, usize); 3]); 3] = [
    (Formulation::MinMax, [(32, 4), (68, 6), (1090, 11)]),
    (Formulation::Tube, [(74, 5), (86, 7), (116, 12)]),
    (Formulation::Nominal, [(24, 3), (36, 5), (66, 10)]),
];
const DARE_REL_TOL: f64 = 1e-5;
const TERMINAL_TOL: f64 = 1e-4;
const RPI_SLACK_TOL: f64 = -1e-8;
const MRPI_GAP_TOL: f64 = 0.02;
const LAW_PAIRS_MIN: usize = 500;
const LAW_INPUT_TOL: f64 = 1e-6;
const ORACLE_STATES: usize = 20;
const ORACLE_TOL: f64 = 1e-4;
const SAMPLES: usize = 500;
const SEED: u64 = 0;
const STEPS_TARGET: (f64, f64) = (9.35, 1.5);
const DQP_BASIC: (f64, f64) = (22.49, 10.0);
const DQP_ASU: (f64, f64) = (88.85, 10.0);
const DQP_SUBOPT: (f64, f64) = (33.41, 10.0);
const ADVERSARIAL_SAMPLES: usize = 100;

type Outcome = (bool, String);

fn within(value: f64, (center, band): (f64, f64)) -> bool {
    (value - center).abs() <= band
}

fn counts(sc: &Scenario) -> Outcome {
    let mut bad = Vec::new();
    for (formulation, cells) in COUNT_TABLE {
        for (horizon, expected) in [3, 5, 10].into_iter().zip(cells) {
            let qp = sc.qp(formulation, horizon).unwrap();
            let got = (qp.num_rows(), qp.num_vars());
            let formula = constraint_count(
                formulation,
                horizon,
                sc.system.dimensions(),
                sc.rpi.num_rows(),
                sc.terminal_for(formulation).num_rows(),
            );
            if got != expected || formula != expected.0 as u128 {
                bad.push(format!(
                    "{} N={horizon}: {got:?} (formula {formula})",
                    formulation.name()
                ));
            }
        }
    }
    (
        bad.is_empty(),
        if bad.is_empty() {
            "all 9 (q, p) cells exact".into()
        } else {
            bad.join("; ")
        },
    )
}

fn horizon(_: &Scenario) -> Outcome {
    let n_hat = horizon_rule(1, 50, 6, 6);
    let direct = |n: u32| 2u64.pow(n) + 6 < 50 + 6;
    let ok = matches!(n_hat, Ok(5)) && direct(5) && !direct(6);
    (
        ok,
        format!(
            "N_hat = {n_hat:?}; direct check N=5: {}, N=6: {}",
            direct(5),
            direct(6)
        ),
    )
}

fn terminal_weight(sc: &Scenario) -> Outcome {
    let c = &sc.config;
    let p = solve_dare(&c.a, &c.b, &c.q, &c.r).unwrap().p;
    let published = fixtures::terminal_weight();
    let rel = p
        .iter()
        .zip(published.iter())
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    (
        rel <= DARE_REL_TOL,
        format!("max relative deviation {rel:.2e} (tol {DARE_REL_TOL:e})"),
    )
}

fn terminal_set(sc: &Scenario) -> Outcome {
    let terminal =
        robust_terminal_set(&sc.system, &sc.x_set, &sc.u_set, &fixtures::rpi_set()).unwrap();
    // the same admissible set, computed directly from its constraint set
    let again = maximal_admissible_set(&sc.system.a_cl, &terminal).unwrap();
    let published = fixtures::terminal_set();
    match (
        terminal.row_match_error(&published),
        again.row_match_error(&published),
    ) {
        (Some(err), Some(err2)) => {
            let worst = err.max(err2);
            (
                worst <= TERMINAL_TOL,
                format!("6 rows, max entry deviation {worst:.2e} (tol {TERMINAL_TOL:e})"),
            )
        }
        _ => (
            false,
            format!(
                "row count {} vs {}",
                terminal.num_rows(),
                published.num_rows()
            ),
        ),
    }
}

fn rpi_fixture(sc: &Scenario) -> Outcome {
    let published = fixtures::rpi_set();
    let dw = linear_map(&sc.system.d, &sc.w_set).unwrap();
    let slack = robust_invariance_slack(&sc.system.a_cl, &published, &dw).unwrap();
    let computed = Scenario::from_config(ProblemConfig::double_integrator()).unwrap();
    let gap = support_gap(&computed.rpi, &published, &published).unwrap();
    (
        slack >= RPI_SLACK_TOL && gap <= MRPI_GAP_TOL,
        format!("published set invariance slack {slack:.3e} (need >= {RPI_SLACK_TOL:e}); mRPI support gap {gap:.2e} (tol {MRPI_GAP_TOL})"),
    )
}

fn law_oracle(sc: &Scenario) -> Outcome {
    let (lo, hi) = sc.disturbance_bounds();
    let mut pairs = 0;
    let mut worst = 0.0f64;
    let mut disagreements = 0;
    for formulation in Formulation::ALL {
        for horizon in [3, 5] {
            let qp = sc.qp(formulation, horizon).unwrap();
            let target = sc.target_for(formulation).clone();
            let starts =
                regional_mpc::bench::sample_initial_states(&qp, &sc.x_set, &target, 40, 77)
                    .unwrap();
            for variant in [Variant::Basic, Variant::ActiveSetUpdates] {
                let config =
                    ControllerConfig::new(variant, 15, target.clone(), formulation).unwrap();
                for (i, x0) in starts.iter().enumerate() {
                    let mut ctrl = Controller::new(&qp, config.clone());
                    let mut x = x0.clone();
                    let policy = if formulation.is_robust() {
                        DisturbancePolicy::Uniform
                    } else {
                        DisturbancePolicy::Zero
                    };
                    for k in 0..200 {
                        if ctrl.in_target(&x) {
                            break;
                        }
                        let out = ctrl.step(&x).unwrap();
                        if let Some(law) = ctrl.current_law() {
                            let fresh = solve(&qp, &x, None).unwrap().input(&qp, &x);
                            let err = (law.apply(&x) - &fresh).amax() / (1.0 + fresh.amax());
                            worst = worst.max(err);
                            if !common::active_sets_agree(&qp, law, &x) {
                                disagreements += 1;
                            }
                            pairs += 1;
                        }
                        let w = regional_mpc::bench::sample_disturbance(
                            &lo, &hi, policy, 5, i as u64, k,
                        );
                        x = sc.system.step(&x, &out.u, &w);
                    }
                }
            }
        }
    }
    (
        pairs >= LAW_PAIRS_MIN && worst <= LAW_INPUT_TOL && disagreements == 0,
        format!("{pairs} pairs, max |u_law - u_QP|/(1+|u_QP|) {worst:.2e}, active-set disagreements {disagreements}"),
    )
}

fn minmax_oracle(sc: &Scenario) -> Outcome {
    let qp = sc.qp(Formulation::MinMax, 2).unwrap();
    let mut worst = 0.0f64;
    for x in common::feasible_states(sc, &qp, ORACLE_STATES, 2024) {
        let sol = solve(&qp, &x, None).unwrap();
        let Some((brute, _)) = common::brute_force_minmax(sc, &x) else {
            return (false, format!("brute force found no feasible point at {x}"));
        };
        worst = worst.max((qp.cost(&x, &sol.epsilon) - brute).abs());
    }
    (
        worst <= ORACLE_TOL,
        format!("{ORACLE_STATES} states, max cost gap {worst:.2e} (tol {ORACLE_TOL:e})"),
    )
}

fn statistics(report: &BenchReport) -> Outcome {
    let cell = |f, v| report.cell(f, v, 5).unwrap();
    let basic = cell(Formulation::MinMax, Variant::Basic);
    let asu = cell(Formulation::MinMax, Variant::ActiveSetUpdates);
    let subopt = cell(Formulation::MinMax, Variant::Suboptimal);
    let nominal = cell(Formulation::Nominal, Variant::Basic);
    let ok = within(basic.mean_steps, STEPS_TARGET)
        && within(basic.mean_dqp_pct, DQP_BASIC)
        && within(asu.mean_dqp_pct, DQP_ASU)
        && within(subopt.mean_dqp_pct, DQP_SUBOPT)
        && nominal.mean_dqp_pct == 0.0
        && [basic, asu, subopt, nominal]
            .iter()
            .all(|c| c.n_traj == SAMPLES);
    (
        ok,
        format!(
            "N=5, {SAMPLES} trajectories: min-max steps {:.2}; dQP% basic {:.2}, asu {:.2}, subopt {:.2}; nominal basic {:.2}",
            basic.mean_steps, basic.mean_dqp_pct, asu.mean_dqp_pct, subopt.mean_dqp_pct, nominal.mean_dqp_pct
        ),
    )
}

fn robustness(sc: &Scenario, report: &BenchReport) -> Outcome {
    let config = BenchConfig {
        approaches: vec![Formulation::MinMax, Formulation::Tube],
        samples: ADVERSARIAL_SAMPLES,
        policy: DisturbancePolicy::VertexAdversarial,
        audit_feasibility: true,
        ..BenchConfig::table(sc, ADVERSARIAL_SAMPLES, SEED)
    };
    let adversarial = run_benchmark(sc, &config).unwrap();
    let robust = |r: &BenchReport| {
        r.cells
            .iter()
            .filter(|c| c.approach.is_robust())
            .map(|c| (c.n_traj, c.failures + c.max_steps_hit))
            .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    };
    let (uniform_ok, uniform_bad) = robust(report);
    let (adv_ok, adv_bad) = robust(&adversarial);
    (
        uniform_bad == 0 && adv_bad == 0,
        format!(
            "uniform: {uniform_ok} robust trajectories, {uniform_bad} violations/infeasible; vertex-adversarial: {adv_ok}, {adv_bad}"
        ),
    )
}

fn determinism() -> Outcome {
    let run = |tag: &str| {
        let dir: PathBuf =
            std::env::temp_dir().join(format!("rmpc-acceptance-{}-{tag}", std::process::id()));
        let status = Command::new(env!("CARGO_BIN_EXE_rmpc"))
            .args([
                "bench",
                "--N",
                "3,5",
                "--samples",
                "100",
                "--seed",
                "7",
                "--out",
            ])
            .arg(&dir)
            .output()
            .expect("bench runs");
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        (
            std::fs::read(dir.join("bench.csv")).unwrap(),
            std::fs::read(dir.join("bench.json")).unwrap(),
        )
    };
    let (a, b) = (run("a"), run("b"));
    (
        a == b,
        format!(
            "two CLI bench runs: CSV identical {}, JSON identical {}",
            a.0 == b.0,
            a.1 == b.1
        ),
    )
}

fn main() -> ExitCode {
    let sc = Scenario::double_integrator();
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |id, name, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {id:>2} {name}: {} [{secs:.1}s]",
            if outcome.0 { "PASS" } else { "FAIL" },
            outcome.1
        );
        results.push((id, name, outcome, secs));
    };
    record(1, "constraint/variable counts", &mut || counts(&sc));
    record(2, "horizon rule", &mut || horizon(&sc));
    record(3, "terminal weighting", &mut || terminal_weight(&sc));
    record(4, "terminal set", &mut || terminal_set(&sc));
    record(5, "RPI fixture", &mut || rpi_fixture(&sc));
    record(6, "regional-law oracle equivalence", &mut || {
        law_oracle(&sc)
    });
    record(7, "small-instance min-max oracle", &mut || {
        minmax_oracle(&sc)
    });
    let start = Instant::now();
    let config = BenchConfig {
        audit_feasibility: true,
        ..BenchConfig::table(&sc, SAMPLES, SEED)
    };
    let report = run_benchmark(&sc, &config).unwrap();
    println!(
        "     (benchmark grid: {:.1}s)",
        start.elapsed().as_secs_f64()
    );
    record(8, "statistical reproduction", &mut || statistics(&report));
    record(9, "robustness audit", &mut || robustness(&sc, &report));
    record(10, "determinism", &mut determinism);
    let failed: Vec<usize> = results.iter().filter(|r| !r.2 .0).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failing: {failed:?}");
        ExitCode::FAILURE
    }
}
