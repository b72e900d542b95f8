use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use regional_mpc::bench::{
    run_benchmark, run_trajectory, sample_disturbance, sample_initial_states, trajectory_svg,
    Audit, BenchConfig, DisturbancePolicy, PlotBounds,
};
use regional_mpc::condense::{horizon_bound, horizon_rule, Formulation, ProblemConfig, Scenario};
use regional_mpc::control::{Controller, ControllerConfig, Variant};
use regional_mpc::fixtures;
use regional_mpc::geometry::{linear_map, robust_invariance_slack, support_gap};
use regional_mpc::Result;

#[derive(Parser)]
#[command(name = "rmpc", version, about = "Robust regional MPC toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the terminal weight, RPI and terminal sets.
    Sets {
        /// Problem JSON; defaults to the bundled double integrator.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Compare against the published fixtures.
        #[arg(long)]
        fixtures: bool,
        /// Directory for the computed sets as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the condensed QP of one formulation.
    Build {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "minmax")]
        approach: Formulation,
        #[arg(long = "N", default_value_t = 5)]
        horizon: usize,
        /// Write the QP as JSON here instead of printing a summary only.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one closed-loop trajectory.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "minmax")]
        approach: Formulation,
        #[arg(long, default_value = "basic")]
        variant: Variant,
        #[arg(long = "N", default_value_t = 5)]
        horizon: usize,
        /// Initial state as comma-separated values; sampled when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "uniform")]
        policy: DisturbancePolicy,
        #[arg(long = "M")]
        m_budget: Option<usize>,
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Write the step log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Monte-Carlo benchmark over approaches, variants and horizons.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "minmax,tube,nominal")]
        approach: Vec<Formulation>,
        #[arg(long, value_delimiter = ',', default_value = "basic,asu,subopt")]
        variant: Vec<Variant>,
        #[arg(long = "N", value_delimiter = ',', default_value = "3,5,10")]
        horizons: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long = "M")]
        m_budget: Option<usize>,
        #[arg(long, default_value = "uniform")]
        policy: DisturbancePolicy,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Report run time relative to point-by-point (breaks byte-identical output).
        #[arg(long)]
        timing: bool,
        /// Check QP feasibility at every visited state.
        #[arg(long)]
        audit_feasibility: bool,
    },
    /// Largest horizon for which min-max has no more rows than tube.
    HorizonRule {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Disturbance dimension.
        #[arg(long)]
        s: Option<usize>,
        /// Rows of the RPI set.
        #[arg(long)]
        q_rpi: Option<usize>,
        /// Rows of the min-max terminal set.
        #[arg(long)]
        q_tm: Option<usize>,
        /// Rows of the tube terminal set.
        #[arg(long)]
        q_tt: Option<usize>,
    },
}

fn load(config: Option<&Path>) -> Result<Scenario> {
    match config {
        Some(path) => {
            Scenario::from_config(ProblemConfig::from_json(&std::fs::read_to_string(path)?)?)
        }
        None => Ok(Scenario::double_integrator()),
    }
}

fn sets(config: Option<&Path>, compare: bool, out: Option<&Path>) -> Result<()> {
    let computed = match config {
        Some(path) => {
            let mut cfg = ProblemConfig::from_json(&std::fs::read_to_string(path)?)?;
            cfg.rpi = None;
            cfg.terminal = None;
            Scenario::from_config(cfg)?
        }
        None => Scenario::from_config(ProblemConfig::double_integrator())?,
    };
    println!("terminal weight P = {}", computed.p);
    println!("LQR gain K = {}", computed.system.k_inf);
    println!("RPI approximation: {} rows", computed.rpi.num_rows());
    println!("robust terminal set: {} rows", computed.terminal.num_rows());
    println!(
        "nominal terminal set: {} rows",
        computed.terminal_nominal.num_rows()
    );
    if compare {
        let published = fixtures::rpi_set();
        let weight = fixtures::terminal_weight();
        let rel = computed
            .p
            .iter()
            .zip(weight.iter())
            .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
            .fold(0.0, f64::max);
        println!("P vs published: max relative deviation {rel:.3e}");
        // the published terminal set is computed from the published RPI set
        let terminal = regional_mpc::condense::robust_terminal_set(
            &computed.system,
            &computed.x_set,
            &computed.u_set,
            &published,
        )?;
        match terminal.row_match_error(&fixtures::terminal_set()) {
            Some(err) => println!("terminal set vs published: max row deviation {err:.3e}"),
            None => println!(
                "terminal set vs published: row counts differ ({} vs {})",
                terminal.num_rows(),
                fixtures::terminal_set().num_rows()
            ),
        }
        let dw = linear_map(&computed.system.d, &computed.w_set)?;
        let slack = robust_invariance_slack(&computed.system.a_cl, &published, &dw)?;
        println!("published RPI set: smallest invariance slack {slack:.3e}");
        let gap = support_gap(&computed.rpi, &published, &published)?;
        println!("RPI approximation vs published: support gap {gap:.3e} on published normals");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("rpi.json"), computed.rpi.to_json())?;
        std::fs::write(dir.join("terminal.json"), computed.terminal.to_json())?;
        std::fs::write(
            dir.join("terminal_nominal.json"),
            computed.terminal_nominal.to_json(),
        )?;
        let weight = serde_json::json!({ "P": regional_mpc::serde_mat::to_rows(&computed.p) });
        std::fs::write(
            dir.join("weight.json"),
            serde_json::to_string_pretty(&weight)?,
        )?;
        println!("wrote sets to {}", dir.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    scenario: &Scenario,
    approach: Formulation,
    variant: Variant,
    horizon: usize,
    x0: Option<Vec<f64>>,
    seed: u64,
    policy: DisturbancePolicy,
    m_budget: Option<usize>,
    plot: Option<&Path>,
    log_path: Option<&Path>,
) -> Result<()> {
    let qp = scenario.qp(approach, horizon)?;
    let target = scenario.target_for(approach).clone();
    let x0 = match x0 {
        Some(v) => DVector::from_vec(v),
        None => sample_initial_states(&qp, &scenario.x_set, &target, 1, seed)?.remove(0),
    };
    let m = m_budget.unwrap_or(scenario.config.suboptimal_steps);
    let config = ControllerConfig::new(variant, m, target.clone(), approach)?;
    let mut controller = Controller::new(&qp, config).record_laws();
    let (lo, hi) = scenario.disturbance_bounds();
    let policy = if approach.is_robust() {
        policy
    } else {
        DisturbancePolicy::Zero
    };
    let audit = Audit {
        x_set: &scenario.x_set,
        u_set: &scenario.u_set,
        recursive_feasibility: false,
    };
    let log = run_trajectory(
        &mut controller,
        &scenario.system,
        &x0,
        |k| sample_disturbance(&lo, &hi, policy, seed, 0, k),
        Some(audit),
        &qp,
        scenario.config.max_steps,
    )?;
    println!("x0 = {:?}", log.x0);
    println!("{:>4} {:>24} {:>10} {:>8} {:>2}", "k", "x", "u", "w", "e");
    for r in &log.records {
        println!(
            "{:>4} {:>24} {:>10.5} {:>8.4} {:>2}",
            r.k,
            format!("({:.4}, {:.4})", r.x[0], r.x.get(1).copied().unwrap_or(0.0)),
            r.u[0],
            r.w[0],
            u8::from(r.e)
        );
    }
    println!(
        "steps {}  QPs solved {}  QPs avoided {} ({:.2}%)  laws built {}",
        log.steps, log.qps_solved, log.qps_avoided, log.dqp_pct, log.laws_built
    );
    if let Some(path) = log_path {
        std::fs::write(path, serde_json::to_string_pretty(&log)?)?;
    }
    if let Some(path) = plot {
        let bounds = PlotBounds {
            x_set: scenario.x_set.clone(),
            target,
            u_range: (
                scenario.config.u_bounds[0][0],
                scenario.config.u_bounds[0][1],
            ),
            w_range: (
                scenario.config.w_bounds[0][0],
                scenario.config.w_bounds[0][1],
            ),
        };
        match trajectory_svg(&log, controller.laws(), &bounds) {
            Ok(svg) => {
                std::fs::write(path, svg)?;
                println!("wrote {}", path.display());
            }
            Err(e) => eprintln!("warning: plot skipped: {e}"),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sets {
            config,
            fixtures,
            out,
        } => sets(config.as_deref(), fixtures, out.as_deref()),
        Command::Build {
            config,
            approach,
            horizon,
            out,
        } => {
            let scenario = load(config.as_deref())?;
            let qp = scenario.qp(approach, horizon)?;
            println!(
                "{} N={horizon}: q={} p={}",
                approach.name(),
                qp.num_rows(),
                qp.num_vars()
            );
            if let Some(path) = out {
                std::fs::write(&path, qp.to_json())?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Simulate {
            config,
            approach,
            variant,
            horizon,
            x0,
            seed,
            policy,
            m_budget,
            plot,
            log,
        } => {
            let scenario = load(config.as_deref())?;
            simulate(
                &scenario,
                approach,
                variant,
                horizon,
                x0,
                seed,
                policy,
                m_budget,
                plot.as_deref(),
                log.as_deref(),
            )
        }
        Command::Bench {
            config,
            approach,
            variant,
            horizons,
            samples,
            seed,
            out,
            m_budget,
            policy,
            max_steps,
            timing,
            audit_feasibility,
        } => {
            let scenario = load(config.as_deref())?;
            let mut bench = BenchConfig::table(&scenario, samples, seed);
            bench.approaches = approach;
            bench.variants = variant;
            bench.horizons = horizons;
            bench.policy = policy;
            bench.timing = timing;
            bench.audit_feasibility = audit_feasibility;
            if let Some(m) = m_budget {
                bench.m_budget = m;
            }
            if let Some(steps) = max_steps {
                bench.max_steps = steps;
            }
            let report = run_benchmark(&scenario, &bench)?;
            print!("{}", report.to_csv());
            for cell in &report.cells {
                if cell.failures > 0 || cell.max_steps_hit > 0 {
                    eprintln!(
                        "{} {} N={}: {} failures, {} hit max steps",
                        cell.approach.name(),
                        cell.variant.name(),
                        cell.horizon,
                        cell.failures,
                        cell.max_steps_hit
                    );
                }
            }
            report.write(&out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::HorizonRule {
            config,
            s,
            q_rpi,
            q_tm,
            q_tt,
        } => {
            let scenario = load(config.as_deref())?;
            let s = s.unwrap_or(scenario.system.s);
            let q_rpi = q_rpi.unwrap_or(scenario.rpi.num_rows());
            let q_tm = q_tm.unwrap_or(scenario.terminal.num_rows());
            let q_tt = q_tt.unwrap_or(scenario.terminal.num_rows());
            let n_hat = horizon_rule(s, q_rpi, q_tm, q_tt)?;
            let bound = horizon_bound(s, q_rpi, q_tm, q_tt)?;
            println!(
                "s={s} q_R={q_rpi} q_TM={q_tm} q_TT={q_tt}: N_hat = {n_hat} (bound {bound:.4})"
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
