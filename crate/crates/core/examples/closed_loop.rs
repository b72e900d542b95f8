//! One disturbed trajectory under each controller variant, plus an SVG of
//! the basic run.
//!
//! cargo run -p regional-mpc --example closed_loop -- [plot.svg]

use nalgebra::dvector;
use regional_mpc::bench::{
    run_trajectory, sample_disturbance, trajectory_svg, DisturbancePolicy, PlotBounds,
};
use regional_mpc::condense::{Formulation, Scenario};
use regional_mpc::control::{Controller, ControllerConfig, Variant};

fn main() -> regional_mpc::Result<()> {
    let sc = Scenario::double_integrator();
    let formulation = Formulation::MinMax;
    let qp = sc.qp(formulation, 5)?;
    let (lo, hi) = sc.disturbance_bounds();
    let x0 = dvector![-8.0, 3.0];
    let plot = std::env::args().nth(1);

    for variant in [
        Variant::PointByPoint,
        Variant::Basic,
        Variant::ActiveSetUpdates,
        Variant::Suboptimal,
    ] {
        let config = ControllerConfig::new(
            variant,
            sc.config.suboptimal_steps,
            sc.target_for(formulation).clone(),
            formulation,
        )?;
        let mut controller = Controller::new(&qp, config).record_laws();
        let w = |k| sample_disturbance(&lo, &hi, DisturbancePolicy::Uniform, 7, 0, k);
        let log = run_trajectory(
            &mut controller,
            &sc.system,
            &x0,
            w,
            None,
            &qp,
            sc.config.max_steps,
        )?;
        println!(
            "{:<7} steps {:>2}  QPs {:>2}  avoided {:>5.1}%  laws {}",
            variant.name(),
            log.steps,
            log.qps_solved,
            log.dqp_pct,
            log.laws_built
        );
        if let (Variant::Basic, Some(path)) = (variant, plot.as_deref()) {
            let bounds = PlotBounds {
                x_set: sc.x_set.clone(),
                target: sc.target_for(formulation).clone(),
                u_range: (sc.config.u_bounds[0][0], sc.config.u_bounds[0][1]),
                w_range: (lo[0], hi[0]),
            };
            std::fs::write(path, trajectory_svg(&log, controller.laws(), &bounds)?)?;
            println!("wrote {path}");
        }
    }
    Ok(())
}
