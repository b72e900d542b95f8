//! Condensed QPs of the three formulations: sizes, closed-form counts and
//! one solve.
//!
//! cargo run -p regional-mpc --example condensed_qp

use nalgebra::dvector;
use regional_mpc::condense::{constraint_count, decision_count, Formulation, Scenario};
use regional_mpc::qpsolve::solve;

fn main() -> regional_mpc::Result<()> {
    let sc = Scenario::double_integrator();
    let dims = sc.system.dimensions();
    let x = dvector![-5.0, 2.0];

    for formulation in Formulation::ALL {
        for horizon in [3, 5, 10] {
            let qp = sc.qp(formulation, horizon)?;
            let q = constraint_count(
                formulation,
                horizon,
                dims,
                sc.rpi.num_rows(),
                sc.terminal_for(formulation).num_rows(),
            );
            println!(
                "{:<8} N={horizon:<2} q={:<5} (closed form {q:<5}) p={:<3} (closed form {})",
                formulation.name(),
                qp.num_rows(),
                qp.num_vars(),
                decision_count(formulation, horizon, dims),
            );
        }
    }

    let qp = sc.qp(Formulation::MinMax, 5)?;
    let sol = solve(&qp, &x, None)?;
    println!("\nmin-max N=5 at x = {:?}", x.as_slice());
    println!("  u0 = {:.6}", sol.input(&qp, &x)[0]);
    println!("  cost = {:.6}", qp.cost(&x, &sol.epsilon));
    println!("  active rows {:?}", sol.active);
    println!("  stationarity {:.2e}", sol.stationarity(&qp));
    Ok(())
}
