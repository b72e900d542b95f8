//! Affine law and its polyhedral region from one QP solve, then a walk
//! across facets to a second state.
//!
//! cargo run -p regional-mpc --example regional_law

use nalgebra::dvector;
use regional_mpc::condense::{Formulation, Scenario};
use regional_mpc::qpsolve::solve;
use regional_mpc::regional::{build_regional_law, update_active_set_along_line, Membership};

fn main() -> regional_mpc::Result<()> {
    let sc = Scenario::double_integrator();
    let qp = sc.qp(Formulation::MinMax, 5)?;
    let x0 = dvector![-6.0, 2.5];

    let sol = solve(&qp, &x0, None)?;
    let law = build_regional_law(&qp, &sol.active)?;
    println!("active set {:?}", law.active);
    println!("u = {:?} x + {:?}", law.k.as_slice(), law.b.as_slice());
    println!(
        "region: {} rows, {} from inactive constraints, {} from multiplier signs",
        law.region.num_rows(),
        law.feasible_rows,
        law.region.num_rows() - law.feasible_rows
    );
    println!(
        "law u0 {:.9}, QP u0 {:.9}",
        law.apply(&x0)[0],
        sol.input(&qp, &x0)[0]
    );

    let x1 = dvector![-2.0, 1.0];
    println!("x1 in region: {}", law.contains(&x1, Membership::Full));
    match update_active_set_along_line(&qp, &law, &x0, &x1) {
        Ok(laws) => {
            println!("crossed {} facets", laws.len());
            for l in &laws {
                println!("  active set {:?}", l.active);
            }
            let last = laws.last().unwrap_or(&law);
            let fresh = solve(&qp, &x1, None)?.input(&qp, &x1)[0];
            println!(
                "walked law u0 {:.9}, fresh QP u0 {fresh:.9}",
                last.apply(&x1)[0]
            );
        }
        Err(e) => println!("walk needs a QP: {e}"),
    }
    Ok(())
}
