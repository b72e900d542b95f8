//! RPI and terminal sets, computed from scratch and checked against the
//! bundled fixtures.
//!
//! cargo run -p regional-mpc --example invariant_sets

use regional_mpc::condense::{ProblemConfig, Scenario};
use regional_mpc::fixtures;
use regional_mpc::geometry::{linear_map, robust_invariance_slack, support_gap};

fn main() -> regional_mpc::Result<()> {
    let sc = Scenario::from_config(ProblemConfig::double_integrator())?;
    let dw = linear_map(&sc.system.d, &sc.w_set)?;

    println!("computed RPI set: {} rows", sc.rpi.num_rows());
    println!(
        "  invariance slack {:.3e}",
        robust_invariance_slack(&sc.system.a_cl, &sc.rpi, &dw)?
    );
    let (lo, hi) = sc.rpi.bounding_box()?;
    println!(
        "  bounding box [{:.4}, {:.4}] x [{:.4}, {:.4}]",
        lo[0], hi[0], lo[1], hi[1]
    );
    println!("robust terminal set: {} rows", sc.terminal.num_rows());
    println!(
        "nominal terminal set: {} rows",
        sc.terminal_nominal.num_rows()
    );

    let published = fixtures::rpi_set();
    println!("published RPI set: {} rows", published.num_rows());
    println!(
        "  invariance slack {:.3e}",
        robust_invariance_slack(&sc.system.a_cl, &published, &dw)?
    );
    println!(
        "  support gap to computed set {:.3e}",
        support_gap(&published, &sc.rpi, &published)?
    );
    Ok(())
}
