//! Largest horizon at which min-max MPC has no more constraints than tube
//! MPC, for the bundled sets and for larger RPI descriptions.
//!
//! cargo run -p regional-mpc --example horizon_rule

use regional_mpc::condense::{horizon_bound, horizon_rule, Scenario};

fn main() -> regional_mpc::Result<()> {
    let sc = Scenario::double_integrator();
    let s = sc.system.s;
    let q_t = sc.terminal.num_rows();
    println!("s = {s}, q_T = {q_t}");
    for q_rpi in [sc.rpi.num_rows(), 100, 500, 2000] {
        let bound = horizon_bound(s, q_rpi, q_t, q_t)?;
        let n = horizon_rule(s, q_rpi, q_t, q_t)?;
        println!("q_R = {q_rpi:>4}: bound {bound:.4}, min-max preferable up to N = {n}");
    }
    Ok(())
}
