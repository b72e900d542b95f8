//! Small Monte-Carlo run over every formulation, variant and horizon.
//!
//! cargo run --release -p regional-mpc --example benchmark_table -- [samples]

use regional_mpc::bench::{run_benchmark, BenchConfig};
use regional_mpc::condense::Scenario;

fn main() -> regional_mpc::Result<()> {
    let samples = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50);
    let sc = Scenario::double_integrator();
    let report = run_benchmark(&sc, &BenchConfig::table(&sc, samples, 0))?;
    println!(
        "{:<8} {:<7} {:>3} {:>5} {:>3} {:>7} {:>7} {:>7}",
        "approach", "variant", "N", "q", "p", "steps", "dQP", "dQP%"
    );
    for c in &report.cells {
        println!(
            "{:<8} {:<7} {:>3} {:>5} {:>3} {:>7.2} {:>7.2} {:>7.2}",
            c.approach.name(),
            c.variant.name(),
            c.horizon,
            c.q,
            c.p,
            c.mean_steps,
            c.mean_dqp,
            c.mean_dqp_pct
        );
    }
    Ok(())
}
