//! Riccati terminal weight and LQR gain of the double integrator.
//!
//! cargo run -p regional-mpc --example lqr_terminal_weight

use nalgebra::dmatrix;
use regional_mpc::numerics::{dare_residual, solve_dare};

fn main() -> regional_mpc::Result<()> {
    let a = dmatrix![1.0, 1.0; 0.0, 1.0];
    let b = dmatrix![0.0; 1.0];
    let q = dmatrix![1.0, 0.0; 0.0, 1.0];
    let r = dmatrix![10.0];

    let dare = solve_dare(&a, &b, &q, &r)?;
    println!(
        "P = {:?}",
        dare.p
            .row_iter()
            .map(|r| r.iter().copied().collect::<Vec<_>>())
            .collect::<Vec<_>>()
    );
    println!("K = {:?} (u = -K x)", dare.k.as_slice());
    println!("converged in {} iterations", dare.iterations);
    println!("residual {:.2e}", dare_residual(&a, &b, &q, &r, &dare.p));

    let a_cl = &a - &b * &dare.k;
    let rho = a_cl
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    println!("closed-loop spectral radius {rho:.4}");
    Ok(())
}
