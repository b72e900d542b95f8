//! Oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{dvector, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regional_mpc::condense::{CondensedQp, Scenario};
use regional_mpc::qpsolve::{phase1, solve, WEAK_TOLERANCE};
use regional_mpc::regional::RegionalLaw;

/// Uniform states in the state box where the QP is feasible.
pub fn feasible_states(
    sc: &Scenario,
    qp: &CondensedQp,
    count: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let x = dvector![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        if sc.x_set.contains(&x, 0.0) && phase1(qp, &x).is_ok() {
            out.push(x);
        }
    }
    out
}

/// Worst-case cost of the correction sequence `v` at `x` over all vertex
/// disturbance sequences, by forward simulation of `u = -K x + v`; `None`
/// if some sequence violates a constraint.
pub fn worst_case_cost(sc: &Scenario, x: &DVector<f64>, v: &[f64]) -> Option<f64> {
    let horizon = v.len();
    let sys = &sc.system;
    let q = &sc.config.q;
    let r = &sc.config.r;
    let mut worst = f64::NEG_INFINITY;
    for code in 0..(1usize << horizon) {
        let mut xk = x.clone();
        let mut cost = 0.0;
        for (k, vk) in v.iter().enumerate() {
            let u = -&sys.k_inf * &xk + dvector![*vk];
            if !sc.x_set.contains(&xk, 1e-12) || !sc.u_set.contains(&u, 1e-12) {
                return None;
            }
            cost += xk.dot(&(q * &xk)) + u.dot(&(r * &u));
            let w = if code >> (horizon - 1 - k) & 1 == 1 {
                1.0
            } else {
                -1.0
            };
            xk = sys.step(&xk, &u, &dvector![w]);
        }
        if !sc.terminal.contains(&xk, 1e-12) {
            return None;
        }
        cost += xk.dot(&(&sc.p * &xk));
        worst = worst.max(cost);
    }
    Some(worst)
}

/// Nested brute force for horizon 2: minimum over a refined grid of the
/// maximum over vertex sequences. The grid runs over `u0` and the
/// undisturbed `u1`, both confined to `U`, and is made finer until it hits
/// the feasible set.
pub fn brute_force_minmax(sc: &Scenario, x: &DVector<f64>) -> Option<(f64, [f64; 2])> {
    let sys = &sc.system;
    let to_v = |a: f64, b: f64| {
        let v0 = a + (&sys.k_inf * x)[0];
        let x1 = &sys.a * x + &sys.b * dvector![a];
        [v0, b + (&sys.k_inf * x1)[0]]
    };
    let grid = |center: [f64; 2], half: f64, points: usize| {
        let step = 2.0 * half / points as f64;
        let mut best: Option<(f64, [f64; 2])> = None;
        for i in 0..=points {
            for j in 0..=points {
                let ab = [
                    center[0] - half + i as f64 * step,
                    center[1] - half + j as f64 * step,
                ];
                if let Some(c) = worst_case_cost(sc, x, &to_v(ab[0], ab[1])) {
                    if best.is_none_or(|(b, _)| c < b) {
                        best = Some((c, ab));
                    }
                }
            }
        }
        best.map(|b| (b, step))
    };
    let mut points = 200;
    let ((mut cost, mut ab), mut step) = loop {
        if let Some(found) = grid([0.0, 0.0], 1.0, points) {
            break found;
        }
        if points >= 6400 {
            return None;
        }
        points *= 2;
    };
    while step > 1e-11 {
        let Some(((c, next), s)) = grid(ab, 4.0 * step, 32) else {
            break;
        };
        if c <= cost {
            cost = c;
            ab = next;
        }
        step = s;
    }
    Some((cost, to_v(ab[0], ab[1])))
}

/// Active sets of `law` and a fresh solve at `x` agree up to rows that are
/// weakly active for the QP or carry a vanishing law multiplier.
pub fn active_sets_agree(qp: &CondensedQp, law: &RegionalLaw, x: &DVector<f64>) -> bool {
    let sol = solve(qp, x, None).unwrap();
    let lam = law.multipliers(x);
    let weak_in_law = |i: usize| {
        law.active
            .iter()
            .position(|&a| a == i)
            .is_some_and(|r| lam[r] <= WEAK_TOLERANCE)
    };
    sol.active
        .iter()
        .filter(|i| !law.active.contains(i))
        .all(|i| sol.weakly_active.contains(i))
        && law
            .active
            .iter()
            .filter(|i| !sol.active.contains(i))
            .all(|&i| weak_in_law(i))
}
