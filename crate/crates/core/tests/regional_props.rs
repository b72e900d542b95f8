mod common;

use common::active_sets_agree;
use nalgebra::{dvector, DVector};
use proptest::prelude::*;

use regional_mpc::condense::{CondensedQp, Formulation, Scenario};
use regional_mpc::qpsolve::{phase1, solve};
use regional_mpc::regional::{
    build_regional_law, update_active_set_along_line, Membership, RegionalLaw, RowOrigin,
};
use regional_mpc::Error;

fn formulation(i: usize) -> Formulation {
    Formulation::ALL[i % 3]
}

fn law_at(qp: &CondensedQp, x: &DVector<f64>) -> Option<RegionalLaw> {
    let sol = solve(qp, x, None).ok()?;
    build_regional_law(qp, &sol.active).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interior_points_follow_the_law(
        which in 0usize..3,
        x0 in (-10.0f64..10.0, -10.0f64..10.0),
        dir in (-1.0f64..1.0, -1.0f64..1.0),
        scale in 0.0f64..1.0,
    ) {
        let sc = Scenario::double_integrator();
        let qp = sc.qp(formulation(which), 3).unwrap();
        let x0 = dvector![x0.0, x0.1];
        prop_assume!(phase1(&qp, &x0).is_ok());
        let law = law_at(&qp, &x0).unwrap();
        prop_assert!(law.contains(&x0, Membership::Full));
        // shrink towards x0 until inside the region
        let mut x = &x0 + dvector![dir.0, dir.1] * scale;
        for _ in 0..40 {
            if law.contains(&x, Membership::Full) { break; }
            x = &x0 + (&x - &x0) * 0.5;
        }
        prop_assume!(law.contains(&x, Membership::Full));
        prop_assert!(phase1(&qp, &x).is_ok(), "region point outside the feasible set");
        let fresh = solve(&qp, &x, None).unwrap();
        let u = fresh.input(&qp, &x);
        prop_assert!((law.apply(&x) - &u).amax() <= 1e-6 * (1.0 + u.amax()));
        prop_assert!(active_sets_agree(&qp, &law, &x));
        let lam = law.multipliers(&x);
        for (r, &i) in law.active.iter().enumerate() {
            if !fresh.weakly_active.contains(&i) && fresh.active.contains(&i) {
                prop_assert!((lam[r] - fresh.lambda[i]).abs() <= 1e-5 * (1.0 + fresh.lambda[i].abs()));
            }
        }
    }

    #[test]
    fn walking_a_segment_back_returns_to_the_same_active_set(
        which in 0usize..3,
        x0 in (-10.0f64..10.0, -10.0f64..10.0),
        step in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let sc = Scenario::double_integrator();
        let qp = sc.qp(formulation(which), 3).unwrap();
        let a = dvector![x0.0, x0.1];
        let b = &a + dvector![step.0, step.1];
        prop_assume!(phase1(&qp, &a).is_ok() && phase1(&qp, &b).is_ok());
        let law_a = law_at(&qp, &a).unwrap();
        let forward = update_active_set_along_line(&qp, &law_a, &a, &b);
        prop_assume!(forward.is_ok());
        let forward = forward.unwrap();
        let law_b = forward.last().unwrap_or(&law_a).clone();
        let fresh = solve(&qp, &b, None).unwrap().input(&qp, &b);
        prop_assert!((law_b.apply(&b) - &fresh).amax() <= 1e-6 * (1.0 + fresh.amax()));
        let backward = update_active_set_along_line(&qp, &law_b, &b, &a);
        prop_assume!(backward.is_ok());
        let backward = backward.unwrap();
        let back = backward.last().unwrap_or(&law_b);
        prop_assert!((back.apply(&a) - law_a.apply(&a)).amax() <= 1e-6 * (1.0 + law_a.apply(&a).amax()));
        prop_assert!(back.contains(&a, Membership::Full));
        prop_assert!(active_sets_agree(&qp, back, &a));
    }
}

/// Crosses a multiplier facet of the law at `x0` along some direction, if any
/// direction reaches one first.
fn beyond_multiplier_facet(law: &RegionalLaw, x0: &DVector<f64>) -> Option<DVector<f64>> {
    for k in 0..72 {
        let theta = std::f64::consts::TAU * k as f64 / 72.0;
        let dir = dvector![theta.cos(), theta.sin()];
        let mut first: Option<(f64, usize)> = None;
        for i in 0..law.region.num_rows() {
            let den = law.region.t.row(i).dot(&dir.transpose());
            if den <= 1e-12 {
                continue;
            }
            let t = (law.region.d[i] - law.region.t.row(i).dot(&x0.transpose())) / den;
            if first.is_none_or(|(best, _)| t < best) {
                first = Some((t, i));
            }
        }
        let (t, i) = first?;
        if matches!(law.origins[i], RowOrigin::Multiplier(_)) && t > 1e-6 {
            let x = x0 + &dir * (t + 1e-4);
            if !law.contains(&x, Membership::Full) && law.contains(&x, Membership::FeasibleOnly) {
                return Some(x);
            }
        }
    }
    None
}

#[test]
fn feasible_only_states_get_robustly_feasible_inputs() {
    let sc = Scenario::double_integrator();
    let qp = sc.qp(Formulation::MinMax, 5).unwrap();
    let mut found = 0;
    for x0 in [
        dvector![-8.0, 2.0],
        dvector![6.0, -1.5],
        dvector![-4.0, 3.0],
        dvector![9.0, -2.5],
        dvector![-2.0, -1.0],
    ] {
        let Some(law) = law_at(&qp, &x0) else {
            continue;
        };
        let Some(x) = beyond_multiplier_facet(&law, &x0) else {
            continue;
        };
        found += 1;
        let u = law.apply(&x);
        assert!(sc.u_set.contains(&u, 1e-9));
        for w in [-1.0, 1.0] {
            let next = sc.system.step(&x, &u, &dvector![w]);
            assert!(
                phase1(&qp, &next).is_ok(),
                "successor of {x} under w={w} infeasible"
            );
        }
    }
    assert!(found >= 2, "only {found} states beyond a multiplier facet");
}

#[test]
fn segment_inside_the_region_needs_no_update() {
    let sc = Scenario::double_integrator();
    let qp = sc.qp(Formulation::MinMax, 3).unwrap();
    let x = dvector![-5.0, 1.0];
    let law = law_at(&qp, &x).unwrap();
    assert!(update_active_set_along_line(&qp, &law, &x, &x)
        .unwrap()
        .is_empty());
}

#[test]
fn segment_through_a_region_vertex_requires_a_fallback() {
    let sc = Scenario::double_integrator();
    let qp = sc.qp(Formulation::MinMax, 3).unwrap();
    let mut tried = 0;
    for x0 in [
        dvector![-5.0, 1.0],
        dvector![4.0, -1.0],
        dvector![-7.0, 2.0],
        dvector![2.0, 1.5],
    ] {
        let Some(law) = law_at(&qp, &x0) else {
            continue;
        };
        let Ok(poly) = law
            .region
            .intersect(&sc.x_set)
            .and_then(|p| p.vertices_2d())
        else {
            continue;
        };
        for v in poly {
            let v = dvector![v[0], v[1]];
            // only vertices where two region facets meet, away from the state box
            let tight: Vec<usize> = (0..law.region.num_rows())
                .filter(|&i| {
                    (law.region.d[i] - law.region.t.row(i).dot(&v.transpose())).abs() <= 1e-9
                })
                .collect();
            if tight.len() < 2 || !sc.x_set.contains(&v, -1e-6) {
                continue;
            }
            let target = &x0 + (&v - &x0) * 1.5;
            tried += 1;
            let result = update_active_set_along_line(&qp, &law, &x0, &target);
            assert!(
                matches!(result, Err(Error::FallbackRequired(_))),
                "walk through a vertex of {x0}'s region did not fall back"
            );
        }
    }
    assert!(tried > 0);
}
