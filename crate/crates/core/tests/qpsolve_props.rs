use nalgebra::dvector;
use proptest::prelude::*;

use regional_mpc::condense::{Formulation, Scenario};
use regional_mpc::qpsolve::{phase1, solve, QpSolver, ACTIVE_TOLERANCE, KKT_TOLERANCE};
use regional_mpc::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_are_kkt_points(which in 0usize..3, horizon in 2usize..6, x in (-10.0f64..10.0, -10.0f64..10.0)) {
        let sc = Scenario::double_integrator();
        let qp = sc.qp(Formulation::ALL[which], horizon).unwrap();
        let x = dvector![x.0, x.1];
        match solve(&qp, &x, None) {
            Ok(sol) => {
                let rhs = qp.rhs(&x);
                let scale = 1.0 + sol.lambda.amax();
                prop_assert!(sol.stationarity(&qp) <= KKT_TOLERANCE * scale);
                prop_assert!((&qp.g * &sol.epsilon - &rhs).max() <= 1e-8);
                prop_assert!(sol.lambda.min() >= -1e-9);
                prop_assert!(sol.max_objective_increase <= 1e-9);
                for &i in &sol.inactive {
                    prop_assert!(sol.lambda[i].abs() <= 1e-9 || qp.is_state_only_row(i));
                }
                for &i in &sol.active {
                    let r = qp.g.row(i).dot(&sol.epsilon.transpose()) - rhs[i];
                    prop_assert!(r.abs() <= ACTIVE_TOLERANCE);
                }
            }
            Err(Error::Infeasible) => prop_assert!(phase1(&qp, &x).is_err()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn warm_starts_do_not_change_the_optimum(which in 0usize..3, a in (-9.0f64..9.0, -9.0f64..9.0), b in (-0.5f64..0.5, -0.5f64..0.5)) {
        let sc = Scenario::double_integrator();
        let qp = sc.qp(Formulation::ALL[which], 4).unwrap();
        let x1 = dvector![a.0, a.1];
        let x2 = &x1 + dvector![b.0, b.1];
        prop_assume!(phase1(&qp, &x1).is_ok() && phase1(&qp, &x2).is_ok());
        let mut solver = QpSolver::new();
        solver.solve(&qp, &x1).unwrap();
        let warm = solver.solve(&qp, &x2).unwrap();
        let cold = solve(&qp, &x2, None).unwrap();
        prop_assert!((warm.objective - cold.objective).abs() <= 1e-8 * (1.0 + cold.objective.abs()));
        prop_assert!((warm.input(&qp, &x2) - cold.input(&qp, &x2)).amax() <= 1e-6);
    }
}
