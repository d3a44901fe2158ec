//! Randomized invariants of the QP solvers, barriers, and integrator.

use proptest::prelude::*;

use icbf::barrier::{compute_p, BarrierFunction};
use icbf::minnorm::{
    minnorm_multi, minnorm_offset, minnorm_single, oracle_qp, HalfspaceProblem, QPStatus,
};
use icbf::types::ClassK;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn finite_coord() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

fn problem_strategy() -> impl Strategy<Value = HalfspaceProblem> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(m, k)| {
        prop::collection::vec(
            (prop::collection::vec(finite_coord(), m), finite_coord()),
            k,
        )
        .prop_map(HalfspaceProblem::new)
    })
}

proptest! {
    #[test]
    fn single_constraint_satisfied_or_zero(
        p in prop::collection::vec(-5.0..5.0f64, 1..=4),
        d in -5.0..5.0f64,
    ) {
        prop_assume!(norm(&p) >= 1e-3);
        let v = minnorm_single(&p, d).unwrap();
        if d > 0.0 {
            // active: constraint met with equality
            prop_assert!((dot(&p, &v) - d).abs() < 1e-9 * (1.0 + d.abs()));
        } else {
            prop_assert!(v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn single_solution_is_minimal(
        (p, perturb) in (1usize..=4).prop_flat_map(|m| (
            prop::collection::vec(-5.0..5.0f64, m),
            prop::collection::vec(-1.0..1.0f64, m),
        )),
        d in 0.01..5.0f64,
    ) {
        prop_assume!(norm(&p) >= 1e-3);
        let v = minnorm_single(&p, d).unwrap();
        // any other feasible point is no shorter
        let w: Vec<f64> = v.iter().zip(&perturb).map(|(a, b)| a + b).collect();
        if dot(&p, &w) >= d {
            prop_assert!(norm(&w) >= norm(&v) - 1e-9);
        }
    }

    #[test]
    fn multi_agrees_with_oracle(problem in problem_strategy()) {
        let fast = minnorm_multi(&problem);
        let slow = oracle_qp(&problem, &vec![0.0; problem.m]);
        prop_assert_eq!(fast.status, slow.status);
        if fast.status == QPStatus::Optimal {
            let diff: Vec<f64> = fast.v_star.iter().zip(&slow.v_star).map(|(a, b)| a - b).collect();
            prop_assert!(
                norm(&diff) < 1e-7 * (1.0 + norm(&slow.v_star)),
                "fast {:?} slow {:?}", fast.v_star, slow.v_star
            );
        }
    }

    #[test]
    fn multi_solution_is_feasible(problem in problem_strategy()) {
        let sol = minnorm_multi(&problem);
        if sol.status == QPStatus::Optimal {
            for (i, (p, d)) in problem.rows().iter().enumerate() {
                let scale = 1.0 + norm(p) * norm(&sol.v_star) + d.abs();
                prop_assert!(
                    dot(p, &sol.v_star) >= d - 1e-8 * scale,
                    "row {i} violated: {} < {d}", dot(p, &sol.v_star)
                );
            }
        }
    }

    #[test]
    fn multi_zero_iff_every_row_slack(problem in problem_strategy()) {
        let sol = minnorm_multi(&problem);
        if sol.status == QPStatus::Optimal {
            let all_slack = problem.rows().iter().all(|(_, d)| *d <= 0.0);
            if all_slack {
                prop_assert!(sol.v_star.iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn offset_solution_dominates_random_feasible_points(
        (p, bias, candidate) in (1usize..=3).prop_flat_map(|m| (
            prop::collection::vec(-3.0..3.0f64, m),
            prop::collection::vec(-3.0..3.0f64, m),
            prop::collection::vec(-6.0..6.0f64, m),
        )),
        d in -3.0..3.0f64,
    ) {
        prop_assume!(norm(&p) >= 1e-3 || d <= 0.0);
        let v = minnorm_offset(&p, d, &bias).unwrap();
        prop_assert!(dot(&p, &v) >= d - 1e-8 * (1.0 + d.abs()));
        if dot(&p, &candidate) >= d {
            let vb: Vec<f64> = v.iter().zip(&bias).map(|(a, b)| a + b).collect();
            let cb: Vec<f64> = candidate.iter().zip(&bias).map(|(a, b)| a + b).collect();
            prop_assert!(norm(&cb) >= norm(&vb) - 1e-8);
        }
    }

    #[test]
    fn quadratic_barrier_p_matches_finite_difference(
        u in prop::collection::vec(-2.0..2.0f64, 1..=3),
        scale in 0.1..3.0f64,
    ) {
        let b = BarrierFunction::new(ClassK::Linear(1.0), move |_x, u| {
            scale - u.iter().map(|ui| ui * ui).sum::<f64>()
        });
        let analytic = BarrierFunction::new(ClassK::Linear(1.0), move |_x, u| {
            scale - u.iter().map(|ui| ui * ui).sum::<f64>()
        })
        .with_grad_u(|_x, u| u.iter().map(|ui| -2.0 * ui).collect());
        let x = vec![0.0];
        let p_fd = compute_p(&b, &x, &u).unwrap();
        let p_an = compute_p(&analytic, &x, &u).unwrap();
        for (a, f) in p_an.iter().zip(&p_fd) {
            prop_assert!((a - f).abs() < 1e-5 * (1.0 + a.abs()), "{a} vs {f}");
        }
    }
}
