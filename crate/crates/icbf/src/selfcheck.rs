//! Built-in diagnostic suite: quick cross-checks of the solvers and the
//! benchmark scenario against independent references. Meant to run in a
//! few seconds from the CLI to confirm an installation behaves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acc::{
    acc_predictor, build_acc_scenario, AccParams, ControllerVariant, PredictorMode,
};
use crate::controllers::InfeasibilityPolicy;
use crate::integrator::{rk4_step, simulate, ClosedLoopField};
use crate::linalg;
use crate::minnorm::{minnorm_multi, oracle_qp, HalfspaceProblem, QPStatus};
use crate::types::{validate_class_k, AugmentedState, ClassK};

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct SelfcheckReport {
    pub results: Vec<CheckResult>,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.results.push(CheckResult { name, passed, detail });
    }
}

fn random_problem(rng: &mut ChaCha8Rng) -> HalfspaceProblem {
    let m = rng.gen_range(1..=4);
    let k = rng.gen_range(1..=5);
    let rows = (0..k)
        .map(|_| {
            let p: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            (p, rng.gen_range(-2.0..2.0))
        })
        .collect();
    HalfspaceProblem::new(rows)
}

fn solver_oracle_agreement(rng: &mut ChaCha8Rng, instances: usize) -> (usize, String) {
    let mut mismatches = 0;
    let mut first = String::new();
    for i in 0..instances {
        let problem = random_problem(rng);
        let fast = minnorm_multi(&problem);
        let slow = oracle_qp(&problem, &vec![0.0; problem.m]);
        let ok = match (fast.status, slow.status) {
            (QPStatus::Optimal, QPStatus::Optimal) => {
                let diff: Vec<f64> = fast
                    .v_star
                    .iter()
                    .zip(&slow.v_star)
                    .map(|(a, b)| a - b)
                    .collect();
                linalg::norm(&diff) < 1e-7 * (1.0 + linalg::norm(&slow.v_star))
            }
            (QPStatus::Infeasible, QPStatus::Infeasible) => true,
            _ => false,
        };
        if !ok {
            mismatches += 1;
            if first.is_empty() {
                first = format!(
                    "instance {i}: {:?}/{:?} v {:?} vs {:?}",
                    fast.status, slow.status, fast.v_star, slow.v_star
                );
            }
        }
    }
    (mismatches, first)
}

fn rk4_order_ratio() -> f64 {
    // scalar decay, error should shrink ~16x when dt halves
    let rhs = ClosedLoopField::new(|z: &AugmentedState, _| Ok((vec![-z.x[0]], vec![])));
    let err = |dt: f64| {
        let mut z = AugmentedState::new(vec![1.0], vec![]);
        let steps = (1.0 / dt).round() as usize;
        let mut t = 0.0;
        for _ in 0..steps {
            z = rk4_step(&rhs, &z, t, dt).unwrap();
            t += dt;
        }
        (z.x[0] - (-1.0f64).exp()).abs()
    };
    err(0.02) / err(0.01)
}

/// Run every check with a deterministic seed and collect the report.
pub fn run_selfcheck(seed: u64) -> SelfcheckReport {
    let mut report = SelfcheckReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (mismatches, first) = solver_oracle_agreement(&mut rng, 500);
    report.push(
        "qp_solver_vs_oracle",
        mismatches == 0,
        if mismatches == 0 {
            "500 random instances agree".into()
        } else {
            format!("{mismatches}/500 mismatches; first: {first}")
        },
    );

    let ratio = rk4_order_ratio();
    report.push(
        "rk4_fourth_order",
        (14.0..=18.0).contains(&ratio),
        format!("halving ratio {ratio:.2}"),
    );

    let ck = validate_class_k(&ClassK::Linear(1.0), (-5.0, 5.0), 101);
    report.push("class_k_linear", ck.passed(), format!("{ck:?}"));

    let params = AccParams::default();
    let exact = acc_predictor(&params, PredictorMode::ExactLinear);
    let numeric = acc_predictor(&params, PredictorMode::Numeric);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = vec![0.0, rng.gen_range(0.0..30.0), rng.gen_range(10.0..150.0)];
        let u = vec![rng.gen_range(-4000.0..4000.0)];
        let a = exact.predict(&x, &u)[0];
        let b = numeric.predict(&x, &u)[0];
        worst = worst.max((a - b).abs());
    }
    report.push(
        "predictor_closed_form_vs_numeric",
        worst < 1e-6,
        format!("max deviation {worst:.3e}"),
    );

    match build_acc_scenario(params, PredictorMode::ExactLinear, InfeasibilityPolicy::Halt, None) {
        Ok(scenario) => {
            let dt = 1e-3;
            let (rhs, probes) = scenario.closed_loop(ControllerVariant::Combined);
            match simulate(&rhs, &scenario.z0, 5.0, dt, &probes) {
                Ok(traj) => {
                    let hx = traj.channel_min("h_x").unwrap();
                    let hu = traj.channel_min("h_u").unwrap();
                    let tol = -10.0 * dt;
                    report.push(
                        "acc_combined_invariance",
                        hx >= tol && hu >= tol,
                        format!("min h_x {hx:.4}, min h_u {hu:.4}"),
                    );
                }
                Err(e) => report.push("acc_combined_invariance", false, format!("{e}")),
            }
        }
        Err(e) => report.push("acc_combined_invariance", false, e),
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selfcheck_passes_on_default_seed() {
        let report = run_selfcheck(0);
        for r in &report.results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn selfcheck_deterministic() {
        let a = run_selfcheck(7);
        let b = run_selfcheck(7);
        assert_eq!(a.results.len(), b.results.len());
        for (x, y) in a.results.iter().zip(&b.results) {
            assert_eq!(x.passed, y.passed);
            assert_eq!(x.detail, y.detail);
        }
    }
}
