//! Dynamically defined controllers and safety filters: Newton-flow
//! tracking, the feedforward integral tracker, the I-CBF min-norm filter,
//! the input-bound and state-constraint specializations, and the combined
//! state + input filter.

use std::sync::Arc;

use crate::barrier::{
    compute_d, compute_p, extend_state_barrier, input_bound_barrier, state_barrier_data,
    BarrierFunction, StateBarrier,
};
use crate::integrator::{ClosedLoopField, Trajectory};
use crate::linalg;
use crate::minnorm::{minnorm_multi, minnorm_offset, minnorm_single, HalfspaceProblem, QPStatus};
use crate::types::{AffinePlantDynamics, AugmentedState, ClassK, PlantDynamics, ReferenceSignal};
use crate::{Error, Result};

const JAC_FD_STEP: f64 = 1e-5;
const COND_LIMIT: f64 = 1e12;

/// A field `phi(x, u, t) -> u̇`. Evaluation can fail (singular Jacobian,
/// infeasible safety QP).
#[derive(Clone)]
pub struct DynamicController {
    pub m: usize,
    phi: Arc<dyn Fn(&[f64], &[f64], f64) -> Result<Vec<f64>> + Send + Sync>,
}

impl DynamicController {
    pub fn new(
        m: usize,
        phi: impl Fn(&[f64], &[f64], f64) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self { m, phi: Arc::new(phi) }
    }

    /// `phi = 0`: pure integral control, `u` moves only through `v*`.
    pub fn zero(m: usize) -> Self {
        Self::new(m, move |_, _, _| Ok(vec![0.0; m]))
    }

    pub fn eval(&self, x: &[f64], u: &[f64], t: f64) -> Result<Vec<f64>> {
        let out = (self.phi)(x, u, t)?;
        assert_eq!(out.len(), self.m);
        Ok(out)
    }
}

/// Constant-input output predictor `ŷ(t+T) = g(x, u)` with optional
/// analytic input Jacobian. A missing Jacobian is replaced by central
/// finite differences (step 1e-5) per input channel.
#[derive(Clone)]
pub struct Predictor {
    pub m: usize,
    g: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
    jac_u: Option<Arc<dyn Fn(&[f64], &[f64]) -> Vec<Vec<f64>> + Send + Sync>>,
}

impl Predictor {
    pub fn new(m: usize, g: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { m, g: Arc::new(g), jac_u: None }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[f64], &[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.jac_u = Some(Arc::new(jac));
        self
    }

    pub fn predict(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let out = (self.g)(x, u);
        assert_eq!(out.len(), self.m);
        out
    }

    pub fn jacobian_u(&self, x: &[f64], u: &[f64]) -> Vec<Vec<f64>> {
        if let Some(j) = &self.jac_u {
            return j(x, u);
        }
        let m = self.m;
        let mut cols = Vec::with_capacity(m);
        let mut up = u.to_vec();
        for k in 0..u.len() {
            up[k] = u[k] + JAC_FD_STEP;
            let plus = (self.g)(x, &up);
            up[k] = u[k] - JAC_FD_STEP;
            let minus = (self.g)(x, &up);
            up[k] = u[k];
            cols.push(
                plus.iter().zip(&minus).map(|(p, q)| (p - q) / (2.0 * JAC_FD_STEP)).collect::<Vec<f64>>(),
            );
        }
        // transpose column list into row-major m x m
        (0..m).map(|i| (0..u.len()).map(|j| cols[j][i]).collect()).collect()
    }
}

fn solve_with_cond(jac: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let cond = linalg::cond_inf(jac);
    if !cond.is_finite() || cond >= COND_LIMIT {
        return Err(Error::SingularJacobian { cond });
    }
    linalg::solve(jac, rhs, 1e-300).ok_or(Error::SingularJacobian { cond })
}

/// Newton-Raphson flow for a memoryless plant `y = g(u)`:
/// `u̇ = (dg/du)^-1 (r(t) - g(u))`.
pub fn memoryless_nr(
    g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    jac: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    r: ReferenceSignal,
) -> DynamicController {
    let m = r.m;
    DynamicController::new(m, move |_x, u, t| {
        let y = g(u);
        let residual: Vec<f64> = r.eval(t).iter().zip(&y).map(|(ri, yi)| ri - yi).collect();
        solve_with_cond(&jac(u), &residual)
    })
}

/// Newton-Raphson flow on the predicted output:
/// `u̇ = alpha (dg/du)^-1 (r(t) - ŷ(t+T))`.
pub fn nr_flow_controller(pred: Predictor, r: ReferenceSignal, alpha: f64) -> DynamicController {
    assert!(alpha > 0.0);
    let m = pred.m;
    DynamicController::new(m, move |x, u, t| {
        let y_hat = pred.predict(x, u);
        let residual: Vec<f64> = r.eval(t).iter().zip(&y_hat).map(|(ri, yi)| ri - yi).collect();
        let step = solve_with_cond(&pred.jacobian_u(x, u), &residual)?;
        Ok(step.into_iter().map(|s| alpha * s).collect())
    })
}

/// Feedforward integral tracker for a nominal static law `u = k(x)`:
/// `phi = dk/dx . f(x, u) + (alpha/2)(k(x) - u)`, which drives
/// `||u - k(x)||` to zero at rate `alpha/2`.
pub fn feedforward_controller(
    k: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    grad_k: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    plant: PlantDynamics,
    alpha: f64,
) -> DynamicController {
    assert!(alpha > 0.0);
    DynamicController::new(plant.m, move |x, u, _t| {
        let f = plant.eval(x, u);
        let feed = linalg::matvec(&grad_k(x), &f);
        let kx = k(x);
        Ok(feed
            .iter()
            .zip(kx.iter().zip(u))
            .map(|(ff, (ki, ui))| ff + alpha / 2.0 * (ki - ui))
            .collect())
    })
}

/// Per-step record of what the safety filter did.
#[derive(Clone, Debug)]
pub struct FilterDiagnostics {
    pub v_star: Vec<f64>,
    pub d_values: Vec<f64>,
    pub feasible: bool,
    pub active: Vec<bool>,
}

/// The min-norm I-CBF filter: `u̇ = phi + v*` with
/// `v* = minnorm_single(p, d)` from one barrier.
#[derive(Clone)]
pub struct IcbfFilter {
    pub phi: DynamicController,
    pub barrier: BarrierFunction,
    pub plant: PlantDynamics,
}

impl IcbfFilter {
    pub fn correction(&self, x: &[f64], u: &[f64], t: f64) -> Result<Vec<f64>> {
        let p = compute_p(&self.barrier, x, u)?;
        let d = compute_d(&self.barrier, &self.plant, &self.phi, x, u, t)?;
        minnorm_single(&p, d)
    }

    pub fn u_dot(&self, x: &[f64], u: &[f64], t: f64) -> Result<Vec<f64>> {
        let phi = self.phi.eval(x, u, t)?;
        let v = self.correction(x, u, t)?;
        Ok(phi.iter().zip(&v).map(|(a, b)| a + b).collect())
    }

    pub fn diagnostics(&self, x: &[f64], u: &[f64], t: f64) -> Result<FilterDiagnostics> {
        let p = compute_p(&self.barrier, x, u)?;
        let d = compute_d(&self.barrier, &self.plant, &self.phi, x, u, t)?;
        let v = minnorm_single(&p, d)?;
        Ok(FilterDiagnostics {
            active: vec![d > 0.0],
            d_values: vec![d],
            feasible: true,
            v_star: v,
        })
    }

    pub fn controller(&self) -> DynamicController {
        let this = self.clone();
        DynamicController::new(self.phi.m, move |x, u, t| this.u_dot(x, u, t))
    }

    /// Closed loop `(ẋ, u̇) = (f(x,u), phi + v*)`.
    pub fn closed_loop(&self) -> ClosedLoopField {
        let this = self.clone();
        ClosedLoopField::new(move |z: &AugmentedState, t| {
            Ok((this.plant.eval(&z.x, &z.u), this.u_dot(&z.x, &z.u, t)?))
        })
    }
}

/// Wrap a dynamically defined controller with the min-norm filter for an
/// arbitrary I-CBF.
pub fn icbf_filter(phi: DynamicController, b: BarrierFunction, plant: PlantDynamics) -> IcbfFilter {
    IcbfFilter { phi, barrier: b, plant }
}

/// Input-bound specialization: the scalar ball barrier is always a valid
/// I-CBF, so this filter never raises relative-degree errors.
pub fn input_bound_filter(
    phi: DynamicController,
    u_max_sq: f64,
    gamma_u: ClassK,
    plant: PlantDynamics,
) -> IcbfFilter {
    icbf_filter(phi, input_bound_barrier(u_max_sq, gamma_u), plant)
}

/// State-CBF controller for affine plants with the `mu + u` input split:
/// the plant sees `mu* + u` where `u` integrates `phi` and `mu*` solves
/// the offset min-norm QP against a nominal law `k(x)`.
#[derive(Clone)]
pub struct StateCbfController {
    k_nominal: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    pub sb: StateBarrier,
    pub affine: AffinePlantDynamics,
    pub phi: DynamicController,
}

impl StateCbfController {
    pub fn mu_star(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let (p_x, d_x) = state_barrier_data(&self.sb, &self.affine, x)?;
        let d_shift = d_x - linalg::dot(&p_x, u);
        let bias: Vec<f64> = u.iter().zip((self.k_nominal)(x).iter()).map(|(ui, ki)| ui - ki).collect();
        minnorm_offset(&p_x, d_shift, &bias)
    }

    /// `mu* + u`: what the plant actually receives.
    pub fn applied_input(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mu = self.mu_star(x, u)?;
        Ok(mu.iter().zip(u).map(|(a, b)| a + b).collect())
    }

    pub fn nominal(&self, x: &[f64]) -> Vec<f64> {
        (self.k_nominal)(x)
    }

    /// Closed loop `ẋ = f0 + f1 (mu* + u)`, `u̇ = phi`.
    pub fn closed_loop(&self) -> ClosedLoopField {
        let this = self.clone();
        ClosedLoopField::new(move |z: &AugmentedState, t| {
            let applied = this.applied_input(&z.x, &z.u)?;
            Ok((this.affine.eval(&z.x, &applied), this.phi.eval(&z.x, &z.u, t)?))
        })
    }
}

pub fn state_cbf_controller(
    k_nominal: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    sb: StateBarrier,
    affine: AffinePlantDynamics,
    phi: DynamicController,
) -> StateCbfController {
    StateCbfController { k_nominal: Arc::new(k_nominal), sb, affine, phi }
}

/// What to do when the combined safety QP has no solution.
/// `Zero` keeps integrating with `v = 0`; it forfeits the safety
/// guarantee and exists only so a run can be inspected past the failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InfeasibilityPolicy {
    Halt,
    Zero,
}

/// Combined state + input filter: stacks the lifted state barrier `h_e`
/// and the input ball `h_u` into one min-norm QP per step.
#[derive(Clone)]
pub struct CombinedFilter {
    pub phi: DynamicController,
    pub sb: StateBarrier,
    pub affine: AffinePlantDynamics,
    pub h_e: BarrierFunction,
    pub h_u: BarrierFunction,
    pub plant: PlantDynamics,
    pub policy: InfeasibilityPolicy,
}

pub fn combined_filter(
    phi: DynamicController,
    sb: StateBarrier,
    affine: AffinePlantDynamics,
    u_max_sq: f64,
    gamma_u: ClassK,
    gamma_e: ClassK,
    policy: InfeasibilityPolicy,
) -> CombinedFilter {
    let h_e = extend_state_barrier(&sb, &affine, gamma_e);
    let h_u = input_bound_barrier(u_max_sq, gamma_u);
    let plant = affine.to_plant();
    CombinedFilter { phi, sb, affine, h_e, h_u, plant, policy }
}

impl CombinedFilter {
    pub fn diagnostics(&self, x: &[f64], u: &[f64], t: f64) -> Result<FilterDiagnostics> {
        let p_e = compute_p(&self.h_e, x, u)?;
        let d_e = compute_d(&self.h_e, &self.plant, &self.phi, x, u, t)?;
        let p_u = compute_p(&self.h_u, x, u)?;
        let d_u = compute_d(&self.h_u, &self.plant, &self.phi, x, u, t)?;
        let problem = HalfspaceProblem::new(vec![(p_e, d_e), (p_u, d_u)]);
        let sol = minnorm_multi(&problem);
        match sol.status {
            QPStatus::Optimal => Ok(FilterDiagnostics {
                v_star: sol.v_star,
                d_values: vec![d_e, d_u],
                feasible: true,
                active: vec![sol.active_set.contains(&0), sol.active_set.contains(&1)],
            }),
            QPStatus::Infeasible => Ok(FilterDiagnostics {
                v_star: vec![0.0; self.phi.m],
                d_values: vec![d_e, d_u],
                feasible: false,
                active: vec![false, false],
            }),
        }
    }

    pub fn u_dot(&self, x: &[f64], u: &[f64], t: f64) -> Result<Vec<f64>> {
        let diag = self.diagnostics(x, u, t)?;
        if !diag.feasible && self.policy == InfeasibilityPolicy::Halt {
            return Err(Error::Infeasible { time: t });
        }
        let phi = self.phi.eval(x, u, t)?;
        Ok(phi.iter().zip(&diag.v_star).map(|(a, b)| a + b).collect())
    }

    pub fn controller(&self) -> DynamicController {
        let this = self.clone();
        DynamicController::new(self.phi.m, move |x, u, t| this.u_dot(x, u, t))
    }

    pub fn closed_loop(&self) -> ClosedLoopField {
        let this = self.clone();
        ClosedLoopField::new(move |z: &AugmentedState, t| {
            Ok((this.plant.eval(&z.x, &z.u), this.u_dot(&z.x, &z.u, t)?))
        })
    }

    /// Check the initial-condition hypothesis `x0 in S_x`,
    /// `(x0, u0) in S_e ∩ S_u`. Returns human-readable warnings for each
    /// violated membership; the caller decides whether to proceed.
    pub fn check_initial(&self, z0: &AugmentedState) -> Vec<String> {
        let mut warnings = vec![];
        let hx = self.sb.eval(&z0.x);
        if hx < 0.0 {
            warnings.push(format!("initial state outside S_x: h_x = {hx}"));
        }
        let he = self.h_e.eval(&z0.x, &z0.u);
        if he < 0.0 {
            warnings.push(format!("initial state outside S_e: h_e = {he}"));
        }
        let hu = self.h_u.eval(&z0.x, &z0.u);
        if hu < 0.0 {
            warnings.push(format!("initial state outside S_u: h_u = {hu}"));
        }
        warnings
    }
}

/// Tail tracking metrics over the trailing `tail_fraction` of a run:
/// the sup of `||r(t) - y(t)||` and the sup of `||ṙ(t)||` (the
/// measurable surrogate for the gain-dependent error term).
pub fn tracking_error_metrics(
    traj: &Trajectory,
    r: &ReferenceSignal,
    output_map: impl Fn(&[f64]) -> Vec<f64>,
    tail_fraction: f64,
) -> (f64, f64) {
    assert!(tail_fraction > 0.0 && tail_fraction <= 1.0);
    let len = traj.len();
    let start = ((len as f64) * (1.0 - tail_fraction)).floor() as usize;
    let mut sup_err: f64 = 0.0;
    let mut sup_rdot: f64 = 0.0;
    for k in start.min(len.saturating_sub(1))..len {
        let t = traj.times[k];
        let y = output_map(&traj.states[k].x);
        let rv = r.eval(t);
        let err: Vec<f64> = rv.iter().zip(&y).map(|(a, b)| a - b).collect();
        sup_err = sup_err.max(linalg::norm(&err));
        sup_rdot = sup_rdot.max(linalg::norm(&r.eval_dot(t)));
    }
    (sup_err, sup_rdot)
}
