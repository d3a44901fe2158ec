//! Barrier calculus on the augmented state: the constraint gradient `p`
//! and drift scalar `d`, the I-CBF relative-degree check, the input-bound
//! barrier, affine state-barrier data, and the barrier extension that
//! lifts a relative-degree-1 state barrier to an I-CBF.

use std::sync::Arc;

use crate::controllers::DynamicController;
use crate::linalg;
use crate::types::{AffinePlantDynamics, ClassK, PlantDynamics};
use crate::{Error, Result};

const FD_STEP: f64 = 1e-6;

/// Scalar field `h(x, u)` whose 0-superlevel set is the safe set, with
/// gradient access and an associated class-K rate. Missing gradients
/// fall back to central finite differences (step 1e-6).
#[derive(Clone)]
pub struct BarrierFunction {
    h: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    grad_x: Option<Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>>,
    grad_u: Option<Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>>,
    pub gamma: ClassK,
}

impl BarrierFunction {
    pub fn new(gamma: ClassK, h: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { h: Arc::new(h), grad_x: None, grad_u: None, gamma }
    }

    pub fn with_grad_x(
        mut self,
        g: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad_x = Some(Arc::new(g));
        self
    }

    pub fn with_grad_u(
        mut self,
        g: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.grad_u = Some(Arc::new(g));
        self
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        (self.h)(x, u)
    }

    pub fn grad_x(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match &self.grad_x {
            Some(g) => g(x, u),
            None => central_diff(x.len(), |xi| (self.h)(xi, u), x),
        }
    }

    pub fn grad_u(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match &self.grad_u {
            Some(g) => g(x, u),
            None => central_diff(u.len(), |ui| (self.h)(x, ui), u),
        }
    }
}

/// State-only barrier `h_x(x)` with rate `gamma_x`, for control-affine
/// plants.
#[derive(Clone)]
pub struct StateBarrier {
    h: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    grad: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
    pub gamma: ClassK,
}

impl StateBarrier {
    pub fn new(gamma: ClassK, h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { h: Arc::new(h), grad: None, gamma }
    }

    pub fn with_grad(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.h)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => central_diff(x.len(), |xi| (self.h)(xi), x),
        }
    }
}

fn central_diff(dim: usize, f: impl Fn(&[f64]) -> f64, at: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; dim];
    let mut pt = at.to_vec();
    for i in 0..dim {
        pt[i] = at[i] + FD_STEP;
        let plus = f(&pt);
        pt[i] = at[i] - FD_STEP;
        let minus = f(&pt);
        pt[i] = at[i];
        grad[i] = (plus - minus) / (2.0 * FD_STEP);
    }
    grad
}

/// The constraint-gradient pair `(p, d)` evaluated at one point.
#[derive(Clone, Debug)]
pub struct PDData {
    pub p: Vec<f64>,
    pub d: f64,
}

impl PDData {
    pub fn at(
        b: &BarrierFunction,
        plant: &PlantDynamics,
        phi: &DynamicController,
        x: &[f64],
        u: &[f64],
        t: f64,
    ) -> Result<Self> {
        Ok(Self { p: compute_p(b, x, u)?, d: compute_d(b, plant, phi, x, u, t)? })
    }
}

/// `p(x, u)`: the transposed u-gradient of the barrier.
pub fn compute_p(b: &BarrierFunction, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let p = b.grad_u(x, u);
    if let Some(i) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { time: f64::NAN, component: i });
    }
    Ok(p)
}

/// `d(x, u, t) = -(dh/dx . f + dh/du . phi + gamma(h))`: the unfiltered
/// flow satisfies the barrier condition at this point iff `d <= 0`.
pub fn compute_d(
    b: &BarrierFunction,
    plant: &PlantDynamics,
    phi: &DynamicController,
    x: &[f64],
    u: &[f64],
    t: f64,
) -> Result<f64> {
    let gx = b.grad_x(x, u);
    let gu = b.grad_u(x, u);
    let f = plant.eval(x, u);
    let phi_val = phi.eval(x, u, t)?;
    let d = -(linalg::dot(&gx, &f) + linalg::dot(&gu, &phi_val) + b.gamma.eval(b.eval(x, u)));
    if !d.is_finite() {
        return Err(Error::NonFinite { time: t, component: 0 });
    }
    Ok(d)
}

/// One sampled failure of the I-CBF condition: `p` vanished while `d`
/// stayed positive.
#[derive(Clone, Debug)]
pub struct IcbfViolation {
    pub index: usize,
    pub p_norm: f64,
    pub d: f64,
}

#[derive(Clone, Debug, Default)]
pub struct IcbfReport {
    pub checked: usize,
    pub violations: Vec<IcbfViolation>,
}

impl IcbfReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Empirically check `p = 0  =>  d <= 0` over sample points; violations
/// are reported, not thrown.
pub fn check_icbf_condition(
    b: &BarrierFunction,
    plant: &PlantDynamics,
    phi: &DynamicController,
    sample_points: &[(Vec<f64>, Vec<f64>, f64)],
    tol: f64,
) -> Result<IcbfReport> {
    assert!(tol >= 0.0);
    let mut report = IcbfReport { checked: sample_points.len(), ..Default::default() };
    for (index, (x, u, t)) in sample_points.iter().enumerate() {
        let p = compute_p(b, x, u)?;
        let p_norm = linalg::norm(&p);
        if p_norm <= tol {
            let d = compute_d(b, plant, phi, x, u, *t)?;
            if d > tol {
                report.violations.push(IcbfViolation { index, p_norm, d });
            }
        }
    }
    Ok(report)
}

/// The scalar input-bound barrier `h_u(u) = u_max_sq - u'u` where
/// `u_max_sq` bounds the squared input norm. Always an I-CBF: `p = -2u`
/// vanishes only at the origin, which lies in the interior.
pub fn input_bound_barrier(u_max_sq: f64, gamma_u: ClassK) -> BarrierFunction {
    assert!(u_max_sq > 0.0);
    BarrierFunction::new(gamma_u, move |_x, u| u_max_sq - linalg::dot(u, u))
        .with_grad_x(|x, _u| vec![0.0; x.len()])
        .with_grad_u(|_x, u| u.iter().map(|ui| -2.0 * ui).collect())
}

/// The affine-plant barrier data `p_x = (dh_x/dx . f1)'` and
/// `d_x = -(dh_x/dx . f0 + gamma_x(h_x))`.
pub fn state_barrier_data(
    sb: &StateBarrier,
    affine: &AffinePlantDynamics,
    x: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let grad = sb.grad(x);
    let f1 = affine.input_matrix(x);
    let mut p_x = vec![0.0; affine.m];
    for (gi, row) in grad.iter().zip(&f1) {
        for (pj, bij) in p_x.iter_mut().zip(row) {
            *pj += gi * bij;
        }
    }
    let d_x = -(linalg::dot(&grad, &affine.drift(x)) + sb.gamma.eval(sb.eval(x)));
    if !d_x.is_finite() || p_x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { time: f64::NAN, component: 0 });
    }
    Ok((p_x, d_x))
}

/// Lift a relative-degree-1 state barrier to the augmented state:
/// `h_e(x, u) = p_x(x)'u - d_x(x)`, i.e. the barrier condition of `h_x`
/// itself. Its u-gradient is `p_x` analytically; its x-gradient falls
/// back to finite differences of `h_e` (the data needs second
/// derivatives of `h_x` that callers rarely have) unless overridden via
/// `with_grad_x` on the result.
///
/// `gamma_e`: rate for the lifted barrier. The customary choice for a
/// linear `gamma_x` with slope `c` is slope `c/2`.
pub fn extend_state_barrier(
    sb: &StateBarrier,
    affine: &AffinePlantDynamics,
    gamma_e: ClassK,
) -> BarrierFunction {
    let sb_h = sb.clone();
    let affine_h = affine.clone();
    let sb_g = sb.clone();
    let affine_g = affine.clone();
    BarrierFunction::new(gamma_e, move |x, u| {
        let (p_x, d_x) = state_barrier_data(&sb_h, &affine_h, x).expect("barrier data non-finite");
        linalg::dot(&p_x, u) - d_x
    })
    .with_grad_u(move |x, _u| {
        state_barrier_data(&sb_g, &affine_g, x).expect("barrier data non-finite").0
    })
}
