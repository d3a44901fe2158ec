//! Shared mathematical vocabulary: plants, augmented states, class-K
//! rate functions and reference signals.

use std::sync::Arc;

/// A field `(x, u) -> R^n`.
pub type StateInputField = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
/// A field `x -> R^n`.
pub type StateField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// A field `x -> R^{n x m}`, rows indexed by state component.
pub type StateMatrixField = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// General nonlinear plant `ẋ = f(x, u)` with state dimension `n` and
/// input dimension `m`. The field must be pure.
#[derive(Clone)]
pub struct PlantDynamics {
    pub n: usize,
    pub m: usize,
    f: StateInputField,
}

impl PlantDynamics {
    pub fn new(
        n: usize,
        m: usize,
        f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { n, m, f: Arc::new(f) }
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(u.len(), self.m);
        let out = (self.f)(x, u);
        assert_eq!(out.len(), self.n, "plant field returned wrong dimension");
        out
    }
}

/// Control-affine plant `ẋ = f0(x) + f1(x) u`.
#[derive(Clone)]
pub struct AffinePlantDynamics {
    pub n: usize,
    pub m: usize,
    f0: StateField,
    f1: StateMatrixField,
}

impl AffinePlantDynamics {
    pub fn new(
        n: usize,
        m: usize,
        f0: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        f1: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self { n, m, f0: Arc::new(f0), f1: Arc::new(f1) }
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let out = (self.f0)(x);
        assert_eq!(out.len(), self.n);
        out
    }

    /// The `n x m` input matrix at `x`.
    pub fn input_matrix(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mat = (self.f1)(x);
        assert_eq!(mat.len(), self.n);
        for row in &mat {
            assert_eq!(row.len(), self.m);
        }
        mat
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = self.drift(x);
        let mat = self.input_matrix(x);
        for (i, row) in mat.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                out[i] += b * u[j];
            }
        }
        out
    }

    /// Assemble the equivalent general plant.
    pub fn to_plant(&self) -> PlantDynamics {
        let this = self.clone();
        PlantDynamics::new(self.n, self.m, move |x, u| this.eval(x, u))
    }
}

/// The augmented state `z = (x, u)`: the control value is part of the
/// integrated state.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl AugmentedState {
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> Self {
        Self { x, u }
    }

    pub fn dim(&self) -> usize {
        self.x.len() + self.u.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.u.iter()).all(|v| v.is_finite())
    }

    /// Index of the first non-finite component, counting x then u.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.x
            .iter()
            .chain(self.u.iter())
            .position(|v| !v.is_finite())
    }
}

/// Extended class-K rate function: continuous, strictly increasing,
/// zero at zero.
#[derive(Clone)]
pub enum ClassK {
    /// `r -> slope * r`
    Linear(f64),
    /// `r -> coeff * r^3`
    Cubic(f64),
    /// Opaque user-supplied function; validated by sampling only.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ClassK {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ClassK::Custom(Arc::new(f))
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            ClassK::Linear(c) => c * r,
            ClassK::Cubic(c) => c * r * r * r,
            ClassK::Custom(f) => f(r),
        }
    }
}

/// Outcome of sampling-based class-K validation.
#[derive(Debug, Clone, Default)]
pub struct ClassKReport {
    /// `Some(gamma(0))` when `|gamma(0)| > 1e-12`.
    pub zero_offset: Option<f64>,
    /// Sample pairs `(r_k, r_{k+1})` where monotonicity fails.
    pub monotonicity_violations: Vec<(f64, f64)>,
}

impl ClassKReport {
    pub fn passed(&self) -> bool {
        self.zero_offset.is_none() && self.monotonicity_violations.is_empty()
    }
}

/// Check `gamma(0) = 0` and strict monotonicity on a uniform grid over
/// `range`. Violations are reported, never thrown.
pub fn validate_class_k(gamma: &ClassK, range: (f64, f64), samples: usize) -> ClassKReport {
    assert!(samples >= 2, "need at least 2 samples");
    let (lo, hi) = range;
    assert!(lo <= 0.0 && hi >= 0.0, "range must contain 0");

    let mut report = ClassKReport::default();
    let g0 = gamma.eval(0.0);
    if g0.abs() > 1e-12 {
        report.zero_offset = Some(g0);
    }
    let step = (hi - lo) / (samples - 1) as f64;
    let mut prev_r = lo;
    let mut prev_v = gamma.eval(lo);
    for k in 1..samples {
        let r = lo + step * k as f64;
        let v = gamma.eval(r);
        if v <= prev_v {
            report.monotonicity_violations.push((prev_r, r));
        }
        prev_r = r;
        prev_v = v;
    }
    report
}

/// Time-varying reference `r(t)` with optional analytic derivative.
/// When `r_dot` is absent a central finite difference (step 1e-5) is used.
#[derive(Clone)]
pub struct ReferenceSignal {
    pub m: usize,
    r: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    r_dot: Option<Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>>,
}

impl ReferenceSignal {
    pub fn new(m: usize, r: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { m, r: Arc::new(r), r_dot: None }
    }

    pub fn with_derivative(
        mut self,
        r_dot: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.r_dot = Some(Arc::new(r_dot));
        self
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let m = value.len();
        let v = value.clone();
        Self {
            m,
            r: Arc::new(move |_| v.clone()),
            r_dot: Some(Arc::new(move |_| vec![0.0; m])),
        }
    }

    pub fn zero(m: usize) -> Self {
        Self::constant(vec![0.0; m])
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let out = (self.r)(t);
        assert_eq!(out.len(), self.m);
        out
    }

    pub fn eval_dot(&self, t: f64) -> Vec<f64> {
        if let Some(rd) = &self.r_dot {
            let out = rd(t);
            assert_eq!(out.len(), self.m);
            return out;
        }
        let h = 1e-5;
        let plus = (self.r)(t + h);
        let minus = (self.r)(t - h);
        plus.iter()
            .zip(minus.iter())
            .map(|(p, q)| (p - q) / (2.0 * h))
            .collect()
    }
}
