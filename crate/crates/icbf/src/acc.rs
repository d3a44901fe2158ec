//! Adaptive cruise control benchmark: a vehicle tracking a desired
//! speed behind a slower lead vehicle, subject to a following-distance
//! constraint ("half the speedometer rule") and a wheel-force bound.
//!
//! State: `x1` position (m), `x2` speed (m/s), `x3` gap to the lead
//! vehicle (m). Input: wheel force (N).

use crate::barrier::{extend_state_barrier, input_bound_barrier, BarrierFunction, StateBarrier};
use crate::controllers::{
    combined_filter, icbf_filter, state_cbf_controller, CombinedFilter, DynamicController,
    IcbfFilter, InfeasibilityPolicy, Predictor, StateCbfController,
};
use crate::integrator::{predict_constant_input, ClosedLoopField, Probe};
use crate::linalg;
use crate::types::{AffinePlantDynamics, AugmentedState, ClassK, PlantDynamics, ReferenceSignal};

/// Scenario parameters. The numeric defaults are stand-ins tuned for
/// qualitatively sensible behavior; every one is overridable through the
/// CLI config.
#[derive(Clone, Debug)]
pub struct AccParams {
    /// Vehicle mass (kg).
    pub mass: f64,
    /// Rolling resistance constant term (N).
    pub c0: f64,
    /// Rolling resistance linear coefficient (N s/m).
    pub c1: f64,
    /// Rolling resistance quadratic coefficient (N s^2/m^2).
    pub c2: f64,
    /// Lead-vehicle speed (m/s).
    pub v0: f64,
    /// Desired speed (m/s).
    pub vd: f64,
    /// Gravity (m/s^2).
    pub gravity: f64,
    /// Acceleration/deceleration fraction of g (dimensionless).
    pub c_ad: f64,
    /// Prediction horizon (s).
    pub horizon: f64,
    /// Tracking gain (1/s).
    pub alpha: f64,
    /// Barrier rate (1/s).
    pub gamma: f64,
    /// Gain of the nominal force-balance speed tracker used by the
    /// state-only controller (1/s).
    pub nominal_gain: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            mass: 1650.0,
            c0: 0.1,
            c1: 5.0,
            c2: 0.25,
            v0: 14.0,
            vd: 24.0,
            gravity: 9.81,
            c_ad: 0.3,
            horizon: 1.0,
            alpha: 10.0,
            gamma: 1.0,
            nominal_gain: 0.5,
        }
    }
}

impl AccParams {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = [
            ("m", self.mass),
            ("c1", self.c1),
            ("T", self.horizon),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("g", self.gravity),
            ("alpha_k", self.nominal_gain),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("{name} must be > 0 (got {v})"));
            }
        }
        for (name, v) in [("c0", self.c0), ("c2", self.c2)] {
            if !(v >= 0.0) {
                return Err(format!("{name} must be >= 0 (got {v})"));
            }
        }
        if !(self.c_ad > 0.0 && self.c_ad <= 1.0) {
            return Err(format!("c_ad must be in (0, 1] (got {})", self.c_ad));
        }
        Ok(())
    }

    /// Rolling resistance `F_r(v) = c0 + c1 v + c2 v^2`.
    pub fn rolling_resistance(&self, speed: f64) -> f64 {
        self.c0 + self.c1 * speed + self.c2 * speed * speed
    }

    /// Wheel-force bound `m c_ad g` (N).
    pub fn u_max(&self) -> f64 {
        self.mass * self.c_ad * self.gravity
    }
}

/// `ẋ = (x2, -F_r/m, v0 - x2) + (0, 1/m, 0) u`.
pub fn acc_dynamics(params: &AccParams) -> AffinePlantDynamics {
    let p = params.clone();
    let inv_m = 1.0 / params.mass;
    AffinePlantDynamics::new(
        3,
        1,
        move |x| vec![x[1], -p.rolling_resistance(x[1]) / p.mass, p.v0 - x[1]],
        move |_| vec![vec![0.0], vec![inv_m], vec![0.0]],
    )
}

/// Which closed-form (or numeric) speed predictor to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorMode {
    /// The transcribed closed-form expression as printed; kept for
    /// comparison runs. Fails the zero-horizon consistency check
    /// (returns `x2` instead of `x2 - vd` as `T -> 0`).
    Paper,
    /// Independently derived solution of the linearized (`c2 = 0`)
    /// speed equation. The default.
    ExactLinear,
    /// RK4 forward integration of the `c2 = 0` plant; the slow oracle
    /// for the closed forms.
    Numeric,
}

/// Output `y = x2 - vd` predicted a horizon ahead at frozen input.
pub fn acc_predictor(params: &AccParams, mode: PredictorMode) -> Predictor {
    let p = params.clone();
    let decay = (-params.c1 * params.horizon / params.mass).exp();
    let jac = move |_x: &[f64], _u: &[f64]| vec![vec![(1.0 - decay) / p.c1]];

    match mode {
        PredictorMode::ExactLinear => {
            let p = params.clone();
            Predictor::new(1, move |x, u| {
                vec![decay * x[1] + (1.0 - decay) * (u[0] - p.c0) / p.c1 - p.vd]
            })
            .with_jacobian(jac)
        }
        PredictorMode::Paper => {
            let p = params.clone();
            Predictor::new(1, move |x, u| {
                let shift = (p.c0 - u[0] + p.mass * p.vd) / p.c1;
                vec![-(shift - decay * (x[1] + shift))]
            })
            .with_jacobian(jac)
        }
        PredictorMode::Numeric => {
            let linear = AccParams { c2: 0.0, ..params.clone() };
            let plant = acc_dynamics(&linear).to_plant();
            let horizon = params.horizon;
            let dt_pred = horizon / 100.0;
            let vd = params.vd;
            Predictor::new(1, move |x, u| {
                let xh = predict_constant_input(&plant, x, u, horizon, dt_pred)
                    .expect("prediction diverged");
                vec![xh[1] - vd]
            })
        }
    }
}

/// The dynamically defined tracking law
/// `u̇ = alpha c1 (e^{-c1 T / m} - 1)^{-1} ŷ(t+T)`.
pub fn acc_phi(params: &AccParams, pred: &Predictor) -> DynamicController {
    let decay = (-params.c1 * params.horizon / params.mass).exp();
    let coeff = params.alpha * params.c1 / (decay - 1.0);
    let pred = pred.clone();
    DynamicController::new(1, move |x, u, _t| Ok(vec![coeff * pred.predict(x, u)[0]]))
}

/// The half-speedometer state barrier `h_x = x3 - 1.8 x2` and the
/// squared wheel-force bound `(m c_ad g)^2`.
pub fn acc_barriers(params: &AccParams) -> (StateBarrier, f64) {
    let sb = StateBarrier::new(ClassK::Linear(params.gamma), |x| x[2] - 1.8 * x[1])
        .with_grad(|_| vec![0.0, -1.8, 1.0]);
    let u_max = params.u_max();
    (sb, u_max * u_max)
}

/// Force-balance speed tracker `k(x) = F_r(x) + m alpha_k (vd - x2)`:
/// the nominal law the state-only controller filters.
pub fn acc_nominal_k(params: &AccParams) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static {
    let p = params.clone();
    move |x: &[f64]| vec![p.rolling_resistance(x[1]) + p.mass * p.nominal_gain * (p.vd - x[1])]
}

/// The four closed loops compared in the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerVariant {
    Unfiltered,
    InputOnly,
    StateOnly,
    Combined,
}

impl ControllerVariant {
    pub const ALL: [ControllerVariant; 4] = [
        ControllerVariant::Unfiltered,
        ControllerVariant::InputOnly,
        ControllerVariant::StateOnly,
        ControllerVariant::Combined,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ControllerVariant::Unfiltered => "unfiltered",
            ControllerVariant::InputOnly => "input_only",
            ControllerVariant::StateOnly => "state_only",
            ControllerVariant::Combined => "combined",
        }
    }
}

/// Fully assembled scenario: plant, barriers, tracking law and the
/// closed loop of every controller variant.
pub struct AccScenario {
    pub params: AccParams,
    pub affine: AffinePlantDynamics,
    pub plant: PlantDynamics,
    pub z0: AugmentedState,
    pub sb: StateBarrier,
    pub u_max_sq: f64,
    pub h_e: BarrierFunction,
    pub h_u: BarrierFunction,
    pub phi: DynamicController,
    pub policy: InfeasibilityPolicy,
}

/// Reference for the tracking metric: the output `x2 - vd` is driven
/// to zero.
pub fn acc_reference() -> ReferenceSignal {
    ReferenceSignal::zero(1)
}

pub fn acc_output_map(x: &[f64]) -> Vec<f64> {
    vec![x[1]]
}

/// Assemble the scenario. `z0` defaults to position 0, speed 20 m/s,
/// gap 100 m, zero force: inside every safe set, with the tracking push
/// toward `vd` activating the distance constraint within the horizon.
pub fn build_acc_scenario(
    params: AccParams,
    mode: PredictorMode,
    policy: InfeasibilityPolicy,
    z0: Option<AugmentedState>,
) -> std::result::Result<AccScenario, String> {
    params.validate()?;
    let affine = acc_dynamics(&params);
    let plant = affine.to_plant();
    let (sb, u_max_sq) = acc_barriers(&params);
    let h_e = extend_state_barrier(&sb, &affine, ClassK::Linear(params.gamma / 2.0));
    let h_u = input_bound_barrier(u_max_sq, ClassK::Linear(params.gamma));
    let pred = acc_predictor(&params, mode);
    let phi = acc_phi(&params, &pred);
    let z0 = z0.unwrap_or_else(|| AugmentedState::new(vec![0.0, 20.0, 100.0], vec![0.0]));
    if z0.x.len() != 3 || z0.u.len() != 1 {
        return Err("z0 must have 3 state and 1 input component".into());
    }
    Ok(AccScenario { params, affine, plant, z0, sb, u_max_sq, h_e, h_u, phi, policy })
}

impl AccScenario {
    pub fn input_filter(&self) -> IcbfFilter {
        icbf_filter(self.phi.clone(), self.h_u.clone(), self.plant.clone())
    }

    pub fn combined(&self) -> CombinedFilter {
        combined_filter(
            self.phi.clone(),
            self.sb.clone(),
            self.affine.clone(),
            self.u_max_sq,
            ClassK::Linear(self.params.gamma),
            ClassK::Linear(self.params.gamma / 2.0),
            self.policy,
        )
    }

    pub fn state_only(&self) -> StateCbfController {
        state_cbf_controller(
            acc_nominal_k(&self.params),
            self.sb.clone(),
            self.affine.clone(),
            self.phi.clone(),
        )
    }

    fn barrier_probes(&self, applied_input: bool) -> Vec<Probe> {
        let sb = self.sb.clone();
        let h_e = self.h_e.clone();
        let h_u = self.h_u.clone();
        let ctrl = if applied_input { Some(self.state_only()) } else { None };
        let ctrl2 = ctrl.clone();
        let input_of = move |z: &AugmentedState| -> Vec<f64> {
            match &ctrl {
                Some(c) => c.applied_input(&z.x, &z.u).unwrap_or(vec![f64::NAN]),
                None => z.u.clone(),
            }
        };
        let input_of2 = move |z: &AugmentedState| -> Vec<f64> {
            match &ctrl2 {
                Some(c) => c.applied_input(&z.x, &z.u).unwrap_or(vec![f64::NAN]),
                None => z.u.clone(),
            }
        };
        let h_u_probe = {
            let input_of = input_of.clone();
            Probe::new("h_u", move |z: &AugmentedState, _| h_u.eval(&z.x, &input_of(z)))
        };
        vec![
            Probe::new("h_x", move |z: &AugmentedState, _| sb.eval(&z.x)),
            h_u_probe,
            Probe::new("h_e", move |z: &AugmentedState, _| h_e.eval(&z.x, &z.u)),
            Probe::new("u_norm", move |z: &AugmentedState, _| linalg::norm(&input_of2(z))),
        ]
    }

    /// Closed loop and the trajectory channels for one variant. The
    /// channel set varies: constraint diagnostics exist only where the
    /// corresponding filter runs.
    pub fn closed_loop(&self, variant: ControllerVariant) -> (ClosedLoopField, Vec<Probe>) {
        match variant {
            ControllerVariant::Unfiltered => {
                let plant = self.plant.clone();
                let phi = self.phi.clone();
                let rhs = ClosedLoopField::new(move |z: &AugmentedState, t| {
                    Ok((plant.eval(&z.x, &z.u), phi.eval(&z.x, &z.u, t)?))
                });
                (rhs, self.barrier_probes(false))
            }
            ControllerVariant::InputOnly => {
                let filter = self.input_filter();
                let mut probes = self.barrier_probes(false);
                let f1 = filter.clone();
                probes.push(Probe::new("d_u", move |z: &AugmentedState, t| {
                    f1.diagnostics(&z.x, &z.u, t).map(|d| d.d_values[0]).unwrap_or(f64::NAN)
                }));
                let f2 = filter.clone();
                probes.push(Probe::new("v_norm", move |z: &AugmentedState, t| {
                    f2.diagnostics(&z.x, &z.u, t)
                        .map(|d| linalg::norm(&d.v_star))
                        .unwrap_or(f64::NAN)
                }));
                let f3 = filter.clone();
                probes.push(Probe::new("active_u", move |z: &AugmentedState, t| {
                    f3.diagnostics(&z.x, &z.u, t)
                        .map(|d| if d.active[0] { 1.0 } else { 0.0 })
                        .unwrap_or(f64::NAN)
                }));
                (filter.closed_loop(), probes)
            }
            ControllerVariant::StateOnly => {
                let ctrl = self.state_only();
                let mut probes = self.barrier_probes(true);
                let c1 = ctrl.clone();
                probes.push(Probe::new("v_norm", move |z: &AugmentedState, _| {
                    // deviation of the applied input from the nominal law
                    match c1.applied_input(&z.x, &z.u) {
                        Ok(applied) => {
                            let nom = c1.nominal(&z.x);
                            let diff: Vec<f64> =
                                applied.iter().zip(&nom).map(|(a, b)| a - b).collect();
                            linalg::norm(&diff)
                        }
                        Err(_) => f64::NAN,
                    }
                }));
                let c2 = ctrl.clone();
                probes.push(Probe::new("active_x", move |z: &AugmentedState, _| {
                    // nominal infeasible => the state constraint clipped it
                    match crate::barrier::state_barrier_data(&c2.sb, &c2.affine, &z.x) {
                        Ok((p_x, d_x)) => {
                            let slack = linalg::dot(&p_x, &c2.nominal(&z.x)) - d_x;
                            if slack < 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Err(_) => f64::NAN,
                    }
                }));
                (ctrl.closed_loop(), probes)
            }
            ControllerVariant::Combined => {
                let filter = self.combined();
                let mut probes = self.barrier_probes(false);
                for (idx, name) in [(0usize, "d_e"), (1usize, "d_u")] {
                    let f = filter.clone();
                    probes.push(Probe::new(name, move |z: &AugmentedState, t| {
                        f.diagnostics(&z.x, &z.u, t).map(|d| d.d_values[idx]).unwrap_or(f64::NAN)
                    }));
                }
                let f = filter.clone();
                probes.push(Probe::new("v_norm", move |z: &AugmentedState, t| {
                    f.diagnostics(&z.x, &z.u, t)
                        .map(|d| linalg::norm(&d.v_star))
                        .unwrap_or(f64::NAN)
                }));
                for (idx, name) in [(0usize, "active_x"), (1usize, "active_u")] {
                    let f = filter.clone();
                    probes.push(Probe::new(name, move |z: &AugmentedState, t| {
                        f.diagnostics(&z.x, &z.u, t)
                            .map(|d| if d.active[idx] { 1.0 } else { 0.0 })
                            .unwrap_or(f64::NAN)
                    }));
                }
                let f = filter.clone();
                probes.push(Probe::new("feasible", move |z: &AugmentedState, t| {
                    f.diagnostics(&z.x, &z.u, t)
                        .map(|d| if d.feasible { 1.0 } else { 0.0 })
                        .unwrap_or(f64::NAN)
                }));
                (filter.closed_loop(), probes)
            }
        }
    }
}

/// Warnings for a combined run whose start violates the invariance
/// hypothesis.
pub fn initial_condition_warnings(scenario: &AccScenario) -> Vec<String> {
    scenario.combined().check_initial(&scenario.z0)
}
