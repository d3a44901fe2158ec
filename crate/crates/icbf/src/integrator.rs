//! Fixed-step RK4 integration of the closed-loop augmented system with
//! trajectory recording, plus the constant-input forward prediction used
//! by the tracking controller.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::types::{AugmentedState, PlantDynamics};
use crate::{Error, Result};

/// Right-hand side of the closed loop: `(ẋ, u̇) = rhs(z, t)`.
/// Evaluations may fail (singular Jacobian, infeasible QP); failures
/// abort the integration step.
#[derive(Clone)]
pub struct ClosedLoopField {
    rhs: Arc<dyn Fn(&AugmentedState, f64) -> Result<(Vec<f64>, Vec<f64>)> + Send + Sync>,
}

impl ClosedLoopField {
    pub fn new(
        rhs: impl Fn(&AugmentedState, f64) -> Result<(Vec<f64>, Vec<f64>)> + Send + Sync + 'static,
    ) -> Self {
        Self { rhs: Arc::new(rhs) }
    }

    pub fn eval(&self, z: &AugmentedState, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (xd, ud) = (self.rhs)(z, t)?;
        assert_eq!(xd.len(), z.x.len());
        assert_eq!(ud.len(), z.u.len());
        Ok((xd, ud))
    }
}

/// A named scalar channel evaluated at every stored step. Probes are
/// pure in `(z, t)`; a probe that cannot be evaluated yields NaN rather
/// than aborting the run.
#[derive(Clone)]
pub struct Probe {
    pub name: String,
    f: Arc<dyn Fn(&AugmentedState, f64) -> f64 + Send + Sync>,
}

impl Probe {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&AugmentedState, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, z: &AugmentedState, t: f64) -> f64 {
        (self.f)(z, t)
    }
}

/// Time-indexed record of a run: uniformly spaced samples of the
/// augmented state plus named auxiliary channels.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<AugmentedState>,
    pub aux: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.aux.get(name).map(|v| v.as_slice())
    }

    /// Minimum of a channel, ignoring NaN samples.
    pub fn channel_min(&self, name: &str) -> Option<f64> {
        self.channel(name)
            .map(|c| c.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min))
    }
}

fn check_finite(values: &[f64], offset: usize, t: f64) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { time: t, component: offset + i });
        }
    }
    Ok(())
}

fn axpy(z: &AugmentedState, cx: f64, kx: &[f64], ku: &[f64]) -> AugmentedState {
    AugmentedState {
        x: z.x.iter().zip(kx).map(|(a, k)| a + cx * k).collect(),
        u: z.u.iter().zip(ku).map(|(a, k)| a + cx * k).collect(),
    }
}

/// One classical 4-stage Runge-Kutta step of the joint `(x, u)` state.
pub fn rk4_step(rhs: &ClosedLoopField, z: &AugmentedState, t: f64, dt: f64) -> Result<AugmentedState> {
    assert!(dt > 0.0, "dt must be positive");
    let n = z.x.len();

    let (k1x, k1u) = rhs.eval(z, t)?;
    check_finite(&k1x, 0, t)?;
    check_finite(&k1u, n, t)?;

    let z2 = axpy(z, dt / 2.0, &k1x, &k1u);
    let (k2x, k2u) = rhs.eval(&z2, t + dt / 2.0)?;
    check_finite(&k2x, 0, t)?;
    check_finite(&k2u, n, t)?;

    let z3 = axpy(z, dt / 2.0, &k2x, &k2u);
    let (k3x, k3u) = rhs.eval(&z3, t + dt / 2.0)?;
    check_finite(&k3x, 0, t)?;
    check_finite(&k3u, n, t)?;

    let z4 = axpy(z, dt, &k3x, &k3u);
    let (k4x, k4u) = rhs.eval(&z4, t + dt)?;
    check_finite(&k4x, 0, t)?;
    check_finite(&k4u, n, t)?;

    let combine = |a: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
        a.iter()
            .enumerate()
            .map(|(i, v)| v + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };
    let next = AugmentedState {
        x: combine(&z.x, &k1x, &k2x, &k3x, &k4x),
        u: combine(&z.u, &k1u, &k2u, &k3u, &k4u),
    };
    if let Some(i) = next.first_non_finite() {
        return Err(Error::NonFinite { time: t, component: i });
    }
    Ok(next)
}

/// Number of RK4 steps in `[0, t_end]` at step `dt`, guarded against
/// `t_end/dt` landing a hair below an integer.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    ((t_end / dt) + 1e-9).floor() as usize
}

/// Integrate the closed loop over `[0, t_end]` and record every step.
/// The trajectory holds `floor(t_end/dt) + 1` samples; every probe is
/// evaluated at each stored sample.
pub fn simulate(
    rhs: &ClosedLoopField,
    z0: &AugmentedState,
    t_end: f64,
    dt: f64,
    probes: &[Probe],
) -> Result<Trajectory> {
    assert!(t_end > 0.0 && dt > 0.0);
    let steps = step_count(t_end, dt);
    assert!(steps <= 100_000_000, "t_end/dt too large");

    let mut traj = Trajectory {
        dt,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        aux: probes.iter().map(|p| (p.name.clone(), Vec::with_capacity(steps + 1))).collect(),
    };

    let mut z = z0.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        for p in probes {
            traj.aux.get_mut(&p.name).unwrap().push(p.eval(&z, t));
        }
        traj.times.push(t);
        traj.states.push(z.clone());
        if k < steps {
            z = rk4_step(rhs, &z, t, dt)?;
        }
    }
    Ok(traj)
}

/// Freeze `u = u_const` and forward-integrate the plant over a horizon:
/// the state prediction feeding the Newton-flow tracking controller.
/// Implemented as repeated `rk4_step` calls so the numeric predictor and
/// the step-by-step route agree bit-for-bit.
pub fn predict_constant_input(
    plant: &PlantDynamics,
    x: &[f64],
    u_const: &[f64],
    horizon: f64,
    dt_pred: f64,
) -> Result<Vec<f64>> {
    assert!(horizon > 0.0 && dt_pred > 0.0);
    let steps = (horizon / dt_pred).round().max(1.0) as usize;
    let plant = plant.clone();
    let m = u_const.len();
    let rhs = ClosedLoopField::new(move |z: &AugmentedState, _t| {
        Ok((plant.eval(&z.x, &z.u), vec![0.0; m]))
    });
    let mut z = AugmentedState::new(x.to_vec(), u_const.to_vec());
    for k in 0..steps {
        z = rk4_step(&rhs, &z, k as f64 * dt_pred, dt_pred)?;
    }
    Ok(z.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_field(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> ClosedLoopField {
        ClosedLoopField::new(move |z, t| Ok((vec![f(z.x[0], t)], vec![])))
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let rhs = ClosedLoopField::new(|z, _| Ok((vec![0.0; z.x.len()], vec![0.0; z.u.len()])));
        let z = AugmentedState::new(vec![1.0, 2.0], vec![3.0]);
        let next = rk4_step(&rhs, &z, 0.0, 0.1).unwrap();
        assert_eq!(next, z);
    }

    #[test]
    fn constant_field_is_exact() {
        let rhs = ClosedLoopField::new(|_, _| Ok((vec![2.0, -1.0], vec![0.5])));
        let z = AugmentedState::new(vec![1.0, 2.0], vec![3.0]);
        let next = rk4_step(&rhs, &z, 0.0, 0.1).unwrap();
        assert_eq!(next.x, vec![1.2, 1.9]);
        assert_eq!(next.u, vec![3.05]);
    }

    #[test]
    fn exponential_growth_single_step() {
        let rhs = scalar_field(|x, _| x);
        let z = AugmentedState::new(vec![1.0], vec![]);
        let next = rk4_step(&rhs, &z, 0.0, 0.1).unwrap();
        assert!((next.x[0] - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn exponential_decay_long_run() {
        let rhs = scalar_field(|x, _| -x);
        let z0 = AugmentedState::new(vec![1.0], vec![]);
        let traj = simulate(&rhs, &z0, 5.0, 1e-3, &[]).unwrap();
        let last = traj.states.last().unwrap().x[0];
        assert!((last - (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn zero_field_simulation_sample_count() {
        let rhs = ClosedLoopField::new(|_, _| Ok((vec![0.0], vec![])));
        let z0 = AugmentedState::new(vec![4.0], vec![]);
        let traj = simulate(&rhs, &z0, 1.0, 0.5, &[]).unwrap();
        assert_eq!(traj.len(), 3);
        assert!(traj.states.iter().all(|z| z.x[0] == 4.0));
    }

    #[test]
    fn order_four_convergence() {
        // error on z' = -z at t = 1 shrinks ~16x when dt is halved
        let rhs = scalar_field(|x, _| -x);
        let z0 = AugmentedState::new(vec![1.0], vec![]);
        let exact = (-1.0f64).exp();
        let mut errors = vec![];
        for dt in [0.1, 0.05] {
            let traj = simulate(&rhs, &z0, 1.0, dt, &[]).unwrap();
            errors.push((traj.states.last().unwrap().x[0] - exact).abs());
        }
        let ratio = errors[0] / errors[1];
        assert!(ratio > 14.0 && ratio < 18.0, "ratio = {ratio}");
    }

    #[test]
    fn time_grid_is_uniform() {
        let rhs = ClosedLoopField::new(|_, _| Ok((vec![0.0], vec![])));
        let z0 = AugmentedState::new(vec![0.0], vec![]);
        let dt = 1e-3;
        let traj = simulate(&rhs, &z0, 2.0, dt, &[]).unwrap();
        for k in 0..traj.len() - 1 {
            assert!((traj.times[k + 1] - traj.times[k] - dt).abs() <= 1e-12 * (k as f64 + 1.0));
        }
    }

    #[test]
    fn non_finite_reports_time_and_component() {
        let rhs = ClosedLoopField::new(|z, _| Ok((vec![z.x[0], 1.0 / (z.x[1] - 1.0)], vec![])));
        let z0 = AugmentedState::new(vec![0.0, 1.0], vec![]);
        match rk4_step(&rhs, &z0, 2.5, 0.1) {
            Err(Error::NonFinite { time, component }) => {
                assert_eq!(time, 2.5);
                assert_eq!(component, 1);
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn prediction_zero_field_returns_start() {
        let plant = PlantDynamics::new(2, 1, |_, _| vec![0.0, 0.0]);
        let out = predict_constant_input(&plant, &[1.0, -2.0], &[5.0], 1.0, 0.01).unwrap();
        assert_eq!(out, vec![1.0, -2.0]);
    }

    #[test]
    fn prediction_integrator_plant_is_linear() {
        let plant = PlantDynamics::new(1, 1, |_, u| vec![u[0]]);
        let out = predict_constant_input(&plant, &[0.0], &[2.0], 3.0, 0.03).unwrap();
        assert!((out[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_matches_manual_steps_bitwise() {
        let plant = PlantDynamics::new(1, 1, |x, u| vec![-0.5 * x[0] + u[0]]);
        let dt_pred = 0.1;
        let predicted = predict_constant_input(&plant, &[2.0], &[0.3], 1.0, dt_pred).unwrap();

        let p2 = plant.clone();
        let rhs = ClosedLoopField::new(move |z: &AugmentedState, _| {
            Ok((p2.eval(&z.x, &z.u), vec![0.0]))
        });
        let mut z = AugmentedState::new(vec![2.0], vec![0.3]);
        for k in 0..10 {
            z = rk4_step(&rhs, &z, k as f64 * dt_pred, dt_pred).unwrap();
        }
        assert_eq!(predicted[0].to_bits(), z.x[0].to_bits());
    }
}
