//! PI velocity loops.
//!
//! Each loop computes `u = kp·e + ki·∫e` with rectangular integration and a
//! clamped integral, then commands `actual + u` (the controlled velocity).
//! The plant is a first-order lag discretised exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kinematics::BodyTwist;

/// Step-response targets the default gains are tuned against.
pub const TARGET_RISE_TIME: f64 = 0.254;
pub const TARGET_SETTLING_TIME: f64 = 0.451;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    /// 1/s
    pub ki: f64,
    /// Always zero: the loops are PI.
    #[serde(default)]
    pub kd: f64,
}

impl PidGains {
    pub fn pi(kp: f64, ki: f64) -> Self {
        Self { kp, ki, kd: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0 && self.ki >= 0.0) || !self.kp.is_finite() || !self.ki.is_finite() {
            return Err(Error::Config(format!("gains must be finite and non-negative: {self:?}")));
        }
        if self.kd != 0.0 {
            return Err(Error::Config("derivative gain must be zero for a PI loop".into()));
        }
        Ok(())
    }
}

impl Default for PidGains {
    /// Result of [`tune_gains`] on the default 0.15 s plant.
    fn default() -> Self {
        PidGains::pi(1.3, 0.0)
    }
}

/// Gains and plant parameters for the two velocity loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub gains_v: PidGains,
    pub gains_w: PidGains,
    /// Plant time constant, s.
    pub tau: f64,
    pub integral_limit: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self { gains_v: PidGains::default(), gains_w: PidGains::default(), tau: 0.15, integral_limit: 5.0 }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.gains_v.validate()?;
        self.gains_w.validate()?;
        if !(self.tau > 0.0) || !(self.integral_limit > 0.0) {
            return Err(Error::Config("tau and integral_limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiState {
    pub integral: f64,
    pub dt: f64,
    pub integral_limit: f64,
}

impl PiState {
    pub fn new(dt: f64, integral_limit: f64) -> Self {
        assert!(dt > 0.0, "control period must be positive");
        Self { integral: 0.0, dt, integral_limit }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
    }

    pub fn update(&mut self, gains: &PidGains, error: f64) -> f64 {
        pi_update(self, gains, error)
    }
}

pub fn pi_update(state: &mut PiState, gains: &PidGains, error: f64) -> f64 {
    state.integral = (state.integral + error * state.dt).clamp(-state.integral_limit, state.integral_limit);
    gains.kp * error + gains.ki * state.integral
}

/// Controlled twist `(v_actual + u_v, ω_actual + u_ω)`; the two loops are
/// independent.
pub fn controlled_twist(
    actual: BodyTwist,
    desired: BodyTwist,
    v_pi: &mut PiState,
    w_pi: &mut PiState,
    gains_v: &PidGains,
    gains_w: &PidGains,
) -> BodyTwist {
    let u_v = pi_update(v_pi, gains_v, desired.v - actual.v);
    let u_w = pi_update(w_pi, gains_w, desired.w - actual.w);
    BodyTwist { v: actual.v + u_v, w: actual.w + u_w }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantModel {
    pub tau: f64,
    pub state: f64,
}

impl PlantModel {
    pub fn new(tau: f64) -> Self {
        assert!(tau > 0.0, "time constant must be positive");
        Self { tau, state: 0.0 }
    }

    pub fn step(&mut self, command: f64, dt: f64) -> f64 {
        plant_step(self, command, dt)
    }
}

pub fn plant_step(plant: &mut PlantModel, command: f64, dt: f64) -> f64 {
    debug_assert!(dt > 0.0);
    plant.state += (command - plant.state) * (1.0 - (-dt / plant.tau).exp());
    plant.state
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 10% to 90% rise, s.
    pub rise_time_10_90: Option<f64>,
    /// Time after which the output stays within ±2% of the setpoint, s.
    pub settling_time_2pct: Option<f64>,
    pub overshoot_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseSample {
    pub t: f64,
    pub setpoint: f64,
    pub output: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub samples: Vec<ResponseSample>,
    pub metrics: StepMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSetup {
    pub tau: f64,
    pub dt: f64,
    pub duration: f64,
    pub setpoint: f64,
    pub integral_limit: f64,
}

impl Default for StepSetup {
    fn default() -> Self {
        Self { tau: 0.15, dt: 0.001, duration: 3.0, setpoint: 1.0, integral_limit: 5.0 }
    }
}

/// Closed-loop step from rest: PI on the error, `output + u` commanded to the
/// plant.
pub fn simulate_step(gains: &PidGains, setup: &StepSetup) -> StepResponse {
    let mut pi = PiState::new(setup.dt, setup.integral_limit);
    let mut plant = PlantModel::new(setup.tau);
    let n = (setup.duration / setup.dt).round() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let output = plant.state;
        let u = pi.update(gains, setup.setpoint - output);
        samples.push(ResponseSample { t: k as f64 * setup.dt, setpoint: setup.setpoint, output, u });
        if k < n {
            plant.step(output + u, setup.dt);
        }
    }
    let metrics = metrics_from_samples(&samples, setup.setpoint);
    StepResponse { samples, metrics }
}

pub fn step_response_metrics(gains: &PidGains, setup: &StepSetup) -> StepMetrics {
    simulate_step(gains, setup).metrics
}

fn first_crossing(samples: &[ResponseSample], level: f64) -> Option<f64> {
    let idx = samples.iter().position(|s| s.output >= level)?;
    if idx == 0 {
        return Some(samples[0].t);
    }
    let (a, b) = (&samples[idx - 1], &samples[idx]);
    Some(a.t + (level - a.output) / (b.output - a.output) * (b.t - a.t))
}

/// Rise, settling and overshoot of a recorded step response. Crossing times
/// are linearly interpolated between samples.
pub fn metrics_from_samples(samples: &[ResponseSample], setpoint: f64) -> StepMetrics {
    let rise = match (first_crossing(samples, 0.1 * setpoint), first_crossing(samples, 0.9 * setpoint)) {
        (Some(t10), Some(t90)) => Some(t90 - t10),
        _ => None,
    };
    let band = 0.02 * setpoint.abs();
    let dev = |s: &ResponseSample| (s.output - setpoint).abs();
    let settling = match samples.iter().rposition(|s| dev(s) > band) {
        None => samples.first().map(|s| s.t),
        Some(k) if k + 1 == samples.len() => None,
        Some(k) => {
            let (a, b) = (&samples[k], &samples[k + 1]);
            let (da, db) = (dev(a), dev(b));
            Some(a.t + (da - band) / (da - db) * (b.t - a.t))
        }
    };
    let peak = samples.iter().map(|s| s.output).fold(f64::NEG_INFINITY, f64::max);
    let overshoot_pct = ((peak - setpoint) / setpoint * 100.0).max(0.0);
    StepMetrics { rise_time_10_90: rise, settling_time_2pct: settling, overshoot_pct }
}

/// Search grid for [`tune_gains`]. Every pair in the default grid is
/// stable for control periods up to 0.01 s on the 0.15 s plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub kp_min: f64,
    pub kp_max: f64,
    pub kp_step: f64,
    pub ki_min: f64,
    pub ki_max: f64,
    pub ki_step: f64,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self { kp_min: 0.5, kp_max: 10.0, kp_step: 0.05, ki_min: 0.0, ki_max: 50.0, ki_step: 0.5 }
    }
}

impl TuningGrid {
    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    pub fn points(&self) -> Vec<PidGains> {
        let kps = Self::axis(self.kp_min, self.kp_max, self.kp_step);
        let kis = Self::axis(self.ki_min, self.ki_max, self.ki_step);
        kps.iter()
            .flat_map(|&kp| kis.iter().map(move |&ki| PidGains::pi(kp, ki)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningResult {
    pub gains: PidGains,
    pub metrics: StepMetrics,
    /// |rise - target| + |settling - target|, s.
    pub cost: f64,
}

/// Grid search for the gain pair whose step response is closest to the
/// target rise and settling times with no overshoot. Ties go to the earliest
/// grid point.
pub fn tune_gains(grid: &TuningGrid, setup: &StepSetup, exec: Exec) -> Option<TuningResult> {
    let points = grid.points();
    let evaluated = exec.map_slice(&points, |g| {
        let m = step_response_metrics(g, setup);
        match (m.rise_time_10_90, m.settling_time_2pct) {
            (Some(r), Some(s)) if m.overshoot_pct <= 0.0 => Some(TuningResult {
                gains: *g,
                metrics: m,
                cost: (r - TARGET_RISE_TIME).abs() + (s - TARGET_SETTLING_TIME).abs(),
            }),
            _ => None,
        }
    });
    evaluated.into_iter().flatten().fold(None, |best: Option<TuningResult>, r| match best {
        Some(b) if b.cost <= r.cost => Some(b),
        _ => Some(r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pi_examples() {
        let mut s = PiState::new(0.01, 5.0);
        assert_eq!(s.update(&PidGains::pi(1.0, 1.0), 0.0), 0.0);

        let mut s = PiState::new(0.01, 5.0);
        assert_eq!(s.update(&PidGains::pi(1.0, 0.0), 0.5), 0.5);

        let mut s = PiState::new(0.01, 5.0);
        let mut u = 0.0;
        for _ in 0..50 {
            u = s.update(&PidGains::pi(0.0, 2.0), 1.0);
        }
        assert_abs_diff_eq!(u, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn controlled_twist_examples() {
        let g = PidGains::pi(0.5, 0.0);
        let (mut a, mut b) = (PiState::new(0.01, 5.0), PiState::new(0.01, 5.0));
        let act = BodyTwist::new(0.2, -0.1);
        assert_eq!(controlled_twist(act, act, &mut a, &mut b, &g, &g), act);

        let (mut a, mut b) = (PiState::new(0.01, 5.0), PiState::new(0.01, 5.0));
        let c = controlled_twist(BodyTwist::ZERO, BodyTwist::new(1.0, 0.0), &mut a, &mut b, &g, &g);
        assert_abs_diff_eq!(c.v, 0.5);
        assert_eq!(c.w, 0.0);
    }

    #[test]
    fn loops_are_independent() {
        let g = PidGains::pi(0.8, 3.0);
        let run = |w_des: f64| {
            let (mut a, mut b) = (PiState::new(0.01, 5.0), PiState::new(0.01, 5.0));
            let mut last = BodyTwist::ZERO;
            for _ in 0..20 {
                last = controlled_twist(BodyTwist::new(0.1, 0.0), BodyTwist::new(0.4, w_des), &mut a, &mut b, &g, &g);
            }
            last.v
        };
        assert_eq!(run(0.0), run(2.5));
    }

    #[test]
    fn plant_examples() {
        let mut p = PlantModel { tau: 0.15, state: 0.7 };
        assert_eq!(p.step(0.7, 0.01), 0.7);

        let mut p = PlantModel::new(0.15);
        assert_abs_diff_eq!(p.step(1.0, 0.15), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.state, 0.632_120_558_8, epsilon = 1e-9);

        let tau = 0.15;
        let dt = tau / 1000.0;
        let mut p = PlantModel { tau, state: 0.2 };
        let slope = (p.step(1.0, dt) - 0.2) / dt;
        let expected = (1.0 - 0.2) / tau;
        assert!((slope - expected).abs() / expected < 0.01);
    }

    #[test]
    fn zero_gains_never_rise() {
        let m = step_response_metrics(&PidGains::pi(0.0, 0.0), &StepSetup::default());
        assert!(m.rise_time_10_90.is_none());
        assert!(m.settling_time_2pct.is_none());
    }

    #[test]
    fn pure_p_matches_first_order_rise() {
        // The `actual + u` command turns the lag into an integrator:
        // e[k+1] = (1 - αk)·e[k] with α = 1 - exp(-dt/τ).
        let setup = StepSetup::default();
        for kp in [0.5, 1.3, 3.0, 8.0] {
            let alpha = 1.0 - (-setup.dt / setup.tau).exp();
            let tau_eff = -setup.dt / (1.0 - alpha * kp).ln();
            let expected = tau_eff * 9f64.ln();
            let m = step_response_metrics(&PidGains::pi(kp, 0.0), &setup);
            let rise = m.rise_time_10_90.unwrap();
            assert!((rise - expected).abs() / expected < 0.02, "kp={kp}: {rise} vs {expected}");
        }
    }

    #[test]
    fn default_gains_hit_targets() {
        let m = step_response_metrics(&PidGains::default(), &StepSetup::default());
        assert!((m.rise_time_10_90.unwrap() - TARGET_RISE_TIME).abs() <= 0.08);
        assert!((m.settling_time_2pct.unwrap() - TARGET_SETTLING_TIME).abs() <= 0.15);
        assert!(m.overshoot_pct < 2.0);
    }

    #[test]
    fn coarse_sweep_recovers_default() {
        let grid = TuningGrid { kp_step: 0.1, ki_step: 2.5, ..TuningGrid::default() };
        let best = tune_gains(&grid, &StepSetup::default(), Exec::default()).unwrap();
        assert_abs_diff_eq!(best.gains.kp, 1.3, epsilon = 1e-9);
        assert_eq!(best.gains.ki, 0.0);
    }

    #[test]
    fn integral_action_removes_offset() {
        let setup = StepSetup { duration: 12.0, ..StepSetup::default() };
        for (kp, ki) in [(0.5, 1.0), (1.3, 2.0), (4.0, 10.0), (9.5, 45.0)] {
            let r = simulate_step(&PidGains::pi(kp, ki), &setup);
            for s in r.samples.iter().filter(|s| s.t >= 10.0) {
                assert!((s.output - 1.0).abs() < 1e-3, "kp={kp} ki={ki} t={} y={}", s.t, s.output);
            }
        }
    }

    #[test]
    fn gain_validation() {
        assert!(PidGains::default().validate().is_ok());
        assert!(PidGains::pi(-1.0, 0.0).validate().is_err());
        assert!(PidGains { kp: 1.0, ki: 1.0, kd: 0.1 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn closed_loop_bounded(kp in 0.5f64..10.0, ki in 0.0f64..50.0, sp in -2.0f64..2.0) {
            let setup = StepSetup { dt: 0.01, duration: 5.0, setpoint: sp, ..StepSetup::default() };
            let r = simulate_step(&PidGains::pi(kp, ki), &setup);
            for s in &r.samples {
                prop_assert!(s.output.is_finite() && s.u.is_finite());
                prop_assert!(s.output.abs() <= 10.0 * sp.abs() + 1e-9);
            }
        }

        #[test]
        fn integral_is_clamped(limit in 0.1f64..5.0, err in -10.0f64..10.0, n in 1usize..2000) {
            // saturated actuator: the error never shrinks
            let mut s = PiState::new(0.01, limit);
            for _ in 0..n {
                s.update(&PidGains::pi(1.0, 3.0), err);
                prop_assert!(s.integral.abs() <= limit);
            }
        }

        #[test]
        fn doubling_errors_doubles_output(errs in proptest::collection::vec(-1.0f64..1.0, 1..50), kp in 0.0f64..5.0, ki in 0.0f64..20.0) {
            let g = PidGains::pi(kp, ki);
            let (mut a, mut b) = (PiState::new(0.01, 1e9), PiState::new(0.01, 1e9));
            for e in &errs {
                let u1 = a.update(&g, *e);
                let u2 = b.update(&g, 2.0 * e);
                prop_assert!((u2 - 2.0 * u1).abs() <= 1e-9 * (1.0 + u1.abs()));
            }
        }
    }
}
