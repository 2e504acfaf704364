use std::f64::consts::PI;

use crate::kinematics::{EncoderDelta, RobotGeometry, WheelSpeeds};

/// Slack for float accumulation when flooring tick counts.
const TICK_EPS: f64 = 1e-9;

/// Exact wheel rotation (in revolutions) accumulated so far, and the ticks
/// already emitted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EncoderState {
    revs_left: f64,
    revs_right: f64,
    ticks_left: i64,
    ticks_right: i64,
}

impl EncoderState {
    pub fn total_ticks(&self) -> (i64, i64) {
        (self.ticks_left, self.ticks_right)
    }
}

/// Advances both wheels by `speed·dt` and returns the whole ticks crossed.
/// Fractions of a tick carry over to later calls.
pub fn encoder_emulate(wheels: WheelSpeeds, dt: f64, geom: &RobotGeometry, state: &mut EncoderState) -> EncoderDelta {
    debug_assert!(dt > 0.0);
    let n = f64::from(geom.ticks_per_rev);
    state.revs_left += wheels.left * dt / (2.0 * PI);
    state.revs_right += wheels.right * dt / (2.0 * PI);
    let total_left = (state.revs_left * n + TICK_EPS).floor() as i64;
    let total_right = (state.revs_right * n + TICK_EPS).floor() as i64;
    let delta = EncoderDelta {
        dtick_left: total_left - state.ticks_left,
        dtick_right: total_right - state.ticks_right,
    };
    state.ticks_left = total_left;
    state.ticks_right = total_right;
    delta
}
