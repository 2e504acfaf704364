//! Differential-drive kinematics.
//!
//! Wheel speeds are wheel *angular* velocities (rad/s). The body-to-wheel map
//! is
//!
//! ```text
//! [w_r]         [1   L/2] [v]
//! [w_l] = 1/R * [1  -L/2] [ω]
//! ```
//!
//! and the wheel-to-body map is its exact inverse. Heading is CCW-positive,
//! so a faster right wheel turns the robot left (ω > 0).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |ω| the unicycle integrator takes the straight-line branch.
pub const STRAIGHT_LINE_OMEGA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    /// Drive wheel radius, m.
    pub wheel_radius: f64,
    /// Distance between the drive wheels, m.
    pub axle_length: f64,
    /// Encoder ticks per wheel revolution.
    pub ticks_per_rev: u32,
    /// Radius of the circular collision footprint, m.
    pub body_radius: f64,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self {
            wheel_radius: 0.05,
            axle_length: 0.20,
            ticks_per_rev: 512,
            body_radius: 0.15,
        }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.wheel_radius) || !positive(self.axle_length) || !positive(self.body_radius) {
            return Err(Error::Config(format!(
                "robot geometry must be strictly positive, got {self:?}"
            )));
        }
        if self.ticks_per_rev == 0 {
            return Err(Error::Config("ticks_per_rev must be at least 1".into()));
        }
        Ok(())
    }

    /// Arc length rolled by one wheel per encoder tick, m.
    pub fn tick_arc(&self) -> f64 {
        2.0 * PI * self.wheel_radius / f64::from(self.ticks_per_rev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyTwist {
    /// Linear velocity, m/s.
    pub v: f64,
    /// Angular velocity, rad/s, CCW positive.
    pub w: f64,
}

impl BodyTwist {
    pub const ZERO: BodyTwist = BodyTwist { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub right: f64,
    pub left: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading from the +x axis, radians in (-π, π].
    pub a: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, a: f64) -> Self {
        Self { x, y, a: normalize_angle(a) }
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EncoderDelta {
    pub dtick_left: i64,
    pub dtick_right: i64,
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = a.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

pub fn body_to_wheel_speeds(twist: BodyTwist, geom: &RobotGeometry) -> WheelSpeeds {
    let (r, l) = (geom.wheel_radius, geom.axle_length);
    WheelSpeeds {
        left: (2.0 * twist.v - twist.w * l) / (2.0 * r),
        right: (2.0 * twist.v + twist.w * l) / (2.0 * r),
    }
}

pub fn wheel_to_body_speeds(wheels: WheelSpeeds, geom: &RobotGeometry) -> BodyTwist {
    let (r, l) = (geom.wheel_radius, geom.axle_length);
    BodyTwist {
        v: r * (wheels.right + wheels.left) / 2.0,
        w: r * (wheels.right - wheels.left) / l,
    }
}

/// Exact constant-twist motion over `dt` (arc about the ICC, or a straight
/// segment when |ω| is negligible).
pub fn integrate_unicycle(pose: Pose, twist: BodyTwist, dt: f64) -> Pose {
    debug_assert!(dt > 0.0);
    let BodyTwist { v, w } = twist;
    if w.abs() < STRAIGHT_LINE_OMEGA {
        return Pose {
            x: pose.x + v * dt * pose.a.cos(),
            y: pose.y + v * dt * pose.a.sin(),
            a: normalize_angle(pose.a),
        };
    }
    let a_new = pose.a + w * dt;
    let radius = v / w;
    Pose {
        x: pose.x + radius * (a_new.sin() - pose.a.sin()),
        y: pose.y - radius * (a_new.cos() - pose.a.cos()),
        a: normalize_angle(a_new),
    }
}

/// Dead-reckoning update from encoder tick deltas. The chord is laid along
/// the heading held *before* the update; the heading changes afterwards.
pub fn odometry_update(pose: Pose, delta: EncoderDelta, geom: &RobotGeometry) -> Pose {
    let arc = geom.tick_arc();
    let d_left = arc * delta.dtick_left as f64;
    let d_right = arc * delta.dtick_right as f64;
    let d_center = (d_right + d_left) / 2.0;
    Pose {
        x: pose.x + d_center * pose.a.cos(),
        y: pose.y + d_center * pose.a.sin(),
        a: normalize_angle(pose.a + (d_right - d_left) / geom.axle_length),
    }
}
