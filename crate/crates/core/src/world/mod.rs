//! The simulated world: obstacle layouts, the moving target, range sensors,
//! the camera, wheel encoders and the closed-loop episode runner.

mod camera;
mod encoder;
mod sensors;
mod sim;

pub use camera::{bearing_to, render_frame, CameraConfig};
pub use encoder::{encoder_emulate, EncoderState};
pub use sensors::{ultrasonic_distance, SensorConfig};
pub use sim::{
    simulate_episode, write_desired_path_csv, write_trace_csv, EpisodeSummary, Observation, Outcome, Planned,
    PlannerTick, Policy, SimConfig, Trace, TraceRow, ZeroPolicy, TRACE_HEADER,
};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Pose;

/// Axis-aligned rectangle: `(x, y)` is the minimum corner, sizes in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { x: cx - w / 2.0, y: cy - h / 2.0, w, h }
    }

    pub fn max_x(&self) -> f64 {
        self.x + self.w
    }

    pub fn max_y(&self) -> f64 {
        self.y + self.h
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x && other.y >= self.y && other.max_x() <= self.max_x() && other.max_y() <= self.max_y()
    }

    /// Distance from a point to the rectangle (0 inside).
    pub fn distance_to_point(&self, px: f64, py: f64) -> f64 {
        let dx = (self.x - px).max(0.0).max(px - self.max_x());
        let dy = (self.y - py).max(0.0).max(py - self.max_y());
        dx.hypot(dy)
    }

    /// Entry distance of the ray `origin + t·dir` (t >= 0) into the
    /// rectangle, or the exit distance when the origin is inside.
    pub fn ray_hit(&self, ox: f64, oy: f64, dx: f64, dy: f64) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for (o, d, lo, hi) in [(ox, dx, self.x, self.max_x()), (oy, dy, self.y, self.max_y())] {
            if d.abs() < 1e-15 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let (t1, t2) = ((lo - o) / d, (hi - o) / d);
                t_near = t_near.max(t1.min(t2));
                t_far = t_far.min(t1.max(t2));
            }
        }
        if t_near > t_far || t_far < 0.0 {
            None
        } else if t_near >= 0.0 {
            Some(t_near)
        } else {
            Some(t_far)
        }
    }

    /// Whether the closed segment from `a` to `b` touches the rectangle.
    pub fn intersects_segment(&self, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
        let (dx, dy) = (bx - ax, by - ay);
        let len = dx.hypot(dy);
        if len == 0.0 {
            return self.distance_to_point(ax, ay) == 0.0;
        }
        match self.ray_hit(ax, ay, dx / len, dy / len) {
            Some(t) => t <= len || self.distance_to_point(ax, ay) == 0.0,
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Where a scripted obstacle appears.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Placement {
    Absolute { rect: Rect },
    /// Relative to the robot at the moment of the event: the near face lies
    /// `distance` m ahead along the heading, the centre `lateral` m to the
    /// left (negative is right).
    AheadOfRobot { distance: f64, lateral: f64, w: f64, h: f64 },
}

/// An obstacle appearing (or teleporting, when `replace` names an existing
/// obstacle index) at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleEvent {
    pub t: f64,
    pub placement: Placement,
    #[serde(default)]
    pub replace: Option<usize>,
}

impl ObstacleEvent {
    pub fn resolve(&self, robot: &Pose) -> Rect {
        match self.placement {
            Placement::Absolute { rect } => rect,
            Placement::AheadOfRobot { distance, lateral, w, h } => {
                // depth along the heading is w for an x-facing robot, h for y-facing
                let (c, s) = (robot.a.cos(), robot.a.sin());
                let depth = if c.abs() >= s.abs() { w } else { h };
                let along = distance + depth / 2.0;
                let cx = robot.x + along * c - lateral * s;
                let cy = robot.y + along * s + lateral * c;
                Rect::centered(cx, cy, w, h)
            }
        }
    }
}

pub const ENVIRONMENT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_version")]
    pub version: u32,
    /// `None` is an unbounded plane.
    pub bounds: Option<Rect>,
    pub obstacles: Vec<Rect>,
    pub target_path: Vec<Waypoint>,
    pub robot_start: Pose,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<ObstacleEvent>,
}

fn default_version() -> u32 {
    ENVIRONMENT_FORMAT_VERSION
}

impl Environment {
    pub fn from_json(text: &str) -> Result<Self> {
        let env: Environment = serde_json::from_str(text)?;
        env.validate()?;
        Ok(env)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut env = Self::from_json(&std::fs::read_to_string(path)?)?;
        if env.name.is_empty() {
            env.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(env)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_path.is_empty() {
            return Err(Error::Config(format!("{}: target_path is empty", self.name)));
        }
        if self.target_path.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::Config(format!("{}: target_path times must increase", self.name)));
        }
        if let Some(b) = &self.bounds {
            if let Some(o) = self.obstacles.iter().find(|o| !b.contains_rect(o)) {
                return Err(Error::Config(format!("{}: obstacle {o:?} outside bounds", self.name)));
            }
        }
        Ok(())
    }

    /// Target position at time `t`, linearly interpolated and held at the
    /// path ends.
    pub fn target_at(&self, t: f64) -> (f64, f64) {
        let path = &self.target_path;
        let first = path[0];
        if t <= first.t {
            return (first.x, first.y);
        }
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t <= b.t {
                let f = (t - a.t) / (b.t - a.t);
                return (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
            }
        }
        let last = path[path.len() - 1];
        (last.x, last.y)
    }

    pub fn path_end_time(&self) -> f64 {
        self.target_path.last().map_or(0.0, |w| w.t)
    }

    pub fn path_length(&self) -> f64 {
        self.target_path.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum()
    }

    /// Copy with obstacles, waypoints and start pose perturbed uniformly by up
    /// to the given amounts, the path retimed by `time_scale`, and optionally
    /// mirrored about the x axis.
    pub fn jittered<R: Rng>(&self, rng: &mut R, jitter: &Jitter) -> Environment {
        let mut env = self.clone();
        let mut u = |a: f64| if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 };
        for o in &mut env.obstacles {
            o.x += u(jitter.obstacle_m);
            o.y += u(jitter.obstacle_m);
        }
        let scale = 1.0 + u(jitter.time_scale);
        for (i, w) in env.target_path.iter_mut().enumerate() {
            w.t *= scale;
            // keep the first waypoint's offset from the robot meaningful
            let amp = if i == 0 { jitter.waypoint_m / 2.0 } else { jitter.waypoint_m };
            w.x += u(amp);
            w.y += u(amp);
        }
        env.robot_start.x += u(jitter.start_m);
        env.robot_start.y += u(jitter.start_m);
        env.robot_start = Pose::new(env.robot_start.x, env.robot_start.y, env.robot_start.a + u(jitter.heading_rad));
        if jitter.mirror {
            env.mirror_y();
        }
        if let Some(b) = env.bounds {
            for o in &mut env.obstacles {
                o.x = o.x.clamp(b.x, b.max_x() - o.w);
                o.y = o.y.clamp(b.y, b.max_y() - o.h);
            }
        }
        env
    }

    /// Reflects the whole scene through the x axis.
    pub fn mirror_y(&mut self) {
        let flip = |r: &mut Rect| r.y = -(r.y + r.h);
        if let Some(b) = &mut self.bounds {
            flip(b);
        }
        self.obstacles.iter_mut().for_each(flip);
        for w in &mut self.target_path {
            w.y = -w.y;
        }
        self.robot_start = Pose::new(self.robot_start.x, -self.robot_start.y, -self.robot_start.a);
        for e in &mut self.events {
            match &mut e.placement {
                Placement::Absolute { rect } => flip(rect),
                Placement::AheadOfRobot { lateral, .. } => *lateral = -*lateral,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub obstacle_m: f64,
    pub waypoint_m: f64,
    pub start_m: f64,
    pub heading_rad: f64,
    /// Relative, e.g. 0.2 gives time scales in [0.8, 1.2].
    pub time_scale: f64,
    pub mirror: bool,
}

impl Default for Jitter {
    fn default() -> Self {
        Self { obstacle_m: 0.15, waypoint_m: 0.15, start_m: 0.05, heading_rad: 0.3, time_scale: 0.2, mirror: false }
    }
}

/// True when the robot disc touches an obstacle or leaves the world bounds.
pub fn collision_check(pose: &Pose, body_radius: f64, env: &Environment) -> bool {
    collides_with(pose, body_radius, env.bounds.as_ref(), &env.obstacles)
}

pub(crate) fn collides_with(pose: &Pose, body_radius: f64, bounds: Option<&Rect>, obstacles: &[Rect]) -> bool {
    if obstacles.iter().any(|o| o.distance_to_point(pose.x, pose.y) <= body_radius) {
        return true;
    }
    match bounds {
        Some(b) => {
            pose.x - body_radius <= b.x
                || pose.y - body_radius <= b.y
                || pose.x + body_radius >= b.max_x()
                || pose.y + body_radius >= b.max_y()
        }
        None => false,
    }
}

const ENV1: &str = include_str!("../../data/env1.json");
const ENV2: &str = include_str!("../../data/env2.json");
const ENV3: &str = include_str!("../../data/env3.json");

/// The three shipped test courses.
pub fn builtin_environments() -> Vec<Environment> {
    [ENV1, ENV2, ENV3]
        .iter()
        .map(|text| Environment::from_json(text).expect("shipped environment files are valid"))
        .collect()
}

/// A built-in by name (`env1`, `env2`, `env3`) or a JSON file path.
pub fn resolve_environment(name_or_path: &str) -> Result<Environment> {
    if let Some(env) = builtin_environments().into_iter().find(|e| e.name == name_or_path) {
        return Ok(env);
    }
    Environment::load(Path::new(name_or_path))
}
