use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{collides_with, encoder_emulate, render_frame, CameraConfig, EncoderState, Environment, SensorConfig};
use crate::control::{controlled_twist, ControllerConfig, PiState, PlantModel};
use crate::error::Result;
use crate::kinematics::{
    body_to_wheel_speeds, integrate_unicycle, odometry_update, wheel_to_body_speeds, BodyTwist, Pose, RobotGeometry,
};
use crate::vision::{annotate, detect_object, Detection, Frame, Proximity, VisionConfig};

/// What the planner sees once per planner tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub detection: Option<Detection>,
    pub left_cm: f64,
    pub right_cm: f64,
}

/// A planner decision and the features it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Planned {
    pub twist: BodyTwist,
    /// x_angle actually used (the last seen value when the object is lost).
    pub x_angle: f64,
    pub proximity: f64,
}

pub trait Policy {
    fn plan(&mut self, obs: &Observation) -> Result<Planned>;
}

/// Always asks for rest.
#[derive(Debug, Default, Clone, Copy)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn plan(&mut self, obs: &Observation) -> Result<Planned> {
        Ok(Planned {
            twist: BodyTwist::ZERO,
            x_angle: obs.detection.map_or(160.0, |d| d.x_angle),
            proximity: obs.detection.map_or(0.0, |d| d.proximity.as_feature()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Planner period, s.
    pub planner_period: f64,
    /// Control period, s.
    pub control_dt: f64,
    pub max_duration: f64,
    /// Consecutive `Close` planner ticks, after the target has stopped,
    /// that end the episode as completed.
    pub close_ticks_to_finish: usize,
    pub geometry: RobotGeometry,
    pub sensors: SensorConfig,
    pub camera: CameraConfig,
    pub vision: VisionConfig,
    pub controller: ControllerConfig,
    pub record_frames: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            planner_period: 0.5,
            control_dt: 0.01,
            max_duration: 60.0,
            close_ticks_to_finish: 3,
            geometry: RobotGeometry::default(),
            sensors: SensorConfig::default(),
            camera: CameraConfig::default(),
            vision: VisionConfig::default(),
            controller: ControllerConfig::default(),
            record_frames: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.planner_period > 0.0 && self.control_dt > 0.0 && self.control_dt <= self.planner_period) {
            return Err(crate::Error::Config("need 0 < control_dt <= planner_period".into()));
        }
        self.geometry.validate()?;
        self.sensors.validate()?;
        self.camera.validate()?;
        self.vision.validate()?;
        self.controller.validate()
    }

    pub fn substeps(&self) -> usize {
        (self.planner_period / self.control_dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Completed,
    Collision,
    Timeout,
}

/// One control substep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub pose_true: Pose,
    pub pose_odom: Pose,
    pub v_desired: f64,
    pub v_controlled: f64,
    pub v_actual: f64,
    pub w_desired: f64,
    pub w_controlled: f64,
    pub w_actual: f64,
    pub left_cm: f64,
    pub right_cm: f64,
    pub x_angle: f64,
    pub proximity: f64,
    pub target_x: f64,
    pub target_y: f64,
}

pub const TRACE_HEADER: &str = "t,x_true,y_true,a_true,x_odom,y_odom,a_odom,v_desired,v_controlled,v_actual,\
w_desired,w_controlled,w_actual,left_cm,right_cm,x_angle,proximity,target_x,target_y";

impl TraceRow {
    fn values(&self) -> [f64; 19] {
        [
            self.t,
            self.pose_true.x,
            self.pose_true.y,
            self.pose_true.a,
            self.pose_odom.x,
            self.pose_odom.y,
            self.pose_odom.a,
            self.v_desired,
            self.v_controlled,
            self.v_actual,
            self.w_desired,
            self.w_controlled,
            self.w_actual,
            self.left_cm,
            self.right_cm,
            self.x_angle,
            self.proximity,
            self.target_x,
            self.target_y,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// One planner decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerTick {
    pub t: f64,
    pub observation: Observation,
    pub planned: Planned,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub environment: String,
    pub outcome: Outcome,
    pub duration_s: f64,
    pub path_length_m: f64,
    pub collisions: u32,
    pub planner_ticks: usize,
    pub final_odometry_error_m: f64,
    pub target_path_length_m: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub ticks: Vec<PlannerTick>,
    /// Start pose advanced by each tick's desired twist over one planner
    /// period.
    pub desired_path: Vec<(f64, Pose)>,
    /// Annotated camera frames by planner tick, when requested.
    pub frames: Vec<(usize, Frame)>,
    pub summary: EpisodeSummary,
}

/// Runs one closed-loop episode.
///
/// Every planner period: move the target, render, detect, read the sensors
/// and ask `policy` for a twist. Then, every control period: PI loops, plant,
/// wheel speeds, exact pose integration, encoder ticks and odometry. Ends on
/// collision, timeout, or `close_ticks_to_finish` consecutive close
/// detections once the target path is finished.
pub fn simulate_episode<P: Policy + ?Sized>(env: &Environment, policy: &mut P, cfg: &SimConfig) -> Result<Trace> {
    cfg.validate()?;
    let geom = &cfg.geometry;
    let ctl = &cfg.controller;
    let dt = cfg.control_dt;
    let substeps = cfg.substeps();

    let mut scene = env.clone();
    let mut pending: Vec<_> = env.events.clone();
    pending.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut pending = pending.into_iter().peekable();

    let mut pose_true = env.robot_start;
    let mut pose_odom = env.robot_start;
    let mut desired_pose = env.robot_start;
    let mut plant_v = PlantModel::new(ctl.tau);
    let mut plant_w = PlantModel::new(ctl.tau);
    let mut pi_v = PiState::new(dt, ctl.integral_limit);
    let mut pi_w = PiState::new(dt, ctl.integral_limit);
    let mut encoders = EncoderState::default();

    let mut rows = Vec::new();
    let mut ticks = Vec::new();
    let mut desired_path = vec![(0.0, desired_pose)];
    let mut frames = Vec::new();
    let mut path_length = 0.0;
    let mut close_streak = 0usize;
    let path_end = env.path_end_time();

    let mut k = 0usize;
    let (outcome, duration) = 'episode: loop {
        let t_k = k as f64 * cfg.planner_period;
        k += 1;
        while let Some(ev) = pending.next_if(|e| e.t <= t_k + 1e-9) {
            let rect = ev.resolve(&pose_true);
            match ev.replace {
                Some(i) if i < scene.obstacles.len() => scene.obstacles[i] = rect,
                _ => scene.obstacles.push(rect),
            }
        }

        let target = scene.target_at(t_k);
        let frame = render_frame(&pose_true, target, &cfg.camera, &scene.obstacles);
        let detection = detect_object(&frame, &cfg.vision);
        let (left_cm, right_cm) = cfg.sensors.read_pair(&pose_true, &scene);
        let observation = Observation { t: t_k, detection, left_cm, right_cm };
        let planned = policy.plan(&observation)?;
        ticks.push(PlannerTick { t: t_k, observation, planned });
        if cfg.record_frames {
            frames.push((k - 1, annotate(&frame, detection.as_ref())));
        }
        desired_pose = integrate_unicycle(desired_pose, planned.twist, cfg.planner_period);
        desired_path.push((t_k + cfg.planner_period, desired_pose));

        close_streak = match detection {
            Some(d) if d.proximity == Proximity::Close => close_streak + 1,
            _ => 0,
        };
        if t_k >= path_end && close_streak >= cfg.close_ticks_to_finish {
            break 'episode (Outcome::Completed, t_k);
        }
        if t_k >= cfg.max_duration {
            break 'episode (Outcome::Timeout, t_k);
        }

        let desired = planned.twist;
        for s in 0..substeps {
            let actual = BodyTwist::new(plant_v.state, plant_w.state);
            let commanded = controlled_twist(actual, desired, &mut pi_v, &mut pi_w, &ctl.gains_v, &ctl.gains_w);
            plant_v.step(commanded.v, dt);
            plant_w.step(commanded.w, dt);
            let wheels = body_to_wheel_speeds(BodyTwist::new(plant_v.state, plant_w.state), geom);
            let moved = integrate_unicycle(pose_true, wheel_to_body_speeds(wheels, geom), dt);
            path_length += moved.distance_to(&pose_true);
            pose_true = moved;
            let delta = encoder_emulate(wheels, dt, geom, &mut encoders);
            pose_odom = odometry_update(pose_odom, delta, geom);

            let t = t_k + (s + 1) as f64 * dt;
            let (target_x, target_y) = scene.target_at(t);
            rows.push(TraceRow {
                t,
                pose_true,
                pose_odom,
                v_desired: desired.v,
                v_controlled: commanded.v,
                v_actual: plant_v.state,
                w_desired: desired.w,
                w_controlled: commanded.w,
                w_actual: plant_w.state,
                left_cm,
                right_cm,
                x_angle: planned.x_angle,
                proximity: planned.proximity,
                target_x,
                target_y,
            });
            if collides_with(&pose_true, geom.body_radius, scene.bounds.as_ref(), &scene.obstacles) {
                break 'episode (Outcome::Collision, t);
            }
        }
    };

    let summary = EpisodeSummary {
        environment: env.name.clone(),
        outcome,
        duration_s: duration,
        path_length_m: path_length,
        collisions: u32::from(outcome == Outcome::Collision),
        planner_ticks: ticks.len(),
        final_odometry_error_m: pose_true.distance_to(&pose_odom),
        target_path_length_m: env.path_length(),
    };
    Ok(Trace { rows, ticks, desired_path, frames, summary })
}

/// Writes the trace rows as CSV under [`TRACE_HEADER`].
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for row in rows {
        let line: Vec<String> = row.values().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_desired_path_csv<W: Write>(path: &[(f64, Pose)], mut out: W) -> Result<()> {
    writeln!(out, "t,x,y,a")?;
    for (t, p) in path {
        writeln!(out, "{t},{},{},{}", p.x, p.y, p.a)?;
    }
    Ok(())
}
