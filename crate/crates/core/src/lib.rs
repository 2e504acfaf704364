//! Object-follower mobile robot.
//!
//! A colour-blob vision pipeline finds a target ball in a 320x240 frame, two
//! small feedforward networks turn the ball position, its proximity flag and
//! two ultrasonic readings into a desired body twist, PI loops track that
//! twist, and differential-drive kinematics with wheel-encoder odometry move
//! the robot through a deterministic 2D world.
//!
//! Modules, bottom-up:
//! - [`kinematics`]: twist/wheel-speed maps, exact arc integration, encoder odometry.
//! - [`vision`]: HSV threshold, opening, Gaussian blur, Hough circles, detection.
//! - [`planner`]: MLPs, backprop, Adam, scaling, scripted expert, dataset generation.
//! - [`control`]: PI velocity loops, first-order plant, step-response metrics and tuning.
//! - [`world`]: environments, sensors, camera rendering, encoders, episode loop.
//! - [`pipeline`]: end-to-end generate/train/simulate chains used by the CLI.
//!
//! Batch workloads (Hough voting, sweeps, dataset generation) go through
//! [`exec::Exec`], which uses rayon when the `parallel` feature is enabled and
//! falls back to a plain loop otherwise. Results are identical either way.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod exec;
pub mod kinematics;
pub mod pipeline;
pub mod planner;
pub mod vision;
pub mod world;

pub use error::{Error, Result};
