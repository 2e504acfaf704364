use serde::{Deserialize, Serialize};

use super::Environment;
use crate::kinematics::Pose;

/// Two forward-looking ultrasonic rangers, each modelled as a fan of rays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Left mount, degrees CCW from the heading.
    pub mount_angle_left_deg: f64,
    pub mount_angle_right_deg: f64,
    pub cone_half_angle_deg: f64,
    pub max_range_cm: f64,
    /// Odd, at least 3.
    pub n_rays: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            mount_angle_left_deg: 15.0,
            mount_angle_right_deg: -15.0,
            cone_half_angle_deg: 15.0,
            max_range_cm: 400.0,
            n_rays: 9,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.max_range_cm > 0.0) || self.n_rays < 3 || self.n_rays.is_multiple_of(2) {
            return Err(crate::Error::Config(format!("invalid sensor config {self:?}")));
        }
        Ok(())
    }

    /// `(left_cm, right_cm)` at `pose`.
    pub fn read_pair(&self, pose: &Pose, env: &Environment) -> (f64, f64) {
        (
            ultrasonic_distance(pose, self.mount_angle_left_deg.to_radians(), self, env),
            ultrasonic_distance(pose, self.mount_angle_right_deg.to_radians(), self, env),
        )
    }
}

/// Nearest hit (cm) among rays spread evenly over the cone centred on
/// `heading + mount_angle`, cast from the robot centre. Obstacles and the
/// inside of the world bounds both reflect; the result is capped at the
/// maximum range.
pub fn ultrasonic_distance(pose: &Pose, mount_angle: f64, cfg: &SensorConfig, env: &Environment) -> f64 {
    let max_m = cfg.max_range_cm / 100.0;
    let half = cfg.cone_half_angle_deg.to_radians();
    let center = pose.a + mount_angle;
    let mut best = max_m;
    for i in 0..cfg.n_rays {
        let frac = i as f64 / (cfg.n_rays - 1) as f64;
        let theta = center - half + 2.0 * half * frac;
        let (dx, dy) = (theta.cos(), theta.sin());
        for o in &env.obstacles {
            if let Some(t) = o.ray_hit(pose.x, pose.y, dx, dy) {
                best = best.min(t);
            }
        }
        if let Some(b) = &env.bounds {
            if let Some(t) = b.ray_hit(pose.x, pose.y, dx, dy) {
                best = best.min(t);
            }
        }
    }
    (best * 100.0).min(cfg.max_range_cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Rect, Waypoint};

    fn env(obstacles: Vec<Rect>) -> Environment {
        Environment {
            name: "t".into(),
            version: 1,
            bounds: None,
            obstacles,
            target_path: vec![Waypoint { t: 0.0, x: 0.0, y: 0.0 }],
            robot_start: Pose::default(),
            events: vec![],
        }
    }

    #[test]
    fn nothing_in_range() {
        let cfg = SensorConfig::default();
        let d = ultrasonic_distance(&Pose::default(), 0.0, &cfg, &env(vec![]));
        assert_eq!(d, 400.0);
    }

    #[test]
    fn wall_ahead() {
        let cfg = SensorConfig::default();
        let e = env(vec![Rect::new(1.0, -2.0, 0.2, 4.0)]);
        let d = ultrasonic_distance(&Pose::default(), 0.0, &cfg, &e);
        assert!((d - 100.0).abs() < 1.0, "{d}");
        // the left sensor's centre ray at +15° meets the face at 1/cos 15°
        let rotated = Pose::new(0.0, 0.0, -15f64.to_radians());
        let d = ultrasonic_distance(&rotated, 15f64.to_radians(), &cfg, &e);
        assert!((d - 100.0).abs() < 1.0, "{d}");
    }

    #[test]
    fn obstacle_behind_is_invisible() {
        let cfg = SensorConfig::default();
        let e = env(vec![Rect::new(-1.2, -0.5, 0.2, 1.0)]);
        let (l, r) = cfg.read_pair(&Pose::default(), &e);
        assert_eq!((l, r), (400.0, 400.0));
    }

    #[test]
    fn bounds_reflect_from_inside() {
        let cfg = SensorConfig::default();
        let mut e = env(vec![]);
        e.bounds = Some(Rect::new(-1.0, -1.0, 2.5, 2.0));
        let d = ultrasonic_distance(&Pose::default(), 0.0, &cfg, &e);
        assert!((d - 150.0).abs() < 1e-9, "{d}");
    }
}
