use serde::{Deserialize, Serialize};

use super::Rect;
use crate::kinematics::{normalize_angle, Pose};
use crate::vision::{Frame, Rgb, FRAME_HEIGHT, FRAME_WIDTH};

/// Forward-facing pinhole camera at the robot centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub hfov_deg: f64,
    pub target_radius_m: f64,
    pub target_color: Rgb,
    pub background: Rgb,
    pub far_clip_m: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            hfov_deg: 60.0,
            target_radius_m: 0.05,
            target_color: [240, 220, 30],
            background: [60, 60, 60],
            far_clip_m: 10.0,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) || !(self.target_radius_m > 0.0) {
            return Err(crate::Error::Config(format!("invalid camera config {self:?}")));
        }
        Ok(())
    }

    pub fn focal_px(&self) -> f64 {
        (FRAME_WIDTH as f64 / 2.0) / (self.hfov_deg.to_radians() / 2.0).tan()
    }

    /// Image position and radius of a target at `bearing` (rad, rightward
    /// positive) and `distance` (m).
    pub fn project(&self, bearing: f64, distance: f64) -> (f64, f64, f64) {
        let f = self.focal_px();
        (FRAME_WIDTH as f64 / 2.0 + f * bearing.tan(), FRAME_HEIGHT as f64 / 2.0, f * self.target_radius_m / distance)
    }
}

/// Signed angle from the heading to the target, positive to the right.
pub fn bearing_to(robot: &Pose, tx: f64, ty: f64) -> f64 {
    -normalize_angle((ty - robot.y).atan2(tx - robot.x) - robot.a)
}

/// Renders the target ball as a filled disc on a flat background. Nothing is
/// drawn when the target is outside the field of view, beyond the far clip,
/// or when an obstacle blocks the line of sight to its centre.
pub fn render_frame(robot: &Pose, target: (f64, f64), cam: &CameraConfig, obstacles: &[Rect]) -> Frame {
    let mut frame = Frame::blank(cam.background);
    let (tx, ty) = target;
    let distance = (tx - robot.x).hypot(ty - robot.y);
    let bearing = bearing_to(robot, tx, ty);
    let visible = distance > cam.target_radius_m
        && distance <= cam.far_clip_m
        && bearing.abs() < cam.hfov_deg.to_radians() / 2.0
        && !obstacles.iter().any(|o| o.intersects_segment(robot.x, robot.y, tx, ty));
    if visible {
        let (cx, cy, r) = cam.project(bearing, distance);
        frame.fill_disc(cx, cy, r, cam.target_color);
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_extent(frame: &Frame, color: Rgb) -> Option<(usize, usize, usize)> {
        let row = FRAME_HEIGHT / 2;
        let xs: Vec<usize> = (0..FRAME_WIDTH).filter(|&x| frame.get(x, row) == color).collect();
        Some((*xs.first()?, *xs.last()?, xs.len()))
    }

    #[test]
    fn straight_ahead_is_centred() {
        let cam = CameraConfig::default();
        let f = render_frame(&Pose::default(), (1.0, 0.0), &cam, &[]);
        let (lo, hi, _) = disc_extent(&f, cam.target_color).unwrap();
        assert_eq!(lo + hi, 320);
    }

    #[test]
    fn bearing_twenty_degrees_right() {
        let cam = CameraConfig::default();
        assert!((cam.focal_px() - 277.128).abs() < 1e-3);
        let b = 20f64.to_radians();
        let (cx, _, _) = cam.project(b, 1.0);
        assert!((cx - 260.87).abs() < 0.01, "{cx}");
        // a point 20° clockwise from the heading
        let robot = Pose::default();
        let f = render_frame(&robot, (b.cos(), -b.sin()), &cam, &[]);
        let (lo, hi, _) = disc_extent(&f, cam.target_color).unwrap();
        assert!(((lo + hi) as f64 / 2.0 - 261.0).abs() <= 1.0);
    }

    #[test]
    fn radius_inverse_to_distance() {
        let cam = CameraConfig::default();
        let near = render_frame(&Pose::default(), (0.5, 0.0), &cam, &[]);
        let far = render_frame(&Pose::default(), (1.0, 0.0), &cam, &[]);
        let rn = disc_extent(&near, cam.target_color).unwrap().2 as f64 / 2.0;
        let rf = disc_extent(&far, cam.target_color).unwrap().2 as f64 / 2.0;
        assert!((rn - 2.0 * rf).abs() <= 1.0, "{rn} vs {rf}");
    }

    #[test]
    fn hidden_targets() {
        let cam = CameraConfig::default();
        let behind = render_frame(&Pose::default(), (-1.0, 0.0), &cam, &[]);
        assert!(disc_extent(&behind, cam.target_color).is_none());
        let wall = [Rect::new(0.5, -0.5, 0.1, 1.0)];
        let occluded = render_frame(&Pose::default(), (1.0, 0.0), &cam, &wall);
        assert!(disc_extent(&occluded, cam.target_color).is_none());
    }
}
