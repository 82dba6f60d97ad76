//! Moving-average cube pose smoothing with a validity check: estimates
//! that are both stale and low-confidence are dropped and the previous
//! output is held.

use crate::error::{Error, Result};
use crate::geom::{CubePose, UnitQuat, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFilterConfig {
    /// Blend weight for a valid new estimate; 1 passes estimates through.
    pub alpha: f64,
    /// Estimates with confidence above this count as valid.
    pub confidence_threshold: f64,
    /// Estimates with delay below this count as valid.
    pub delay_threshold: u32,
}

impl Default for PoseFilterConfig {
    /// The blend weight is tuned so the filter pays for itself on the
    /// noisy Lift task without adding material lag while the cube moves.
    fn default() -> PoseFilterConfig {
        PoseFilterConfig { alpha: 0.8, confidence_threshold: 0.5, delay_threshold: 3 }
    }
}

impl PoseFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "smoothing weight must be in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Incremental form of the smoother, usable inside a control loop.
#[derive(Debug, Clone)]
pub struct PoseFilter {
    cfg: PoseFilterConfig,
    state: Option<CubePose>,
}

impl PoseFilter {
    pub fn new(cfg: PoseFilterConfig) -> PoseFilter {
        PoseFilter { cfg, state: None }
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    /// Feeds one estimate and returns the smoothed pose. The first
    /// estimate initializes the filter unconditionally.
    pub fn push(&mut self, pose: &CubePose, confidence: f64, delay: u32) -> CubePose {
        let prev = match self.state {
            None => {
                self.state = Some(*pose);
                return *pose;
            }
            Some(p) => p,
        };
        let valid =
            delay < self.cfg.delay_threshold || confidence > self.cfg.confidence_threshold;
        if !valid {
            return prev;
        }
        let a = self.cfg.alpha;
        let position = Vec3::new(
            (1.0 - a) * prev.position.x + a * pose.position.x,
            (1.0 - a) * prev.position.y + a * pose.position.y,
            (1.0 - a) * prev.position.z + a * pose.position.z,
        );
        // Hemisphere-aligned normalized linear blend.
        let mut q = pose.orientation;
        if prev.orientation.dot(q) < 0.0 {
            q = UnitQuat { w: -q.w, x: -q.x, y: -q.y, z: -q.z };
        }
        let orientation = UnitQuat::from_unnormalized(
            (1.0 - a) * prev.orientation.w + a * q.w,
            (1.0 - a) * prev.orientation.x + a * q.x,
            (1.0 - a) * prev.orientation.y + a * q.y,
            (1.0 - a) * prev.orientation.z + a * q.z,
        );
        let out = CubePose::new(position, orientation);
        self.state = Some(out);
        out
    }
}

/// Smooths a whole recorded stream of (pose, confidence, delay) estimates.
pub fn smooth_pose_stream(
    estimates: &[(CubePose, f64, u32)],
    cfg: &PoseFilterConfig,
) -> Result<Vec<CubePose>> {
    cfg.validate()?;
    if estimates.is_empty() {
        return Err(Error::InvalidInput("pose stream must be non-empty".into()));
    }
    let mut filter = PoseFilter::new(*cfg);
    Ok(estimates.iter().map(|(p, c, d)| filter.push(p, *c, *d)).collect())
}
