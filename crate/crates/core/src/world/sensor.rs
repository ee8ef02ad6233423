use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{closest_point_on_segment, ray_segment_intersection, wrap_angle, Point};

use super::{Pose, TargetState, WorldMap};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensorError {
    #[error("max_range must be positive, got {0}")]
    Range(f64),
    #[error("field of view must be in (0, 2π], got {0}")]
    FieldOfView(f64),
    #[error("noise standard deviations must be non-negative")]
    Noise,
}

/// Range-bearing sensor parameters. `fov` is the total aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensorSpec {
    pub max_range: f64,
    pub fov: f64,
    pub sigma_r: f64,
    pub sigma_b: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            max_range: 10.0,
            fov: 2.0 * PI / 3.0,
            sigma_r: 0.2,
            sigma_b: 0.01,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(self.max_range > 0.0) {
            return Err(SensorError::Range(self.max_range));
        }
        if !(self.fov > 0.0 && self.fov <= 2.0 * PI) {
            return Err(SensorError::FieldOfView(self.fov));
        }
        if !(self.sigma_r >= 0.0 && self.sigma_b >= 0.0) {
            return Err(SensorError::Noise);
        }
        Ok(())
    }

    pub fn noiseless(self) -> Self {
        Self {
            sigma_r: 0.0,
            sigma_b: 0.0,
            ..self
        }
    }

    fn in_fov(&self, bearing: f64) -> bool {
        self.fov >= 2.0 * PI || bearing.abs() <= self.fov / 2.0
    }

    /// Range, aperture and line-of-sight test for a world point.
    pub fn can_see(&self, pose: &Pose, p: Point, map: &WorldMap) -> bool {
        let (r, alpha) = pose.polar_of(p);
        r <= self.max_range && self.in_fov(alpha) && map.line_of_sight(pose.position(), p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RangeBearing {
    pub r: f64,
    pub alpha: f64,
}

/// One target's reading for a time step; `reading` is `None` when the target
/// was not detected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub target_id: usize,
    pub reading: Option<RangeBearing>,
}

impl Measurement {
    pub fn detected(&self) -> bool {
        self.reading.is_some()
    }
}

/// Noise-free observation model `h(x, y)`.
pub fn range_bearing(pose: &Pose, p: Point) -> RangeBearing {
    let (r, alpha) = pose.polar_of(p);
    RangeBearing { r, alpha }
}

/// Sense one target. Detection requires range, aperture and an unoccluded
/// line of sight; detected readings carry additive Gaussian noise.
pub fn observe<R: Rng + ?Sized>(
    pose: &Pose,
    target_id: usize,
    y: &TargetState,
    spec: &SensorSpec,
    map: &WorldMap,
    rng: &mut R,
) -> Measurement {
    if !spec.can_see(pose, y.position(), map) {
        return Measurement {
            target_id,
            reading: None,
        };
    }
    let h = range_bearing(pose, y.position());
    let nr: f64 = rng.sample(StandardNormal);
    let nb: f64 = rng.sample(StandardNormal);
    Measurement {
        target_id,
        reading: Some(RangeBearing {
            r: (h.r + spec.sigma_r * nr).max(0.0),
            alpha: wrap_angle(h.alpha + spec.sigma_b * nb),
        }),
    }
}

/// Nearest wall or obstacle point inside the sensor footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObstacleReading {
    pub range: f64,
    pub bearing: f64,
    pub detected: bool,
}

impl ObstacleReading {
    pub fn none(spec: &SensorSpec) -> Self {
        Self {
            range: spec.max_range,
            bearing: PI,
            detected: false,
        }
    }
}

/// Polar coordinates, in the robot frame, of the closest wall/obstacle surface
/// point within range and aperture; `(max_range, π)` when there is none.
pub fn closest_obstacle(pose: &Pose, spec: &SensorSpec, map: &WorldMap) -> ObstacleReading {
    const ANGLE_TOL: f64 = 1e-9;
    let origin = pose.position();
    let half = spec.fov / 2.0;
    let limited = spec.fov < 2.0 * PI;
    let mut best: Option<(f64, f64)> = None;

    for (a, b) in map.faces() {
        // The distance along a segment is convex, so over the visible
        // sub-intervals the minimum sits at the perpendicular foot or at an
        // interval end: a segment endpoint or a crossing with an aperture edge.
        let mut candidates = [None; 5];
        candidates[0] = Some(closest_point_on_segment(origin, a, b));
        candidates[1] = Some(a);
        candidates[2] = Some(b);
        if limited {
            candidates[3] = ray_segment_intersection(origin, pose.theta + half, a, b);
            candidates[4] = ray_segment_intersection(origin, pose.theta - half, a, b);
        }
        for p in candidates.into_iter().flatten() {
            let (r, alpha) = pose.polar_of(p);
            if r > spec.max_range || (limited && alpha.abs() > half + ANGLE_TOL) {
                continue;
            }
            if best.is_none_or(|(br, _)| r < br) {
                best = Some((r, alpha));
            }
        }
    }

    match best {
        Some((range, bearing)) => ObstacleReading {
            range,
            bearing,
            detected: true,
        },
        None => ObstacleReading::none(spec),
    }
}
