use core::f64::consts::FRAC_PI_2;

use crate::geometry::{sinc, wrap_angle, Point};

use super::WorldMap;

/// Robot SE(2) configuration. `theta` is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Polar coordinates `(range, bearing)` of a world point in this frame.
    pub fn polar_of(&self, p: Point) -> (f64, f64) {
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        (
            libm::hypot(dx, dy),
            wrap_angle(libm::atan2(dy, dx) - self.theta),
        )
    }
}

/// Linear speeds of the discrete action set, m/s.
pub const LINEAR_SPEEDS: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
/// Angular speeds of the discrete action set, rad/s.
pub const ANGULAR_SPEEDS: [f64; 3] = [0.0, -FRAC_PI_2, FRAC_PI_2];
/// Size of the action set.
pub const NUM_ACTIONS: usize = LINEAR_SPEEDS.len() * ANGULAR_SPEEDS.len();

/// A `(ν, ω)` pair held for one sampling period.
///
/// Action indices are `3 * nu_index + omega_index`, so index 0 is "stay",
/// 1 and 2 rotate in place clockwise and counter-clockwise, and index 9 is
/// full speed straight ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPrimitive {
    pub nu: f64,
    pub omega: f64,
}

impl MotionPrimitive {
    pub fn from_index(index: usize) -> Option<Self> {
        (index < NUM_ACTIONS).then(|| Self {
            nu: LINEAR_SPEEDS[index / ANGULAR_SPEEDS.len()],
            omega: ANGULAR_SPEEDS[index % ANGULAR_SPEEDS.len()],
        })
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..NUM_ACTIONS).filter_map(Self::from_index)
    }
}

/// Unconstrained differential-drive update over one period `tau`.
pub fn integrate_unicycle(pose: Pose, a: MotionPrimitive, tau: f64) -> Pose {
    let half = a.omega * tau / 2.0;
    let chord = a.nu * tau * sinc(half);
    let heading = pose.theta + half;
    Pose::new(
        pose.x + chord * libm::cos(heading),
        pose.y + chord * libm::sin(heading),
        pose.theta + tau * a.omega,
    )
}

/// Advance the robot by one motion primitive.
///
/// If the straight chord to the new position leaves the map or touches an
/// obstacle, the robot stays where it was but still turns by `tau * omega`.
pub fn step_robot(pose: Pose, a: MotionPrimitive, tau: f64, map: &WorldMap) -> Pose {
    let next = integrate_unicycle(pose, a, tau);
    if map.segment_is_free(pose.position(), next.position()) {
        next
    } else {
        Pose::new(pose.x, pose.y, next.theta)
    }
}
