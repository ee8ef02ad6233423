use nalgebra::Vector4;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::filter::TargetModel;
use crate::geometry::{Axis, Point};

use super::WorldMap;

/// Reflections attempted in one step before the position is clamped.
pub const MAX_REFLECTIONS: usize = 4;

/// Default std of the velocity jitter added on reflection, as a fraction of speed.
pub const DEFAULT_REFLECT_JITTER: f64 = 0.1;

/// True target state: position then velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetState {
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
}

impl TargetState {
    pub fn new(px: f64, py: f64, vx: f64, vy: f64) -> Self {
        Self { px, py, vx, vy }
    }

    pub fn position(&self) -> Point {
        Point::new(self.px, self.py)
    }

    pub fn speed(&self) -> f64 {
        libm::hypot(self.vx, self.vy)
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.px, self.py, self.vx, self.vy)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// First wall or obstacle face crossed by `a -> b`.
fn first_crossing(map: &WorldMap, a: Point, b: Point) -> Option<Axis> {
    let mut best = map.bounds().segment_exit(a, b);
    for o in map.obstacles() {
        if let Some(hit) = o.segment_entry(a, b) {
            if best.is_none_or(|h| hit.t < h.t) {
                best = Some(hit);
            }
        }
    }
    best.map(|h| h.axis)
}

/// Advance one target under the double-integrator model with additive
/// process noise `w ~ N(0, W)`.
///
/// When the nominal step crosses a face, the velocity component normal to
/// that face is negated, jittered by `N(0, (jitter·speed)²)` per component,
/// and the step is redone from the pre-step position.
pub fn step_target<R: Rng + ?Sized>(
    y: &TargetState,
    map: &WorldMap,
    model: &TargetModel,
    jitter: f64,
    rng: &mut R,
) -> TargetState {
    let w = model.sample_process_noise(rng);
    let tau = model.tau();
    let start = y.position();
    let (mut vx, mut vy) = (y.vx, y.vy);

    for attempt in 0..=MAX_REFLECTIONS {
        let next = Point::new(start.x + tau * vx + w[0], start.y + tau * vy + w[1]);
        let Some(axis) = first_crossing(map, start, next) else {
            return TargetState::new(next.x, next.y, vx + w[2], vy + w[3]);
        };
        if attempt == MAX_REFLECTIONS {
            break;
        }
        match axis {
            Axis::X => vx = -vx,
            Axis::Y => vy = -vy,
        }
        if jitter > 0.0 {
            let s = jitter * libm::hypot(vx, vy);
            let ex: f64 = rng.sample(StandardNormal);
            let ey: f64 = rng.sample(StandardNormal);
            vx += s * ex;
            vy += s * ey;
        }
    }

    // Still crossing: clamp into the arena, falling back to the start point.
    let b = map.bounds();
    let mut p = Point::new(
        (start.x + tau * vx + w[0]).clamp(b.min.x, b.max.x),
        (start.y + tau * vy + w[1]).clamp(b.min.y, b.max.y),
    );
    if !map.segment_is_free(start, p) {
        p = start;
    }
    TargetState::new(p.x, p.y, vx + w[2], vy + w[3])
}
