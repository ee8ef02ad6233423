//! Planar geometry helpers: angle wrapping, axis-aligned rectangles and
//! segment/rectangle intersection tests.

use core::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Wrap an angle into the half-open interval `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut w = angle - TWO_PI * libm::floor((angle + PI) / TWO_PI);
    if w <= -PI {
        w += TWO_PI;
    }
    if w > PI {
        w -= TWO_PI;
    }
    w
}

/// Unnormalized cardinal sine `sin(u)/u` with `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-9 {
        // Taylor series; the truncation error is far below f64 resolution here.
        1.0 - u * u / 6.0
    } else {
        libm::sin(u) / u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        libm::hypot(other.x - self.x, other.y - self.y)
    }
}

/// Coordinate axis a face is normal to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

/// Where a segment first touches a rectangle face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentHit {
    /// Segment parameter in `[0, 1]`.
    pub t: f64,
    /// Axis the crossed face is normal to.
    pub axis: Axis,
}

impl Rect {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min: Point::new(min_x, min_y),
            max: Point::new(max_x, max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// True when `other` lies in the open interior of `self`.
    pub fn strictly_contains_rect(&self, other: &Rect) -> bool {
        other.min.x > self.min.x
            && other.min.y > self.min.y
            && other.max.x < self.max.x
            && other.max.y < self.max.y
    }

    /// True when the closed rectangles share at least one point.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    /// The four boundary edges, counter-clockwise from the bottom-left corner.
    pub fn edges(&self) -> [(Point, Point); 4] {
        let a = self.min;
        let b = Point::new(self.max.x, self.min.y);
        let c = self.max;
        let d = Point::new(self.min.x, self.max.y);
        [(a, b), (b, c), (c, d), (d, a)]
    }

    /// Slab test: first point where segment `a -> b` enters the closed
    /// rectangle. A segment starting inside reports `t = 0`.
    pub fn segment_entry(&self, a: Point, b: Point) -> Option<SegmentHit> {
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        let mut axis = Axis::X;
        for (ax, a0, d, lo, hi) in [
            (Axis::X, a.x, b.x - a.x, self.min.x, self.max.x),
            (Axis::Y, a.y, b.y - a.y, self.min.y, self.max.y),
        ] {
            if d == 0.0 {
                if a0 < lo || a0 > hi {
                    return None;
                }
                continue;
            }
            let mut t_near = (lo - a0) / d;
            let mut t_far = (hi - a0) / d;
            if t_near > t_far {
                core::mem::swap(&mut t_near, &mut t_far);
            }
            if t_near > t_enter {
                t_enter = t_near;
                axis = ax;
            }
            t_exit = t_exit.min(t_far);
        }
        if t_enter > t_exit || t_enter > 1.0 || t_exit < 0.0 {
            return None;
        }
        Some(SegmentHit {
            t: t_enter.max(0.0),
            axis,
        })
    }

    /// First point where segment `a -> b` (with `a` inside) leaves the
    /// rectangle, if it does.
    pub fn segment_exit(&self, a: Point, b: Point) -> Option<SegmentHit> {
        let mut best: Option<SegmentHit> = None;
        for (ax, a0, b0, lo, hi) in [
            (Axis::X, a.x, b.x, self.min.x, self.max.x),
            (Axis::Y, a.y, b.y, self.min.y, self.max.y),
        ] {
            let bound = if b0 > hi {
                hi
            } else if b0 < lo {
                lo
            } else {
                continue;
            };
            let t = ((bound - a0) / (b0 - a0)).clamp(0.0, 1.0);
            if best.is_none_or(|h| t < h.t) {
                best = Some(SegmentHit { t, axis: ax });
            }
        }
        best
    }
}

/// Closest point to `p` on segment `a -> b`.
pub fn closest_point_on_segment(p: Point, a: Point, b: Point) -> Point {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    Point::new(a.x + t * dx, a.y + t * dy)
}

/// Intersection of the ray `origin + s·(cos φ, sin φ)`, `s ≥ 0`, with segment
/// `a -> b`, as a point on the segment.
pub fn ray_segment_intersection(origin: Point, heading: f64, a: Point, b: Point) -> Option<Point> {
    let (dy, dx) = (libm::sin(heading), libm::cos(heading));
    let ex = b.x - a.x;
    let ey = b.y - a.y;
    let denom = dx * ey - dy * ex;
    if denom.abs() < 1e-15 {
        return None;
    }
    let wx = a.x - origin.x;
    let wy = a.y - origin.y;
    let s = (wx * ey - wy * ex) / denom;
    let u = (wx * dy - wy * dx) / denom;
    if s < 0.0 || !(0.0..=1.0).contains(&u) {
        return None;
    }
    Some(Point::new(a.x + u * ex, a.y + u * ey))
}
