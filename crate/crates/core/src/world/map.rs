use alloc::vec::Vec;

use crate::geometry::{Point, Rect};

/// Map validation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("map bounds must have positive width and height")]
    EmptyBounds,
    #[error("obstacle {0} is not strictly inside the map bounds")]
    ObstacleOutside(usize),
    #[error("obstacle {0} is degenerate")]
    DegenerateObstacle(usize),
    #[error("obstacles {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("unknown built-in map `{0}`")]
    UnknownLayout(alloc::string::String),
}

/// Rectangular arena with axis-aligned rectangular obstacles.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorldMap {
    bounds: Rect,
    obstacles: Vec<Rect>,
}

/// Names accepted by [`WorldMap::builtin`].
pub const BUILTIN_MAPS: [&str; 4] = ["empty-100", "empty-50", "empty-27", "obstacle-30"];

impl WorldMap {
    pub fn new(bounds: Rect, obstacles: Vec<Rect>) -> Result<Self, MapError> {
        if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
            return Err(MapError::EmptyBounds);
        }
        for (i, o) in obstacles.iter().enumerate() {
            if !(o.width() > 0.0 && o.height() > 0.0) {
                return Err(MapError::DegenerateObstacle(i));
            }
            if !bounds.strictly_contains_rect(o) {
                return Err(MapError::ObstacleOutside(i));
            }
            for (j, other) in obstacles.iter().enumerate().skip(i + 1) {
                if o.overlaps(other) {
                    return Err(MapError::Overlap(i, j));
                }
            }
        }
        Ok(Self { bounds, obstacles })
    }

    /// Obstacle-free square arena `[0, side]²`.
    pub fn empty(side: f64) -> Self {
        Self {
            bounds: Rect::new(0.0, 0.0, side, side),
            obstacles: Vec::new(),
        }
    }

    /// Built-in layouts:
    ///
    /// * `empty-100`, `empty-50`, `empty-27`: obstacle-free squares of that side length.
    /// * `obstacle-30`: 30×30 m arena with four rectangular blocks, one per
    ///   quadrant: `[5,10]×[5,11]`, `[19,25]×[6,10]`, `[6,10]×[19,24]` and
    ///   `[18,24]×[18,25]`.
    pub fn builtin(name: &str) -> Result<Self, MapError> {
        match name {
            "empty-100" => Ok(Self::empty(100.0)),
            "empty-50" => Ok(Self::empty(50.0)),
            "empty-27" => Ok(Self::empty(27.0)),
            "obstacle-30" => Self::new(
                Rect::new(0.0, 0.0, 30.0, 30.0),
                alloc::vec![
                    Rect::new(5.0, 5.0, 10.0, 11.0),
                    Rect::new(19.0, 6.0, 25.0, 10.0),
                    Rect::new(6.0, 19.0, 10.0, 24.0),
                    Rect::new(18.0, 18.0, 24.0, 25.0),
                ],
            ),
            other => Err(MapError::UnknownLayout(other.into())),
        }
    }

    pub fn bounds(&self) -> &Rect {
        &self.bounds
    }

    pub fn obstacles(&self) -> &[Rect] {
        &self.obstacles
    }

    /// Inside the bounds and outside every obstacle.
    pub fn is_free(&self, p: Point) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// True when segment `a -> b` touches no obstacle.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        self.obstacles.iter().all(|o| o.segment_entry(a, b).is_none())
    }

    /// True when segment `a -> b` stays in bounds and clear of obstacles.
    pub fn segment_is_free(&self, a: Point, b: Point) -> bool {
        self.bounds.contains(b) && self.line_of_sight(a, b)
    }

    /// Every wall and obstacle face.
    pub fn faces(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.bounds
            .edges()
            .into_iter()
            .chain(self.obstacles.iter().flat_map(|o| o.edges()))
    }

    /// Translate the whole map by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let shift = |r: &Rect| Rect::new(r.min.x + dx, r.min.y + dy, r.max.x + dx, r.max.y + dy);
        Self {
            bounds: shift(&self.bounds),
            obstacles: self.obstacles.iter().map(shift).collect(),
        }
    }
}
