use std::fmt;

use super::Point;

type Evaluator = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Constant-speed geodesic `[0,1] → X` between two points.
pub struct GeodesicSegment {
    pub start: Point,
    pub end: Point,
    pub length: f64,
    /// False when the connecting geodesic is not unique and a canonical one was chosen.
    pub unique: bool,
    eval: Evaluator,
}

impl GeodesicSegment {
    pub fn new(start: Point, end: Point, length: f64, unique: bool, eval: Evaluator) -> Self {
        GeodesicSegment { start, end, length, unique, eval }
    }

    pub fn coords_at(&self, t: f64) -> Vec<f64> {
        (self.eval)(t)
    }

    pub fn point_at(&self, t: f64) -> Point {
        Point { space: self.start.space, coords: self.coords_at(t) }
    }
}

impl fmt::Debug for GeodesicSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeodesicSegment")
            .field("start", &self.start.coords)
            .field("end", &self.end.coords)
            .field("length", &self.length)
            .field("unique", &self.unique)
            .finish()
    }
}
