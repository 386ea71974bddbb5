use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies the model space a coordinate vector lives in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceTag {
    /// ℝᵈ with the Euclidean metric.
    Euclid(usize),
    /// ℍⁿ in exponential coordinates (ξ, η, t).
    Heisenberg(usize),
    /// Unit sphere S² ⊂ ℝ³ with the great-circle metric.
    Sphere2,
    /// Flat cone of total angle `theta`, intrinsic coordinates (r, φ).
    Cone { theta: f64 },
}

impl SpaceTag {
    pub fn ambient_dim(&self) -> usize {
        match *self {
            SpaceTag::Euclid(d) => d,
            SpaceTag::Heisenberg(n) => 2 * n + 1,
            SpaceTag::Sphere2 => 3,
            SpaceTag::Cone { .. } => 2,
        }
    }

    /// Registry key of the space family.
    pub fn kind(&self) -> &'static str {
        match self {
            SpaceTag::Euclid(_) => "euclid",
            SpaceTag::Heisenberg(_) => "heis",
            SpaceTag::Sphere2 => "sphere2",
            SpaceTag::Cone { .. } => "cone",
        }
    }

    pub fn name(&self) -> String {
        match *self {
            SpaceTag::Euclid(d) => format!("euclid{d}"),
            SpaceTag::Heisenberg(n) => format!("heis{n}"),
            SpaceTag::Sphere2 => "sphere2".into(),
            SpaceTag::Cone { .. } => "cone".into(),
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            SpaceTag::Cone { theta } => Some(theta),
            _ => None,
        }
    }

    /// Parses `euclid<d>`, `heis<n>`, `sphere2` or `cone` (the latter needs `theta`).
    pub fn parse(name: &str, theta: Option<f64>) -> Result<Self> {
        let num = |prefix: &str| -> Result<usize> {
            name[prefix.len()..]
                .parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| Error::Invalid(format!("bad space tag `{name}`")))
        };
        if name == "sphere2" {
            Ok(SpaceTag::Sphere2)
        } else if name == "cone" {
            let theta = theta.ok_or_else(|| Error::Invalid("cone space needs `theta`".into()))?;
            if !(theta > 0.0 && theta <= std::f64::consts::TAU) {
                return Err(Error::OutOfRange(format!("cone angle {theta} not in (0, 2π]")));
            }
            Ok(SpaceTag::Cone { theta })
        } else if name.starts_with("euclid") {
            Ok(SpaceTag::Euclid(num("euclid")?))
        } else if name.starts_with("heis") {
            Ok(SpaceTag::Heisenberg(num("heis")?))
        } else {
            Err(Error::Invalid(format!("unknown space tag `{name}`")))
        }
    }

    pub(crate) fn ensure_same(&self, other: &SpaceTag) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { expected: self.name(), found: other.name() })
        }
    }
}

impl fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.theta() {
            Some(theta) => write!(f, "cone(θ={theta})"),
            None => f.write_str(&self.name()),
        }
    }
}

/// A point of a model space: finite coordinates plus the tag of the space.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub space: SpaceTag,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(space: SpaceTag, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != space.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: space.ambient_dim(), found: coords.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!("non-finite coordinates {coords:?}")));
        }
        Ok(Point { space, coords })
    }

    pub fn euclid(coords: &[f64]) -> Self {
        Point { space: SpaceTag::Euclid(coords.len()), coords: coords.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Plain JSON form of a point: `{"space": ..., "theta": ..., "coords": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub space: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub coords: Vec<f64>,
}

impl From<&Point> for PointRecord {
    fn from(p: &Point) -> Self {
        PointRecord { space: p.space.name(), theta: p.space.theta(), coords: p.coords.clone() }
    }
}

impl TryFrom<PointRecord> for Point {
    type Error = Error;
    fn try_from(r: PointRecord) -> Result<Self> {
        Point::new(SpaceTag::parse(&r.space, r.theta)?, r.coords)
    }
}
