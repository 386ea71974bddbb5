//! The metric-space abstraction every model geometry implements, and a registry of them.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::euclid::EuclideanSpace;
use crate::heisenberg::HeisenbergSpace;
use crate::measure::{GeodesicSegment, SpaceTag};
use crate::modelspaces::{ConeSpace, Sphere2};

/// Coordinates of a point along the geodesic ray from a pole.
#[derive(Clone, Debug, PartialEq)]
pub struct RayChart {
    /// Unit vector naming the ray's initial direction.
    pub direction: Vec<f64>,
    /// Extra ray invariant beyond the direction (e.g. curvature of a Heisenberg geodesic).
    pub shape: Option<f64>,
    /// Arc length from the pole.
    pub arclength: f64,
}

pub trait MetricSpace: Send + Sync {
    fn tag(&self) -> SpaceTag;

    fn distance(&self, x: &[f64], y: &[f64]) -> f64;

    /// Constant-speed geodesic from `x` to `y`.
    fn segment(&self, x: &[f64], y: &[f64]) -> Result<GeodesicSegment>;

    /// Point at time `t` on the geodesic from `x` toward `o`.
    fn contract_toward(&self, x: &[f64], o: &[f64], t: f64) -> Result<Vec<f64>> {
        check_unit(t)?;
        Ok(self.segment(x, o)?.coords_at(t))
    }

    /// The point `x` with `contract_toward(x, o, t) = y`, if the geodesic from `o` through `y`
    /// extends far enough.
    fn contraction_preimage(&self, _y: &[f64], _o: &[f64], _t: f64) -> Result<Option<Vec<f64>>> {
        Err(Error::Unsupported { op: "contraction_preimage", space: self.tag().name() })
    }

    /// Whether `x` lies in the cut locus of `z`.
    fn cut_locus_member(&self, z: &[f64], x: &[f64]) -> Result<bool>;

    /// Whether the geodesic from `x` to `z` extends strictly beyond `z`.
    fn extends_beyond(&self, x: &[f64], z: &[f64]) -> bool;

    /// Ray coordinates of `x` seen from the pole `z`; `None` for `x = z` or unchartable points.
    fn ray_chart(&self, z: &[f64], x: &[f64]) -> Option<RayChart>;

    /// Coordinates used for grid indexing.
    fn index_coords(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    /// Area-faithful chart used to bin mass into cells; defaults to the index coordinates.
    fn cell_coords(&self, x: &[f64]) -> Vec<f64> {
        self.index_coords(x)
    }

    /// Box in index coordinates containing the closed metric ball of `radius` around `x`.
    fn index_box(&self, x: &[f64], radius: f64) -> (Vec<f64>, Vec<f64>) {
        let c = self.index_coords(x);
        (c.iter().map(|v| v - radius).collect(), c.iter().map(|v| v + radius).collect())
    }

    /// Dimension of the underlying manifold (Hausdorff dimension may differ).
    fn intrinsic_dim(&self) -> usize;

    /// Points whose geodesic to `z` is only canonically chosen (a null set to skip in sampling).
    fn is_exceptional(&self, _z: &[f64], _x: &[f64]) -> bool {
        false
    }
}

pub(crate) fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("time {t} not in [0, 1]")))
    }
}

pub type SpaceFactory = fn(&SpaceTag) -> Result<Box<dyn MetricSpace>>;

/// Name-keyed factories of model spaces.
pub struct SpaceRegistry {
    factories: BTreeMap<&'static str, SpaceFactory>,
}

impl SpaceRegistry {
    pub fn empty() -> Self {
        SpaceRegistry { factories: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("euclid", |tag| match *tag {
            SpaceTag::Euclid(d) => Ok(Box::new(EuclideanSpace::new(d))),
            _ => Err(Error::Invalid(format!("euclid factory cannot build {tag}"))),
        });
        r.register("heis", |tag| match *tag {
            SpaceTag::Heisenberg(n) => Ok(Box::new(HeisenbergSpace::new(n))),
            _ => Err(Error::Invalid(format!("heis factory cannot build {tag}"))),
        });
        r.register("sphere2", |_| Ok(Box::new(Sphere2)));
        r.register("cone", |tag| match *tag {
            SpaceTag::Cone { theta } => Ok(Box::new(ConeSpace::new(theta)?)),
            _ => Err(Error::Invalid(format!("cone factory cannot build {tag}"))),
        });
        r
    }

    pub fn register(&mut self, kind: &'static str, factory: SpaceFactory) {
        self.factories.insert(kind, factory);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn build(&self, tag: &SpaceTag) -> Result<Box<dyn MetricSpace>> {
        let factory = self
            .factories
            .get(tag.kind())
            .ok_or_else(|| Error::Invalid(format!("no space registered under `{}`", tag.kind())))?;
        factory(tag)
    }
}

/// Builds a space from the built-in registry.
pub fn space_for(tag: &SpaceTag) -> Result<Box<dyn MetricSpace>> {
    static REGISTRY: OnceLock<SpaceRegistry> = OnceLock::new();
    REGISTRY.get_or_init(SpaceRegistry::builtin).build(tag)
}
