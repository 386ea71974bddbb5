//! Weighted particle clouds, couplings and the grid estimators built on them.

mod coupling;
mod estimate;
mod geodesic;
mod grid;
mod point;

pub use coupling::{Coupling, CouplingRecord, Pair, Side};
pub use estimate::{
    capped_singularity_score, cell_masses, cloud_reference, concentrated_mass, eps_neighborhood_mass, singular_excess, singularity_score,
    AnalyticReference, CellReference, HaarReference, NeighborhoodIndex, ParticleReference, DEFAULT_MAX_CELLS,
};
pub use geodesic::GeodesicSegment;
pub(crate) use estimate::union_grid;
pub use grid::{CellKey, GridIndex, GridSpec};
pub use point::{Point, PointRecord, SpaceTag};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euclid::ConvexBody;

/// Analytic description of the measure a particle cloud samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Descriptor {
    UniformOnBody { body: ConvexBody },
    SphereSurface,
    ConeSurface { theta: f64, max_radius: f64 },
    /// Haar (= Lebesgue) measure restricted to a coordinate box.
    HaarBox { lo: Vec<f64>, hi: Vec<f64> },
    AtomList,
}

impl Descriptor {
    /// Total analytic mass of the described set, when it is finite and known.
    pub fn volume(&self) -> Option<f64> {
        match self {
            Descriptor::UniformOnBody { body } => body.volume().ok(),
            Descriptor::SphereSurface => Some(4.0 * std::f64::consts::PI),
            Descriptor::ConeSurface { theta, max_radius } => Some(0.5 * theta * max_radius * max_radius),
            Descriptor::HaarBox { lo, hi } => Some(lo.iter().zip(hi).map(|(a, b)| b - a).product()),
            Descriptor::AtomList => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub point: Point,
    pub weight: f64,
}

/// Nonnegative weighted particle cloud over one model space.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    space: SpaceTag,
    particles: Vec<Particle>,
    descriptor: Option<Descriptor>,
    total_mass: f64,
}

impl DiscreteMeasure {
    pub fn new(space: SpaceTag, particles: Vec<Particle>, descriptor: Option<Descriptor>) -> Result<Self> {
        for (i, p) in particles.iter().enumerate() {
            space.ensure_same(&p.point.space)?;
            if p.point.coords.len() != space.ambient_dim() {
                return Err(Error::DimensionMismatch { expected: space.ambient_dim(), found: p.point.coords.len() });
            }
            if !(p.weight >= 0.0 && p.weight.is_finite()) {
                return Err(Error::Invalid(format!("weight {} of particle {i} is not a finite nonnegative number", p.weight)));
            }
        }
        let total_mass = particles.iter().map(|p| p.weight).sum();
        Ok(DiscreteMeasure { space, particles, descriptor, total_mass })
    }

    /// Builds a measure from raw coordinate rows, all with the same weight.
    pub fn uniform(space: SpaceTag, coords: Vec<Vec<f64>>, weight: f64, descriptor: Option<Descriptor>) -> Result<Self> {
        let particles = coords
            .into_iter()
            .map(|c| Point::new(space, c).map(|point| Particle { point, weight }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, particles, descriptor)
    }

    pub fn from_weighted(space: SpaceTag, atoms: Vec<(Vec<f64>, f64)>, descriptor: Option<Descriptor>) -> Result<Self> {
        let particles = atoms
            .into_iter()
            .map(|(c, weight)| Point::new(space, c).map(|point| Particle { point, weight }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(space, particles, descriptor)
    }

    pub fn dirac(point: Point, mass: f64) -> Result<Self> {
        let space = point.space;
        Self::new(space, vec![Particle { point, weight: mass }], Some(Descriptor::AtomList))
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }
    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }
    pub fn descriptor(&self) -> Option<&Descriptor> {
        self.descriptor.as_ref()
    }
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
    pub fn len(&self) -> usize {
        self.particles.len()
    }
    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
    pub fn coords(&self, i: usize) -> &[f64] {
        &self.particles[i].point.coords
    }
    pub fn weight(&self, i: usize) -> f64 {
        self.particles[i].weight
    }
    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn with_descriptor(mut self, descriptor: Option<Descriptor>) -> Self {
        self.descriptor = descriptor;
        self
    }

    /// Same particles scaled to total mass 1.
    pub fn normalized(&self) -> Result<Self> {
        if self.total_mass <= 0.0 {
            return Err(Error::Invalid("cannot normalize a measure of zero mass".into()));
        }
        self.scaled(1.0 / self.total_mass)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let particles = self
            .particles
            .iter()
            .map(|p| Particle { point: p.point.clone(), weight: p.weight * factor })
            .collect();
        Self::new(self.space, particles, self.descriptor.clone())
    }

    /// Restriction to the particles accepted by `keep`; the descriptor is dropped.
    pub fn restrict(&self, mut keep: impl FnMut(&Point) -> bool) -> Self {
        let particles: Vec<Particle> = self.particles.iter().filter(|p| keep(&p.point)).cloned().collect();
        let total_mass = particles.iter().map(|p| p.weight).sum();
        DiscreteMeasure { space: self.space, particles, descriptor: None, total_mass }
    }

    /// Coordinate-wise bounding box of the particle locations.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let first = self.particles.first()?;
        let mut lo = first.point.coords.clone();
        let mut hi = lo.clone();
        for p in &self.particles[1..] {
            for (k, &c) in p.point.coords.iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        Some((lo, hi))
    }

    /// Largest particle-wise weight difference after normalizing both sides.
    pub fn weight_defect(&self, other: &DiscreteMeasure) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        let (a, b) = (norm_factor(self.total_mass), norm_factor(other.total_mass));
        Ok(self
            .particles
            .iter()
            .zip(&other.particles)
            .map(|(p, q)| (p.weight * a - q.weight * b).abs())
            .fold(0.0, f64::max))
    }
}

fn norm_factor(mass: f64) -> f64 {
    if mass > 0.0 {
        1.0 / mass
    } else {
        1.0
    }
}

/// Pushes every particle through `map`, keeping its weight.
pub fn pushforward(measure: &DiscreteMeasure, mut map: impl FnMut(&Point) -> Point) -> Result<DiscreteMeasure> {
    let mut particles = Vec::with_capacity(measure.len());
    let mut space = None;
    for (index, p) in measure.particles.iter().enumerate() {
        let image = map(&p.point);
        if image.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let tag = *space.get_or_insert(image.space);
        tag.ensure_same(&image.space)?;
        if image.coords.len() != tag.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: tag.ambient_dim(), found: image.coords.len() });
        }
        particles.push(Particle { point: image, weight: p.weight });
    }
    let total_mass = particles.iter().map(|p| p.weight).sum();
    Ok(DiscreteMeasure { space: space.unwrap_or(measure.space), particles, descriptor: None, total_mass })
}

/// On-disk form of a measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureRecord {
    pub space: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub particles: Vec<(Vec<f64>, f64)>,
    #[serde(default)]
    pub descriptor: Option<Descriptor>,
}

impl From<&DiscreteMeasure> for MeasureRecord {
    fn from(m: &DiscreteMeasure) -> Self {
        MeasureRecord {
            space: m.space.name(),
            theta: m.space.theta(),
            particles: m.particles.iter().map(|p| (p.point.coords.clone(), p.weight)).collect(),
            descriptor: m.descriptor.clone(),
        }
    }
}

impl TryFrom<MeasureRecord> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: MeasureRecord) -> Result<Self> {
        let space = SpaceTag::parse(&r.space, r.theta)?;
        DiscreteMeasure::from_weighted(space, r.particles, r.descriptor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_cloud(n: usize) -> DiscreteMeasure {
        let side = (n as f64).sqrt() as usize;
        let coords = (0..side * side)
            .map(|k| vec![(k % side) as f64 / side as f64, (k / side) as f64 / side as f64])
            .collect();
        DiscreteMeasure::uniform(SpaceTag::Euclid(2), coords, 1.0 / (side * side) as f64, None).unwrap()
    }

    #[test]
    fn pushforward_identity_and_translation() {
        let m = square_cloud(100);
        let same = pushforward(&m, |p| p.clone()).unwrap();
        assert_eq!(same.particles(), m.particles());
        assert_eq!(same.total_mass().to_bits(), m.total_mass().to_bits());

        let atom = DiscreteMeasure::dirac(Point::euclid(&[0.0, 0.0]), 1.0).unwrap();
        let moved = pushforward(&atom, |p| Point::euclid(&[p.coords[0] + 1.0, p.coords[1] + 2.0])).unwrap();
        assert_eq!(moved.coords(0), &[1.0, 2.0]);
        assert_eq!(moved.weight(0), 1.0);
    }

    #[test]
    fn pushforward_halving_halves_diameter() {
        let m = square_cloud(100);
        let half = pushforward(&m, |p| Point::euclid(&[p.coords[0] / 2.0, p.coords[1] / 2.0])).unwrap();
        let diam = |m: &DiscreteMeasure| {
            let mut best = 0.0f64;
            for i in 0..m.len() {
                for j in 0..m.len() {
                    let (a, b) = (m.coords(i), m.coords(j));
                    best = best.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
                }
            }
            best
        };
        assert!((diam(&half) - diam(&m) / 2.0).abs() < 1e-15);
        assert_eq!(half.total_mass(), m.total_mass());
    }

    #[test]
    fn pushforward_reports_nonfinite_index() {
        let m = square_cloud(16);
        let err = pushforward(&m, |p| {
            if p.coords == [0.25, 0.25] {
                Point { space: p.space, coords: vec![f64::NAN, 0.0] }
            } else {
                p.clone()
            }
        })
        .unwrap_err();
        assert_eq!(err, Error::NonFinite { index: 5 });
    }

    #[test]
    fn negative_weights_and_mixed_spaces_rejected() {
        assert!(DiscreteMeasure::from_weighted(SpaceTag::Euclid(1), vec![(vec![0.0], -1.0)], None).is_err());
        let p = Particle { point: Point::new(SpaceTag::Heisenberg(1), vec![0.0; 3]).unwrap(), weight: 1.0 };
        assert!(DiscreteMeasure::new(SpaceTag::Euclid(3), vec![p], None).is_err());
    }

    #[test]
    fn record_round_trip() {
        let m = square_cloud(9).with_descriptor(Some(Descriptor::HaarBox { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }));
        let json = serde_json::to_string(&MeasureRecord::from(&m)).unwrap();
        let back: DiscreteMeasure = serde_json::from_str::<MeasureRecord>(&json).unwrap().try_into().unwrap();
        assert_eq!(back, m);
    }
}
