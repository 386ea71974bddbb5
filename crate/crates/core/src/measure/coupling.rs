use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DiscreteMeasure, Particle, Point};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Sparse nonnegative measure on (source particle, target point) pairs.
#[derive(Clone, Debug)]
pub struct Coupling {
    source: Arc<DiscreteMeasure>,
    targets: Vec<Point>,
    pairs: Vec<Pair>,
}

/// Tolerance of the first-marginal check on normalized weights.
pub const MARGINAL_TOL: f64 = 1e-12;

impl Coupling {
    /// Builds a coupling and checks that its first marginal is the source measure.
    pub fn new(source: Arc<DiscreteMeasure>, targets: Vec<Point>, pairs: Vec<Pair>) -> Result<Self> {
        let c = Self::new_unchecked(source, targets, pairs)?;
        let defect = c.first_marginal_defect();
        if defect > MARGINAL_TOL {
            return Err(Error::Invalid(format!("first marginal differs from the source by {defect:e}")));
        }
        Ok(c)
    }

    /// Like [`Coupling::new`] without the marginal check; indices and weights are still validated.
    pub fn new_unchecked(source: Arc<DiscreteMeasure>, targets: Vec<Point>, pairs: Vec<Pair>) -> Result<Self> {
        for t in &targets {
            source.space().ensure_same(&t.space)?;
        }
        for (k, p) in pairs.iter().enumerate() {
            if p.source >= source.len() || p.target >= targets.len() {
                return Err(Error::Invalid(format!("pair {k} references ({}, {}) out of range", p.source, p.target)));
            }
            if !(p.weight >= 0.0 && p.weight.is_finite()) {
                return Err(Error::Invalid(format!("pair {k} has weight {}", p.weight)));
            }
        }
        Ok(Coupling { source, targets, pairs })
    }

    /// Coupling `μ ⊗ δ_o`.
    pub fn product_with_dirac(source: Arc<DiscreteMeasure>, o: Point) -> Result<Self> {
        let pairs = (0..source.len()).map(|i| Pair { source: i, target: 0, weight: source.weight(i) }).collect();
        Self::new(source, vec![o], pairs)
    }

    /// Coupling that sends each particle to itself.
    pub fn diagonal(source: Arc<DiscreteMeasure>) -> Result<Self> {
        let targets = source.particles().iter().map(|p| p.point.clone()).collect();
        let pairs = (0..source.len()).map(|i| Pair { source: i, target: i, weight: source.weight(i) }).collect();
        Self::new(source, targets, pairs)
    }

    /// Coupling induced by a map: particle i goes to `images[i]` with its full weight.
    pub fn from_map(source: Arc<DiscreteMeasure>, images: Vec<Point>) -> Result<Self> {
        if images.len() != source.len() {
            return Err(Error::DimensionMismatch { expected: source.len(), found: images.len() });
        }
        let pairs = (0..source.len()).map(|i| Pair { source: i, target: i, weight: source.weight(i) }).collect();
        Self::new(source, images, pairs)
    }

    pub fn source(&self) -> &Arc<DiscreteMeasure> {
        &self.source
    }
    pub fn targets(&self) -> &[Point] {
        &self.targets
    }
    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }
    pub fn total_mass(&self) -> f64 {
        self.pairs.iter().map(|p| p.weight).sum()
    }

    /// Sum of pair weights grouped by source index.
    pub fn first_marginal_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.source.len()];
        for p in &self.pairs {
            w[p.source] += p.weight;
        }
        w
    }

    pub fn second_marginal_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.targets.len()];
        for p in &self.pairs {
            w[p.target] += p.weight;
        }
        w
    }

    /// Largest particle-wise gap between the first marginal and the source, on normalized weights.
    pub fn first_marginal_defect(&self) -> f64 {
        let total = self.source.total_mass();
        let scale = if total > 0.0 { 1.0 / total } else { 1.0 };
        self.first_marginal_weights()
            .iter()
            .zip(self.source.particles())
            .map(|(w, p)| ((w - p.weight) * scale).abs())
            .fold(0.0, f64::max)
    }

    pub fn marginal(&self, side: Side) -> Result<DiscreteMeasure> {
        let (points, weights): (Vec<&Point>, Vec<f64>) = match side {
            Side::First => (self.source.particles().iter().map(|p| &p.point).collect(), self.first_marginal_weights()),
            Side::Second => (self.targets.iter().collect(), self.second_marginal_weights()),
        };
        let particles = points
            .into_iter()
            .zip(weights)
            .map(|(point, weight)| Particle { point: point.clone(), weight })
            .collect();
        DiscreteMeasure::new(self.source.space(), particles, None)
    }

    /// Replaces the weights, keeping support and targets.
    pub fn reweighted(&self, source: Arc<DiscreteMeasure>, weight: impl Fn(&Pair) -> f64) -> Result<Self> {
        let pairs = self.pairs.iter().map(|p| Pair { weight: weight(p), ..*p }).collect();
        Self::new(source, self.targets.clone(), pairs)
    }
}

/// On-disk form of a coupling: `{"pairs": [[i, j, w], ...], "targets": [[...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingRecord {
    pub pairs: Vec<(usize, usize, f64)>,
    pub targets: Vec<Vec<f64>>,
}

impl From<&Coupling> for CouplingRecord {
    fn from(c: &Coupling) -> Self {
        CouplingRecord {
            pairs: c.pairs.iter().map(|p| (p.source, p.target, p.weight)).collect(),
            targets: c.targets.iter().map(|t| t.coords.clone()).collect(),
        }
    }
}

impl CouplingRecord {
    pub fn into_coupling(self, source: Arc<DiscreteMeasure>) -> Result<Coupling> {
        let space = source.space();
        let targets = self.targets.into_iter().map(|c| Point::new(space, c)).collect::<Result<Vec<_>>>()?;
        let pairs = self.pairs.into_iter().map(|(source, target, weight)| Pair { source, target, weight }).collect();
        Coupling::new(source, targets, pairs)
    }
}
