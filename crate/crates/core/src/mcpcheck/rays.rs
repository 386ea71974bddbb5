use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::space::MetricSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub fraction: f64,
    pub sampled: usize,
    pub extending: usize,
    /// Samples at the pole or in its exceptional set, left out of the fraction.
    pub excluded: usize,
}

/// Fraction of sampled particles whose geodesic to `z` extends strictly beyond `z`.
///
/// Uses every particle when `samples ≥ len`.
pub fn ray_coverage<R: Rng + ?Sized>(
    measure: &DiscreteMeasure,
    space: &dyn MetricSpace,
    z: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<CoverageReport> {
    space.tag().ensure_same(&measure.space())?;
    let indices: Vec<usize> = if samples >= measure.len() {
        (0..measure.len()).collect()
    } else {
        (0..samples).map(|_| rng.random_range(0..measure.len())).collect()
    };
    let (mut extending, mut excluded) = (0, 0);
    for &i in &indices {
        let x = measure.coords(i);
        if space.distance(x, z) == 0.0 || space.is_exceptional(z, x) {
            excluded += 1;
        } else if space.extends_beyond(x, z) {
            extending += 1;
        }
    }
    let counted = indices.len() - excluded;
    if counted == 0 {
        return Err(Error::Invalid("no sampled particle away from the pole".into()));
    }
    Ok(CoverageReport { fraction: extending as f64 / counted as f64, sampled: indices.len(), extending, excluded })
}

/// `x ∈ C(y)` or `y ∈ C(x)`.
pub fn sc_membership(space: &dyn MetricSpace, x: &[f64], y: &[f64]) -> Result<bool> {
    if space.distance(x, y) == 0.0 {
        return Err(Error::Invalid("symmetric cut locus needs x ≠ y".into()));
    }
    Ok(space.cut_locus_member(y, x)? || space.cut_locus_member(x, y)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScScan {
    pub pairs: usize,
    pub hits: usize,
    pub frequency: f64,
}

/// Empirical frequency of random particle pairs in the symmetric cut locus.
pub fn sc_frequency<R: Rng + ?Sized>(
    measure: &DiscreteMeasure,
    space: &dyn MetricSpace,
    pairs: usize,
    rng: &mut R,
) -> Result<ScScan> {
    if measure.len() < 2 || pairs == 0 {
        return Err(Error::Invalid("need two particles and at least one pair".into()));
    }
    let mut hits = 0;
    let mut drawn = 0;
    while drawn < pairs {
        let (i, j) = (rng.random_range(0..measure.len()), rng.random_range(0..measure.len()));
        let (x, y) = (measure.coords(i), measure.coords(j));
        if space.distance(x, y) == 0.0 {
            continue;
        }
        drawn += 1;
        if sc_membership(space, x, y)? {
            hits += 1;
        }
    }
    Ok(ScScan { pairs, hits, frequency: hits as f64 / pairs as f64 })
}

/// Bin key for a unit direction: equal-area cells for d ≤ 3, gnomonic cube-face cells above.
pub fn direction_bin(u: &[f64], resolution: usize) -> Vec<i64> {
    let res = resolution.max(1) as f64;
    let cell = |x: f64, lo: f64, hi: f64| (((x - lo) / (hi - lo) * res).floor() as i64).clamp(0, res as i64 - 1);
    match u.len() {
        1 => vec![(u[0] >= 0.0) as i64],
        2 => vec![cell(u[1].atan2(u[0]).rem_euclid(TAU), 0.0, TAU)],
        3 => {
            let lon = u[1].atan2(u[0]).rem_euclid(TAU);
            let band = cell(u[2], -1.0, 1.0);
            vec![band, (((lon / TAU) * 2.0 * res).floor() as i64).clamp(0, 2 * res as i64 - 1)]
        }
        _ => {
            let (face, big) = u.iter().enumerate().fold((0, 0.0f64), |acc, (k, &c)| if c.abs() > acc.1 { (k, c.abs()) } else { acc });
            let mut key = vec![2 * face as i64 + (u[face] < 0.0) as i64];
            key.extend(u.iter().enumerate().filter(|(k, _)| *k != face).map(|(_, &c)| cell(c / big, -1.0, 1.0)));
            key
        }
    }
}

/// Bin index of a ray shape parameter, through `arctan` onto `(−π/2, π/2)`.
pub fn shape_bin(kappa: f64, resolution: usize) -> i64 {
    let res = resolution.max(1) as i64;
    (((kappa.atan() + PI / 2.0) / PI * res as f64).floor() as i64).clamp(0, res - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinKind {
    Ray,
    Pole,
    Exceptional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayBin {
    pub id: usize,
    pub kind: BinKind,
    pub key: Vec<i64>,
    /// Mass-weighted mean direction of the members.
    pub direction: Vec<f64>,
    pub members: Vec<usize>,
    /// `(arc length, conditional weight)` sorted by arc length; weights sum to one.
    pub conditional: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayDecomposition {
    pub pole: Vec<f64>,
    pub resolution: usize,
    pub bins: Vec<RayBin>,
    pub quotient_weights: Vec<f64>,
}

impl RayDecomposition {
    /// Largest `|quotient weight · conditional weight − particle weight|`.
    pub fn reconstruction_error(&self, measure: &DiscreteMeasure) -> f64 {
        let mut err = 0.0f64;
        for (bin, &q) in self.bins.iter().zip(&self.quotient_weights) {
            for (&i, &(_, w)) in bin.members.iter().zip(&bin.conditional) {
                err = err.max((q * w - measure.weight(i)).abs());
            }
        }
        err
    }

    /// Every particle index appears in exactly one bin.
    pub fn is_partition(&self, n: usize) -> bool {
        let mut seen = vec![0u32; n];
        for i in self.bins.iter().flat_map(|b| &b.members) {
            match seen.get_mut(*i) {
                Some(c) => *c += 1,
                None => return false,
            }
        }
        seen.iter().all(|&c| c == 1)
    }
}

type RayMember = (usize, f64, Vec<f64>);

/// Discrete disintegration of `measure` along the geodesic rays from `z`.
pub fn disintegrate(
    measure: &DiscreteMeasure,
    space: &dyn MetricSpace,
    z: &[f64],
    angular_resolution: usize,
) -> Result<RayDecomposition> {
    space.tag().ensure_same(&measure.space())?;
    if angular_resolution == 0 {
        return Err(Error::OutOfRange("angular resolution must be positive".into()));
    }
    let pole_key = vec![-1];
    let exceptional_key = vec![-2];
    // key -> (particle, arc length, direction)
    let mut groups: BTreeMap<Vec<i64>, Vec<RayMember>> = BTreeMap::new();
    for i in 0..measure.len() {
        let x = measure.coords(i);
        let (key, arc, dir) = if space.distance(x, z) == 0.0 {
            (pole_key.clone(), 0.0, Vec::new())
        } else if space.is_exceptional(z, x) {
            (exceptional_key.clone(), space.distance(z, x), Vec::new())
        } else {
            match space.ray_chart(z, x) {
                None => (exceptional_key.clone(), space.distance(z, x), Vec::new()),
                Some(chart) => {
                    let mut key = vec![0];
                    key.extend(direction_bin(&chart.direction, angular_resolution));
                    if let Some(k) = chart.shape {
                        key.push(shape_bin(k, angular_resolution));
                    }
                    (key, chart.arclength, chart.direction)
                }
            }
        };
        groups.entry(key).or_default().push((i, arc, dir));
    }
    let mut bins = Vec::with_capacity(groups.len());
    let mut quotient_weights = Vec::with_capacity(groups.len());
    for (id, (key, mut members)) in groups.into_iter().enumerate() {
        members.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let q: f64 = members.iter().map(|m| measure.weight(m.0)).sum();
        let dim = members.iter().map(|m| m.2.len()).max().unwrap_or(0);
        let mut direction = vec![0.0; dim];
        for (i, _, d) in &members {
            for (acc, c) in direction.iter_mut().zip(d) {
                *acc += measure.weight(*i) * c;
            }
        }
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            direction.iter_mut().for_each(|c| *c /= norm);
        }
        let kind = match key[0] {
            -1 => BinKind::Pole,
            -2 => BinKind::Exceptional,
            _ => BinKind::Ray,
        };
        let conditional = members.iter().map(|&(i, s, _)| (s, if q > 0.0 { measure.weight(i) / q } else { 0.0 })).collect();
        bins.push(RayBin { id, kind, key, direction, members: members.iter().map(|m| m.0).collect(), conditional });
        quotient_weights.push(q);
    }
    Ok(RayDecomposition { pole: z.to_vec(), resolution: angular_resolution, bins, quotient_weights })
}
