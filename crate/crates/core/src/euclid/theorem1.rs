use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    affine_span_dim, convex_hull_2d, max_nearest_neighbor, nondegeneracy_test, polygon_area,
    support_convexity_defect, DegeneracyWitness,
};
use crate::error::{Error, Result};
use crate::measure::{
    cell_masses, singular_excess, DiscreteMeasure, GridSpec, ParticleReference, SpaceTag, DEFAULT_MAX_CELLS,
};
use crate::space::space_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem1Config {
    pub seed: u64,
    pub span_tol: f64,
    pub pair_samples: usize,
    /// Slack of the convexity check; twice the largest nearest-neighbor distance when absent.
    pub convexity_eps: Option<f64>,
    pub nondegeneracy_trials: usize,
    pub t_grid: Vec<f64>,
    /// Resolution of the non-degeneracy estimator; twice the largest nearest-neighbor distance when absent.
    pub nondegeneracy_eps: Option<f64>,
    pub reference_samples: usize,
    /// Expected reference particles per cell at the finest level.
    pub finest_cell_count: f64,
    pub levels: usize,
    pub density_cap: f64,
    pub ac_tol: f64,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Theorem1Config {
            seed: 0,
            span_tol: 1e-8,
            pair_samples: 1000,
            convexity_eps: None,
            nondegeneracy_trials: 200,
            t_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            nondegeneracy_eps: None,
            reference_samples: 100_000,
            finest_cell_count: 40.0,
            levels: 3,
            density_cap: 10.0,
            ac_tol: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub ambient_dimension: usize,
    pub affine_dimension: usize,
    pub singular_values: Vec<f64>,
    pub convexity_defect: f64,
    pub convexity_eps: f64,
    pub convex: bool,
    pub nondegenerate: bool,
    pub nondegeneracy_trials: usize,
    pub witness: Option<DegeneracyWitness>,
    /// `(cell size, singular mass fraction)`, coarse to fine.
    pub singularity_scores: Vec<(f64, f64)>,
    pub absolutely_continuous: bool,
}

impl Theorem1Report {
    pub fn pass(&self) -> bool {
        self.convex && self.nondegenerate && self.absolutely_continuous
    }
}

/// Affine dimension, support convexity, non-degeneracy and absolute continuity of a Euclidean cloud.
pub fn theorem1_pipeline(cloud: &DiscreteMeasure, config: &Theorem1Config) -> Result<Theorem1Report> {
    let SpaceTag::Euclid(d) = cloud.space() else {
        return Err(Error::SpaceMismatch { expected: "euclid".into(), found: cloud.space().name() });
    };
    if cloud.total_mass() <= 0.0 {
        return Err(Error::Invalid("cloud has no mass".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let span = affine_span_dim(cloud, config.span_tol)?;
    let spacing = 2.0 * max_nearest_neighbor(cloud);
    let convexity_eps = config.convexity_eps.unwrap_or(spacing);
    let defect = support_convexity_defect(cloud, config.pair_samples, convexity_eps, &mut rng);
    let nd_eps = config.nondegeneracy_eps.unwrap_or(spacing).max(f64::MIN_POSITIVE);
    let nd = nondegeneracy_test(cloud, config.nondegeneracy_trials, &config.t_grid, nd_eps, &mut rng)?;

    let scores = if span.k == 0 {
        vec![(0.0, 0.0)]
    } else {
        let projected: Vec<Vec<f64>> = cloud.particles().iter().map(|p| span.project(&p.point.coords)).collect();
        let flat = DiscreteMeasure::from_weighted(
            SpaceTag::Euclid(span.k),
            projected.iter().cloned().zip(cloud.weights()).collect(),
            None,
        )?;
        let (reference, volume) = hull_reference(&projected, config.reference_samples, &mut rng)?;
        let fine = (volume * config.finest_cell_count / config.reference_samples as f64).powf(1.0 / span.k as f64);
        let space = space_for(&flat.space())?;
        let (lo, hi) = flat.bounding_box().expect("nonempty");
        let mut out = Vec::new();
        for level in (0..config.levels.max(1)).rev() {
            let cell = fine * (1u64 << level) as f64;
            let spec = GridSpec::new(lo.clone(), cell)?;
            spec.check_cap(&lo, &hi, DEFAULT_MAX_CELLS)?;
            let refm = ParticleReference::new(&reference, space.as_ref(), &spec);
            let excess = singular_excess(&cell_masses(&flat, space.as_ref(), &spec), flat.total_mass(), &refm, config.density_cap);
            out.push((cell, excess / flat.total_mass()));
        }
        out
    };
    let finest = scores.last().map_or(0.0, |s| s.1);
    let coarsest = scores.first().map_or(0.0, |s| s.1);
    Ok(Theorem1Report {
        ambient_dimension: d,
        affine_dimension: span.k,
        singular_values: span.singular_values,
        convexity_defect: defect,
        convexity_eps,
        convex: defect == 0.0,
        nondegenerate: nd.pass,
        nondegeneracy_trials: nd.trials,
        witness: nd.witness,
        absolutely_continuous: finest <= config.ac_tol && finest <= coarsest + config.ac_tol / 2.0,
        singularity_scores: scores,
    })
}

/// Uniform reference cloud on the convex hull of `points` and the hull's volume.
fn hull_reference<R: Rng + ?Sized>(points: &[Vec<f64>], n: usize, rng: &mut R) -> Result<(DiscreteMeasure, f64)> {
    let k = points[0].len();
    let mut lo = points[0].clone();
    let mut hi = points[0].clone();
    for p in points {
        for i in 0..k {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let box_draw = |rng: &mut R| -> Vec<f64> { lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect() };
    let (coords, volume) = if k == 2 {
        let hull = convex_hull_2d(points);
        let inside = |x: &[f64]| {
            (0..hull.len()).all(|i| {
                let (p, q) = (&hull[i], &hull[(i + 1) % hull.len()]);
                (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]) >= 0.0
            })
        };
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let x = box_draw(rng);
            if inside(&x) {
                out.push(x);
            }
        }
        (out, polygon_area(&hull))
    } else {
        let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        ((0..n).map(|_| box_draw(rng)).collect(), vol)
    };
    Ok((DiscreteMeasure::uniform(SpaceTag::Euclid(k), coords, 1.0 / n as f64, None)?, volume))
}
