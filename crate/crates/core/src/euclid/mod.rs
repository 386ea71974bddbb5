//! ℝᵈ: homotheties, affine dimension, support convexity, non-degeneracy and determinant bounds.

mod body;
mod theorem1;

pub use body::{convex_hull_2d, polygon_area, BodyShape, ConvexBody};
pub use theorem1::{theorem1_pipeline, Theorem1Config, Theorem1Report};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Descriptor, DiscreteMeasure, GeodesicSegment, NeighborhoodIndex, Point, SpaceTag};
use crate::space::{check_unit, MetricSpace, RayChart};

/// ℝᵈ, optionally restricted to a convex domain (which only affects extendability of geodesics).
#[derive(Clone, Debug)]
pub struct EuclideanSpace {
    dim: usize,
    domain: Option<ConvexBody>,
}

impl EuclideanSpace {
    pub fn new(dim: usize) -> Self {
        EuclideanSpace { dim, domain: None }
    }

    pub fn with_domain(body: ConvexBody) -> Self {
        EuclideanSpace { dim: body.dim(), domain: Some(body) }
    }

    pub fn domain(&self) -> Option<&ConvexBody> {
        self.domain.as_ref()
    }
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn lerp(x: &[f64], y: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| (1.0 - t) * a + t * b).collect()
}

impl MetricSpace for EuclideanSpace {
    fn tag(&self) -> SpaceTag {
        SpaceTag::Euclid(self.dim)
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        dist(x, y)
    }

    fn segment(&self, x: &[f64], y: &[f64]) -> Result<GeodesicSegment> {
        let tag = self.tag();
        let (a, b) = (x.to_vec(), y.to_vec());
        Ok(GeodesicSegment::new(
            Point::new(tag, a.clone())?,
            Point::new(tag, b.clone())?,
            dist(x, y),
            true,
            Box::new(move |t| lerp(&a, &b, t)),
        ))
    }

    fn contract_toward(&self, x: &[f64], o: &[f64], t: f64) -> Result<Vec<f64>> {
        check_unit(t)?;
        if t == 1.0 {
            return Ok(o.to_vec());
        }
        Ok(lerp(x, o, t))
    }

    fn contraction_preimage(&self, y: &[f64], o: &[f64], t: f64) -> Result<Option<Vec<f64>>> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::OutOfRange(format!("preimage time {t} not in (0, 1)")));
        }
        let x: Vec<f64> = y.iter().zip(o).map(|(a, b)| (a - t * b) / (1.0 - t)).collect();
        match &self.domain {
            Some(body) if !body.contains(&x, 1e-12) => Ok(None),
            _ => Ok(Some(x)),
        }
    }

    fn cut_locus_member(&self, z: &[f64], x: &[f64]) -> Result<bool> {
        let r = dist(z, x);
        if r == 0.0 {
            return Err(Error::Invalid("cut locus membership needs x ≠ z".into()));
        }
        Ok(match &self.domain {
            None => false,
            Some(body) => {
                let u: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
                body.ray_exit(z, &u) <= r * (1.0 + 1e-12)
            }
        })
    }

    fn extends_beyond(&self, x: &[f64], z: &[f64]) -> bool {
        match &self.domain {
            None => true,
            Some(body) => {
                let w: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
                w.iter().any(|c| *c != 0.0) && body.ray_exit(z, &w) > 0.0
            }
        }
    }

    fn ray_chart(&self, z: &[f64], x: &[f64]) -> Option<RayChart> {
        let r = dist(z, x);
        (r > 0.0).then(|| RayChart {
            direction: x.iter().zip(z).map(|(a, b)| (a - b) / r).collect(),
            shape: None,
            arclength: r,
        })
    }

    fn intrinsic_dim(&self) -> usize {
        self.dim
    }
}

fn check_dims(points: &[Point], o: &Point) -> Result<()> {
    for p in points {
        if p.coords.len() != o.coords.len() {
            return Err(Error::DimensionMismatch { expected: o.coords.len(), found: p.coords.len() });
        }
    }
    Ok(())
}

/// `{(1−t)y + t·o}`; the identity at `t = 0`.
pub fn evolve_set(points: &[Point], o: &Point, t: f64) -> Result<Vec<Point>> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("evolution time {t} not in [0, 1)")));
    }
    check_dims(points, o)?;
    Ok(points
        .iter()
        .map(|p| Point { space: p.space, coords: if t == 0.0 { p.coords.clone() } else { lerp(&p.coords, &o.coords, t) } })
        .collect())
}

/// `{(z − t·o)/(1−t)}`, inverse of [`evolve_set`].
pub fn contraction_preimage(points: &[Point], o: &Point, t: f64) -> Result<Vec<Point>> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::OutOfRange(format!("preimage time {t} not in (0, 1)")));
    }
    check_dims(points, o)?;
    Ok(points
        .iter()
        .map(|p| Point {
            space: p.space,
            coords: p.coords.iter().zip(&o.coords).map(|(z, c)| (z - t * c) / (1.0 - t)).collect(),
        })
        .collect())
}

/// Affine hull of a cloud: dimension, orthonormal frame and base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineSpan {
    pub k: usize,
    pub basis: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub singular_values: Vec<f64>,
}

impl AffineSpan {
    /// Coordinates of `x` in the frame.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| b.iter().zip(x).zip(&self.offset).map(|((bi, xi), oi)| bi * (xi - oi)).sum())
            .collect()
    }

    /// Distance from `x` to the affine subspace.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let c = self.project(x);
        let mut r: Vec<f64> = x.iter().zip(&self.offset).map(|(a, b)| a - b).collect();
        for (ci, b) in c.iter().zip(&self.basis) {
            for (rj, bj) in r.iter_mut().zip(b) {
                *rj -= ci * bj;
            }
        }
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dimension of the affine hull, counting singular values above `tol·σ_max`.
pub fn affine_span_dim(cloud: &DiscreteMeasure, tol: f64) -> Result<AffineSpan> {
    if cloud.is_empty() {
        return Err(Error::Invalid("affine span of an empty cloud".into()));
    }
    let d = cloud.space().ambient_dim();
    let n = cloud.len();
    let mut offset = vec![0.0; d];
    for p in cloud.particles() {
        for (o, c) in offset.iter_mut().zip(&p.point.coords) {
            *o += c / n as f64;
        }
    }
    if n == 1 {
        return Ok(AffineSpan { k: 0, basis: Vec::new(), offset, singular_values: vec![0.0; d] });
    }
    let m = DMatrix::from_fn(n, d, |i, j| cloud.coords(i)[j] - offset[j]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Invalid("singular value decomposition failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let k = if smax > 0.0 { sigma.iter().filter(|&&s| s > tol * smax).count() } else { 0 };
    let basis = order[..k].iter().map(|&i| v_t.row(i).iter().copied().collect()).collect();
    Ok(AffineSpan { k, basis, offset, singular_values: sigma })
}

/// Largest distance by which a sampled midpoint misses the `eps`-neighborhood of the cloud.
pub fn support_convexity_defect<R: Rng + ?Sized>(cloud: &DiscreteMeasure, pair_samples: usize, eps: f64, rng: &mut R) -> f64 {
    let n = cloud.len();
    if n < 2 {
        return 0.0;
    }
    let mids: Vec<Vec<f64>> = (0..pair_samples)
        .map(|_| {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            lerp(cloud.coords(i), cloud.coords(j), 0.5)
        })
        .collect();
    mids.par_iter()
        .map(|m| {
            let nearest = (0..n).map(|i| dist(m, cloud.coords(i))).fold(f64::INFINITY, f64::min);
            (nearest - eps).max(0.0)
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest nearest-neighbor distance within the cloud.
pub fn max_nearest_neighbor(cloud: &DiscreteMeasure) -> f64 {
    let n = cloud.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| dist(cloud.coords(i), cloud.coords(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|d| d.is_finite())
        .reduce(|| 0.0, f64::max)
}

/// Failing instance of the non-degeneracy test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyWitness {
    /// Center and radius of the test set (radius 0 for a single atom).
    pub center: Vec<f64>,
    pub radius: f64,
    pub members: Vec<usize>,
    pub o: Vec<f64>,
    pub t: f64,
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyResult {
    pub pass: bool,
    pub trials: usize,
    pub witness: Option<DegeneracyWitness>,
}

/// Searches for `(A, o, t)` with `m(A_{t,o}) = 0` at the resolution `eps`.
pub fn nondegeneracy_test<R: Rng + ?Sized>(
    cloud: &DiscreteMeasure,
    trials: usize,
    t_grid: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<NondegeneracyResult> {
    if cloud.is_empty() {
        return Err(Error::Invalid("non-degeneracy of an empty cloud".into()));
    }
    if let Some(&t) = t_grid.iter().find(|t| !(0.0..1.0).contains(*t)) {
        return Err(Error::OutOfRange(format!("evolution time {t} not in [0, 1)")));
    }
    let SpaceTag::Euclid(d) = cloud.space() else {
        return Err(Error::SpaceMismatch { expected: "euclid".into(), found: cloud.space().name() });
    };
    let space = EuclideanSpace::new(d);
    let index = NeighborhoodIndex::new(cloud, &space, eps)?;
    let atomic = matches!(cloud.descriptor(), Some(Descriptor::AtomList));
    let radius = if atomic { 0.0 } else { 3.0 * eps };
    let test_index = if atomic { None } else { Some(NeighborhoodIndex::new(cloud, &space, radius)?) };
    let positive: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.weight(i) > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::Invalid("cloud has no mass".into()));
    }
    for _ in 0..trials {
        let center = positive[rng.random_range(0..positive.len())];
        let o = positive[rng.random_range(0..positive.len())];
        let members = match &test_index {
            Some(ix) => ix.neighbors(cloud.coords(center)),
            None => vec![center],
        };
        for &t in t_grid {
            let probes: Vec<Vec<f64>> = members.iter().map(|&i| lerp(cloud.coords(i), cloud.coords(o), t)).collect();
            let estimate = index.mass_near(&probes);
            if estimate <= 0.0 {
                return Ok(NondegeneracyResult {
                    pass: false,
                    trials,
                    witness: Some(DegeneracyWitness {
                        center: cloud.coords(center).to_vec(),
                        radius,
                        members,
                        o: cloud.coords(o).to_vec(),
                        t,
                        estimate,
                    }),
                });
            }
        }
    }
    Ok(NondegeneracyResult { pass: true, trials, witness: None })
}

/// `det(Id + a·bᵀ) = 1 + ⟨b, a⟩`.
pub fn det_rank_one_update(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(1.0 + a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
}

/// The map `w ↦ (z − w)/(1 − |w|/δ)`.
pub fn fz(z: &[f64], w: &[f64], delta: f64) -> Vec<f64> {
    let s = delta / (delta - w.iter().map(|c| c * c).sum::<f64>().sqrt());
    z.iter().zip(w).map(|(a, b)| s * (a - b)).collect()
}

/// Differential of [`fz`] at `w` and `det(−((δ−|w|)/δ)·df)`.
pub fn jacobian_fz(z: &[f64], w: &[f64], delta: f64) -> Result<(DMatrix<f64>, f64)> {
    if z.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), found: w.len() });
    }
    let nw = w.iter().map(|c| c * c).sum::<f64>().sqrt();
    let nz = z.iter().map(|c| c * c).sum::<f64>().sqrt();
    if nw == 0.0 {
        return Err(Error::Invalid("the differential is singular at w = 0".into()));
    }
    if !(delta > 0.0 && nw < delta && nz < delta) {
        return Err(Error::OutOfRange(format!("z and w must lie in the open ball of radius {delta}")));
    }
    let gap = delta - nw;
    let d = z.len();
    let m = DMatrix::from_fn(d, d, |i, j| {
        let rank_one = delta * (z[i] - w[i]) / (gap * gap) * w[j] / nw;
        if i == j {
            rank_one - delta / gap
        } else {
            rank_one
        }
    });
    let inner: f64 = z.iter().zip(w).map(|(a, b)| (a - b) * b).sum();
    Ok((m, 1.0 - inner / (gap * nw)))
}

/// Uniform cloud on a convex body with its analytic descriptor.
pub fn sample_body<R: Rng + ?Sized>(body: &ConvexBody, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    let coords = body.sample_uniform(n, rng);
    DiscreteMeasure::uniform(
        SpaceTag::Euclid(body.dim()),
        coords,
        1.0 / n as f64,
        Some(Descriptor::UniformOnBody { body: body.clone() }),
    )
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn pts(v: &[[f64; 2]]) -> Vec<Point> {
        v.iter().map(|c| Point::euclid(c)).collect()
    }

    #[test]
    fn evolve_square_corners() {
        let corners = pts(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let o = Point::euclid(&[0.0, 0.0]);
        let half = evolve_set(&corners, &o, 0.5).unwrap();
        assert_eq!(half, pts(&[[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]));
        assert_eq!(evolve_set(&corners, &o, 0.0).unwrap(), corners);
        assert!(evolve_set(&corners, &o, 1.0).is_err());
        let fixed = evolve_set(&[o.clone(), o.clone()], &o, 0.7).unwrap();
        assert!(fixed.iter().all(|p| *p == o));
    }

    #[test]
    fn preimage_inverts_evolution() {
        let o = Point::euclid(&[0.0, 0.0]);
        assert_eq!(contraction_preimage(&pts(&[[0.25, 0.25]]), &o, 0.5).unwrap(), pts(&[[0.5, 0.5]]));
        assert_eq!(contraction_preimage(std::slice::from_ref(&o), &o, 0.3).unwrap(), vec![o.clone()]);
        assert!(contraction_preimage(std::slice::from_ref(&o), &o, 0.0).is_err());
        assert!(contraction_preimage(std::slice::from_ref(&o), &o, 1.0).is_err());
        let s = pts(&[[0.5, 0.25], [0.75, 1.0]]);
        let back = evolve_set(&contraction_preimage(&s, &o, 0.5).unwrap(), &o, 0.5).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn affine_dims() {
        let seg: Vec<Vec<f64>> = (0..50).map(|i| {
            let s = i as f64 / 49.0;
            vec![1.0 + s, 2.0 - 3.0 * s, 0.5 * s]
        }).collect();
        let m = DiscreteMeasure::uniform(SpaceTag::Euclid(3), seg, 1.0, None).unwrap();
        assert_eq!(affine_span_dim(&m, 1e-8).unwrap().k, 1);
        let atom = DiscreteMeasure::dirac(Point::euclid(&[1.0, 2.0, 3.0]), 1.0).unwrap();
        assert_eq!(affine_span_dim(&atom, 1e-8).unwrap().k, 0);
    }

    #[test]
    fn antipodal_atoms_defect_is_radius() {
        let m = DiscreteMeasure::uniform(SpaceTag::Euclid(2), vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 0.5, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let defect = support_convexity_defect(&m, 200, 1e-3, &mut rng);
        assert!((defect - (1.0 - 1e-3)).abs() < 1e-12);
        let single = DiscreteMeasure::dirac(Point::euclid(&[0.3, 0.1]), 1.0).unwrap();
        assert_eq!(support_convexity_defect(&single, 10, 1e-3, &mut rng), 0.0);
    }

    #[test]
    fn two_atoms_fail_nondegeneracy_at_half() {
        let m = DiscreteMeasure::uniform(SpaceTag::Euclid(2), vec![vec![0.0, 0.0], vec![1.0, 0.0]], 0.5, Some(Descriptor::AtomList)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = nondegeneracy_test(&m, 50, &[0.5], 0.1, &mut rng).unwrap();
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert_eq!(w.t, 0.5);
        assert_ne!(w.center, w.o);
    }

    #[test]
    fn det_examples() {
        assert_eq!(det_rank_one_update(&[0.0; 3], &[0.0; 3]).unwrap(), 1.0);
        assert_eq!(det_rank_one_update(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(det_rank_one_update(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert!(det_rank_one_update(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(jacobian_fz(&[0.5, 0.0], &[0.5, 0.0], 1.0).unwrap().1, 1.0);
        assert_eq!(jacobian_fz(&[0.0, 0.0], &[0.5, 0.0], 1.0).unwrap().1, 2.0);
        assert!(jacobian_fz(&[0.1, 0.0], &[0.0, 0.0], 1.0).is_err());
        assert!(jacobian_fz(&[0.1, 0.0], &[1.5, 0.0], 1.0).is_err());
    }

    #[test]
    fn euclid_space_with_domain() {
        let sq = ConvexBody::cube(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let s = EuclideanSpace::with_domain(sq);
        assert!(s.cut_locus_member(&[0.5, 0.5], &[1.0, 0.5]).unwrap());
        assert!(!s.cut_locus_member(&[0.5, 0.5], &[0.9, 0.5]).unwrap());
        assert!(s.extends_beyond(&[0.9, 0.5], &[0.5, 0.5]));
        assert!(!s.extends_beyond(&[0.5, 0.5], &[0.0, 0.5]));
        assert_eq!(s.contraction_preimage(&[0.9, 0.9], &[0.0, 0.0], 0.5).unwrap(), None);
        assert!(!EuclideanSpace::new(2).cut_locus_member(&[0.0, 0.0], &[5.0, 5.0]).unwrap());
    }
}
