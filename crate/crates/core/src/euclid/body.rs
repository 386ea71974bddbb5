use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialized shape of a convex body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BodyShape {
    Ball { center: Vec<f64>, radius: f64 },
    /// `{x : normals[k]·x ≤ offsets[k]}`.
    Halfspaces { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
    /// Convex hull of the vertices (planar only).
    Polytope { vertices: Vec<Vec<f64>> },
}

/// Bounded convex body with a strictly interior point.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "BodyShape", into = "BodyShape")]
pub struct ConvexBody {
    shape: BodyShape,
    dim: usize,
    facets: Vec<(Vec<f64>, f64)>,
    interior: Vec<f64>,
    bbox: (Vec<f64>, Vec<f64>),
}

impl PartialEq for ConvexBody {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
    }
}

impl From<ConvexBody> for BodyShape {
    fn from(b: ConvexBody) -> Self {
        b.shape
    }
}

impl TryFrom<BodyShape> for ConvexBody {
    type Error = Error;
    fn try_from(shape: BodyShape) -> Result<Self> {
        ConvexBody::new(shape)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl ConvexBody {
    pub fn new(shape: BodyShape) -> Result<Self> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        let (dim, facets, interior, bbox) = match &shape {
            BodyShape::Ball { center, radius } => {
                if center.is_empty() || !finite(center) || !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Invalid("ball needs a finite center and positive radius".into()));
                }
                let lo = center.iter().map(|c| c - radius).collect();
                let hi = center.iter().map(|c| c + radius).collect();
                (center.len(), Vec::new(), center.clone(), (lo, hi))
            }
            BodyShape::Halfspaces { normals, offsets } => {
                if normals.len() != offsets.len() || normals.is_empty() {
                    return Err(Error::Invalid("halfspaces need matching normals and offsets".into()));
                }
                let d = normals[0].len();
                if d == 0 || normals.iter().any(|a| a.len() != d || !finite(a) || norm(a) == 0.0) || !finite(offsets) {
                    return Err(Error::Invalid("halfspace normals must be nonzero vectors of one dimension".into()));
                }
                let facets: Vec<(Vec<f64>, f64)> = normals.iter().cloned().zip(offsets.iter().copied()).collect();
                let verts = enumerate_vertices(&facets, d);
                if verts.is_empty() {
                    return Err(Error::Invalid("halfspace system is empty or unbounded".into()));
                }
                let bbox = bounding_box(&verts);
                check_bounded(&facets, d)?;
                (d, facets, centroid(&verts), bbox)
            }
            BodyShape::Polytope { vertices } => {
                if vertices.len() < 3 || vertices.iter().any(|v| v.len() != 2 || !finite(v)) {
                    return Err(Error::Invalid("polytope bodies are planar and need at least 3 vertices".into()));
                }
                let hull = convex_hull_2d(vertices);
                if hull.len() < 3 {
                    return Err(Error::Invalid("polytope vertices are collinear".into()));
                }
                let mut facets = Vec::with_capacity(hull.len());
                for k in 0..hull.len() {
                    let (p, q) = (&hull[k], &hull[(k + 1) % hull.len()]);
                    let n = vec![q[1] - p[1], p[0] - q[0]];
                    let off = dot(&n, p);
                    facets.push((n, off));
                }
                (2, facets, centroid(&hull), bounding_box(&hull))
            }
        };
        let body = ConvexBody { shape, dim, facets, interior, bbox };
        if body.margin(&body.interior) <= 1e-12 * body.diameter_bound() {
            return Err(Error::Invalid("body has empty interior".into()));
        }
        Ok(body)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(BodyShape::Ball { center, radius })
    }

    /// Axis-aligned box `[lo, hi]`.
    pub fn cube(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let d = lo.len();
        let mut normals = Vec::new();
        let mut offsets = Vec::new();
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            normals.push(e.clone());
            offsets.push(hi[k]);
            e[k] = -1.0;
            normals.push(e);
            offsets.push(-lo[k]);
        }
        Self::new(BodyShape::Halfspaces { normals, offsets })
    }

    pub fn polygon(vertices: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(BodyShape::Polytope { vertices })
    }

    pub fn shape(&self) -> &BodyShape {
        &self.shape
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn interior_point(&self) -> &[f64] {
        &self.interior
    }
    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.bbox.0, &self.bbox.1)
    }

    fn diameter_bound(&self) -> f64 {
        let (lo, hi) = &self.bbox;
        lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    /// Signed distance-like margin: positive inside, zero on the boundary, negative outside.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match &self.shape {
            BodyShape::Ball { center, radius } => {
                radius - x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt()
            }
            _ => self.facets.iter().map(|(a, b)| (b - dot(a, x)) / norm(a)).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.margin(x) >= -tol
    }

    /// `sup{s ≥ 0 : z + s·u ∈ body}` for a nonzero direction `u` (normalized internally).
    pub fn ray_exit(&self, z: &[f64], u: &[f64]) -> f64 {
        let n = norm(u);
        match &self.shape {
            BodyShape::Ball { center, radius } => {
                let w: Vec<f64> = z.iter().zip(center).map(|(a, c)| a - c).collect();
                let b = dot(u, &w) / n;
                let c = dot(&w, &w) - radius * radius;
                let disc = (b * b - c).max(0.0);
                if b > 0.0 {
                    (-c / (b + disc.sqrt())).max(0.0)
                } else {
                    -b + disc.sqrt()
                }
            }
            _ => self
                .facets
                .iter()
                .filter_map(|(a, b)| {
                    let au = dot(a, u) / n;
                    (au > 0.0).then(|| ((b - dot(a, z)) / au).max(0.0))
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Lebesgue volume.
    pub fn volume(&self) -> Result<f64> {
        match &self.shape {
            BodyShape::Ball { radius, .. } => Ok(unit_ball_volume(self.dim) * radius.powi(self.dim as i32)),
            BodyShape::Polytope { vertices } => Ok(polygon_area(&convex_hull_2d(vertices))),
            BodyShape::Halfspaces { .. } => {
                let axis_aligned = self.facets.iter().all(|(a, _)| a.iter().filter(|c| **c != 0.0).count() == 1);
                if self.dim == 1 || axis_aligned {
                    let (lo, hi) = &self.bbox;
                    Ok(lo.iter().zip(hi).map(|(a, b)| b - a).product())
                } else if self.dim == 2 {
                    Ok(polygon_area(&convex_hull_2d(&enumerate_vertices(&self.facets, 2))))
                } else {
                    Err(Error::Unsupported { op: "volume of a general polytope", space: format!("euclid{}", self.dim) })
                }
            }
        }
    }

    /// Image under the homothety `y ↦ (1−t)y + t·o`.
    pub fn evolve(&self, o: &[f64], t: f64) -> Result<Self> {
        let s = 1.0 - t;
        let shape = match &self.shape {
            BodyShape::Ball { center, radius } => BodyShape::Ball {
                center: center.iter().zip(o).map(|(c, p)| s * c + t * p).collect(),
                radius: s * radius,
            },
            BodyShape::Halfspaces { normals, offsets } => BodyShape::Halfspaces {
                normals: normals.clone(),
                offsets: normals.iter().zip(offsets).map(|(a, b)| s * b + t * dot(a, o)).collect(),
            },
            BodyShape::Polytope { vertices } => BodyShape::Polytope {
                vertices: vertices.iter().map(|v| v.iter().zip(o).map(|(c, p)| s * c + t * p).collect()).collect(),
            },
        };
        Self::new(shape)
    }

    /// Independent uniform samples.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        match &self.shape {
            BodyShape::Ball { center, radius } => {
                let d = self.dim;
                while out.len() < n {
                    let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let gn = norm(&g);
                    if gn == 0.0 {
                        continue;
                    }
                    let rad = radius * rng.random::<f64>().powf(1.0 / d as f64);
                    out.push(center.iter().zip(&g).map(|(c, x)| c + rad * x / gn).collect());
                }
            }
            _ => {
                let (lo, hi) = &self.bbox;
                while out.len() < n {
                    let x: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect();
                    if self.margin(&x) >= 0.0 {
                        out.push(x);
                    }
                }
            }
        }
        out
    }
}

fn unit_ball_volume(d: usize) -> f64 {
    let mut v = [1.0, 2.0];
    for k in 2..=d {
        let next = v[0] * std::f64::consts::TAU / k as f64;
        v = [v[1], next];
    }
    if d == 0 {
        1.0
    } else {
        v[1]
    }
}

fn centroid(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    let mut c = vec![0.0; d];
    for p in points {
        for k in 0..d {
            c[k] += p[k];
        }
    }
    c.iter().map(|v| v / points.len() as f64).collect()
}

fn bounding_box(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = points[0].clone();
    let mut hi = points[0].clone();
    for p in points {
        for k in 0..p.len() {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Vertices of `{a·x ≤ b}` by solving every d-subset of constraints.
fn enumerate_vertices(facets: &[(Vec<f64>, f64)], d: usize) -> Vec<Vec<f64>> {
    let m = facets.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    if m < d {
        return out;
    }
    let scale = facets.iter().map(|(a, b)| b.abs() / norm(a)).fold(1.0, f64::max);
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let a = DMatrix::from_fn(d, d, |i, j| facets[idx[i]].0[j]);
        let b = DVector::from_fn(d, |i, _| facets[idx[i]].1);
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            let feasible = x.iter().all(|c| c.is_finite())
                && facets.iter().all(|(a, b)| dot(a, &x) <= b + 1e-9 * scale * norm(a));
            if feasible && !out.iter().any(|v| v.iter().zip(&x).all(|(p, q)| (p - q).abs() <= 1e-12 * scale)) {
                out.push(x);
            }
        }
        let mut k = d;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] < m - d + k {
                idx[k] += 1;
                for j in k + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Rejects systems whose recession cone `{u : a·u ≤ 0}` is nontrivial.
fn check_bounded(facets: &[(Vec<f64>, f64)], d: usize) -> Result<()> {
    let mut cone: Vec<(Vec<f64>, f64)> = facets.iter().map(|(a, _)| (a.iter().map(|c| c / norm(a)).collect(), 0.0)).collect();
    for k in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[k] = sign;
            cone.push((e, 1.0));
        }
    }
    if enumerate_vertices(&cone, d).iter().any(|v| norm(v) > 1e-9) {
        return Err(Error::Invalid("halfspace system is unbounded".into()));
    }
    Ok(())
}

/// Counter-clockwise convex hull (monotone chain), without collinear points.
pub fn convex_hull_2d(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() < 3 {
        return pts.into_iter().map(|p| p.to_vec()).collect();
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull.into_iter().map(|p| p.to_vec()).collect()
}

pub fn polygon_area(hull: &[Vec<f64>]) -> f64 {
    let n = hull.len();
    (0..n)
        .map(|k| {
            let (p, q) = (&hull[k], &hull[(k + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn unit_square_three_ways() {
        let cube = ConvexBody::cube(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let poly = ConvexBody::polygon(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(cube.volume().unwrap(), 1.0);
        assert!((poly.volume().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cube.interior_point(), &[0.5, 0.5]);
        assert!((poly.ray_exit(&[0.25, 0.5], &[-1.0, 0.0]) - 0.25).abs() < 1e-15);
        assert!((cube.ray_exit(&[0.25, 0.5], &[1.0, 0.0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn ball_volume_and_exit() {
        let b = ConvexBody::ball(vec![0.0; 3], 2.0).unwrap();
        assert!((b.volume().unwrap() - 4.0 / 3.0 * std::f64::consts::PI * 8.0).abs() < 1e-12);
        assert!((b.ray_exit(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((b.ray_exit(&[1.0, 0.0, 0.0], &[-3.0, 0.0, 0.0]) - 3.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_unbounded_and_degenerate() {
        let half = BodyShape::Halfspaces { normals: vec![vec![1.0, 0.0]], offsets: vec![1.0] };
        assert!(ConvexBody::new(half).is_err());
        assert!(ConvexBody::polygon(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
        assert!(ConvexBody::ball(vec![0.0], -1.0).is_err());
    }

    #[test]
    fn evolve_scales_volume() {
        let tri = ConvexBody::polygon(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = tri.evolve(&[1.0, 1.0], 0.25).unwrap();
        assert!((e.volume().unwrap() - 0.5625 * tri.volume().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let b = ConvexBody::cube(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert!(s.contains("\"kind\":\"halfspaces\""));
        let back: ConvexBody = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.volume().unwrap(), 6.0);
    }

    #[test]
    fn samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = ConvexBody::polygon(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(b.sample_uniform(500, &mut rng).iter().all(|x| b.contains(x, 0.0)));
        let ball = ConvexBody::ball(vec![1.0, 1.0], 0.5).unwrap();
        assert!(ball.sample_uniform(500, &mut rng).iter().all(|x| ball.contains(x, 1e-12)));
    }
}
