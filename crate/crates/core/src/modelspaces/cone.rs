use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::error::{Error, Result};
use crate::measure::{Descriptor, DiscreteMeasure, GeodesicSegment, Point, SpaceTag};
use crate::space::{MetricSpace, RayChart};

/// Point `(r, φ)` of the cone of total angle `θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConePoint {
    pub radius: f64,
    pub angle: f64,
    pub cone_angle: f64,
}

impl ConePoint {
    /// Reduces `angle` modulo `cone_angle`; the angle of the apex is set to 0.
    pub fn new(radius: f64, angle: f64, cone_angle: f64) -> Result<Self> {
        if !(cone_angle > 0.0 && cone_angle <= TAU) {
            return Err(Error::OutOfRange(format!("cone angle {cone_angle} not in (0, 2π]")));
        }
        if !(radius >= 0.0 && radius.is_finite() && angle.is_finite()) {
            return Err(Error::Invalid(format!("invalid cone point ({radius}, {angle})")));
        }
        let angle = if radius == 0.0 { 0.0 } else { angle.rem_euclid(cone_angle) };
        Ok(ConePoint { radius, angle, cone_angle })
    }

    pub fn apex(cone_angle: f64) -> Self {
        ConePoint { radius: 0.0, angle: 0.0, cone_angle }
    }

    pub fn to_point(&self) -> Point {
        Point { space: SpaceTag::Cone { theta: self.cone_angle }, coords: vec![self.radius, self.angle] }
    }
}

fn angle_gap(theta: f64, a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(theta);
    d.min(theta - d)
}

fn dist(theta: f64, x: &[f64], y: &[f64]) -> f64 {
    let (r1, r2) = (x[0], y[0]);
    if r1 == 0.0 || r2 == 0.0 {
        return r1 + r2;
    }
    let delta = angle_gap(theta, x[1], y[1]);
    if delta >= PI {
        return r1 + r2;
    }
    let s = (delta / 2.0).sin();
    ((r1 - r2) * (r1 - r2) + 4.0 * r1 * r2 * s * s).sqrt()
}

/// Unrolled distance on the cone.
pub fn cone_distance(x: &ConePoint, y: &ConePoint) -> Result<f64> {
    if x.cone_angle != y.cone_angle {
        return Err(Error::Invalid("points lie on cones of different angles".into()));
    }
    Ok(dist(x.cone_angle, &[x.radius, x.angle], &[y.radius, y.angle]))
}

/// Minimum of `d(x,p) + d(p,y) − d(x,y)` over a grid of pairs with radii in `[0.5, 1]`, `p` the apex.
pub fn cone_strict_triangle_scan(theta: f64, grid: usize) -> Result<f64> {
    if !(theta > 0.0 && theta < TAU) {
        return Err(Error::OutOfRange(format!("cone angle {theta} not in (0, 2π)")));
    }
    if grid < 2 {
        return Err(Error::OutOfRange("scan grid must have at least 2 points".into()));
    }
    let radius = |i: usize| 0.5 + 0.5 * i as f64 / (grid - 1) as f64;
    let mut best = f64::INFINITY;
    for i in 0..grid {
        for j in 0..grid {
            for k in 0..grid {
                let (r1, r2) = (radius(i), radius(j));
                let phi = theta * k as f64 / grid as f64;
                let d = dist(theta, &[r1, 0.0], &[r2, phi]);
                best = best.min(r1 + r2 - d);
            }
        }
    }
    Ok(best)
}

/// Flat cone of total angle θ in intrinsic coordinates `(r, φ)`.
#[derive(Clone, Copy, Debug)]
pub struct ConeSpace {
    theta: f64,
}

impl ConeSpace {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= TAU) {
            return Err(Error::OutOfRange(format!("cone angle {theta} not in (0, 2π]")));
        }
        Ok(ConeSpace { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn is_plane(&self) -> bool {
        self.theta >= TAU
    }

    /// Position of `x` in the development where `z`'s ray is the positive first axis.
    fn unroll(&self, z: &[f64], x: &[f64]) -> [f64; 2] {
        let mut a = (x[1] - z[1]).rem_euclid(self.theta);
        if a > self.theta / 2.0 {
            a -= self.theta;
        }
        [x[0] * a.cos(), x[0] * a.sin()]
    }

    /// Inverse of [`ConeSpace::unroll`].
    fn roll(&self, z: &[f64], p: [f64; 2]) -> Vec<f64> {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if r == 0.0 {
            return vec![0.0, 0.0];
        }
        vec![r, (z[1] + p[1].atan2(p[0])).rem_euclid(self.theta)]
    }
}

impl MetricSpace for ConeSpace {
    fn tag(&self) -> SpaceTag {
        SpaceTag::Cone { theta: self.theta }
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        dist(self.theta, x, y)
    }

    fn segment(&self, x: &[f64], y: &[f64]) -> Result<GeodesicSegment> {
        let tag = self.tag();
        let len = dist(self.theta, x, y);
        let (a, b) = (x.to_vec(), y.to_vec());
        let space = *self;
        let through_apex = a[0] == 0.0 || b[0] == 0.0 || angle_gap(self.theta, a[1], b[1]) >= PI;
        let unique = a[0] == 0.0
            || b[0] == 0.0
            || self.is_plane()
            || (angle_gap(self.theta, a[1], b[1]) - self.theta / 2.0).abs() > 1e-12;
        let eval: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync> = if through_apex {
            Box::new(move |t| {
                let s = t * len;
                if t == 1.0 {
                    b.clone()
                } else if s <= a[0] {
                    vec![a[0] - s, if a[0] - s == 0.0 { 0.0 } else { a[1] }]
                } else {
                    vec![s - a[0], b[1]]
                }
            })
        } else {
            let pb = space.unroll(&a, &b);
            Box::new(move |t| {
                if t == 0.0 {
                    return a.clone();
                }
                if t == 1.0 {
                    return b.clone();
                }
                let p = [(1.0 - t) * a[0] + t * pb[0], t * pb[1]];
                space.roll(&a, p)
            })
        };
        Ok(GeodesicSegment::new(Point::new(tag, x.to_vec())?, Point::new(tag, y.to_vec())?, len, unique, eval))
    }

    fn contraction_preimage(&self, y: &[f64], o: &[f64], t: f64) -> Result<Option<Vec<f64>>> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::OutOfRange(format!("preimage time {t} not in (0, 1)")));
        }
        if o[0] == 0.0 {
            return Ok(Some(vec![y[0] / (1.0 - t), y[1]]));
        }
        if y[0] == 0.0 {
            return Ok(None);
        }
        let py = self.unroll(o, y);
        let px = [o[0] + (py[0] - o[0]) / (1.0 - t), py[1] / (1.0 - t)];
        let alpha = px[1].atan2(px[0]);
        let crosses_apex = py[1] * px[1] < 0.0 || (py[1] == 0.0 && px[0] < 0.0);
        Ok((!crosses_apex && alpha.abs() < self.theta / 2.0).then(|| self.roll(o, px)))
    }

    fn cut_locus_member(&self, z: &[f64], x: &[f64]) -> Result<bool> {
        if dist(self.theta, z, x) == 0.0 {
            return Err(Error::Invalid("cut locus membership needs x ≠ z".into()));
        }
        if self.is_plane() || z[0] == 0.0 {
            return Ok(false);
        }
        Ok(x[0] == 0.0 || (angle_gap(self.theta, z[1], x[1]) - self.theta / 2.0).abs() <= 1e-12)
    }

    fn extends_beyond(&self, x: &[f64], z: &[f64]) -> bool {
        if dist(self.theta, x, z) == 0.0 {
            return false;
        }
        if self.is_plane() || x[0] == 0.0 {
            return true;
        }
        z[0] != 0.0 && angle_gap(self.theta, x[1], z[1]) < self.theta / 2.0 - 1e-12
    }

    fn ray_chart(&self, z: &[f64], x: &[f64]) -> Option<RayChart> {
        let d = dist(self.theta, z, x);
        if d == 0.0 {
            return None;
        }
        if z[0] == 0.0 {
            let psi = TAU * x[1] / self.theta;
            return Some(RayChart { direction: vec![psi.cos(), psi.sin()], shape: None, arclength: d });
        }
        if x[0] == 0.0 || (angle_gap(self.theta, z[1], x[1]) - self.theta / 2.0).abs() <= 1e-12 {
            return None;
        }
        let p = self.unroll(z, x);
        let v = [p[0] - z[0], p[1]];
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        Some(RayChart { direction: vec![v[0] / n, v[1] / n], shape: None, arclength: d })
    }

    /// Isometric embedding as a circular cone in ℝ³.
    fn index_coords(&self, x: &[f64]) -> Vec<f64> {
        let k = self.theta / TAU;
        let psi = x[1] / k;
        vec![x[0] * k * psi.cos(), x[0] * k * psi.sin(), x[0] * (1.0 - k * k).max(0.0).sqrt()]
    }

    /// Equal-area polar chart: the angle is stretched to a full turn and the radius shrunk to match.
    fn cell_coords(&self, x: &[f64]) -> Vec<f64> {
        let (rho, psi) = (x[0] * (self.theta / TAU).sqrt(), x[1] * TAU / self.theta);
        vec![rho * psi.cos(), rho * psi.sin()]
    }

    fn intrinsic_dim(&self) -> usize {
        2
    }
}

/// Area-uniform cloud on the cone truncated at `max_radius`, total mass equal to the area.
pub fn sample_cone<R: Rng + ?Sized>(theta: f64, max_radius: f64, n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    ConeSpace::new(theta)?;
    let coords = (0..n)
        .map(|_| vec![max_radius * rng.random::<f64>().sqrt(), theta * rng.random::<f64>()])
        .collect();
    let area = 0.5 * theta * max_radius * max_radius;
    DiscreteMeasure::uniform(SpaceTag::Cone { theta }, coords, area / n as f64, Some(Descriptor::ConeSurface { theta, max_radius }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let apex = ConePoint::apex(PI);
        let x = ConePoint::new(0.7, 1.0, PI).unwrap();
        assert_eq!(cone_distance(&apex, &x).unwrap(), 0.7);
        let a = ConePoint::new(1.0, 0.0, PI).unwrap();
        let b = ConePoint::new(1.0, PI / 2.0, PI).unwrap();
        assert!((cone_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(cone_distance(&a, &ConePoint::new(1.0, 0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn scan_half_plane_cone() {
        let m = cone_strict_triangle_scan(PI, 50).unwrap();
        assert!(m > 0.25, "{m}");
        assert!(cone_strict_triangle_scan(TAU, 10).is_err());
    }

    #[test]
    fn segment_is_constant_speed() {
        let s = ConeSpace::new(1.5).unwrap();
        let (x, y) = ([0.8, 0.1], [0.6, 1.2]);
        let seg = s.segment(&x, &y).unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let p = seg.coords_at(t);
            assert!((s.distance(&x, &p) - t * seg.length).abs() < 1e-12);
        }
    }

    #[test]
    fn apex_cut_locus_and_extension() {
        let s = ConeSpace::new(PI).unwrap();
        assert!(s.cut_locus_member(&[1.0, 0.0], &[0.0, 0.0]).unwrap());
        assert!(s.cut_locus_member(&[1.0, 0.0], &[0.4, PI / 2.0]).unwrap());
        assert!(!s.cut_locus_member(&[0.0, 0.0], &[0.4, 1.0]).unwrap());
        assert!(!s.extends_beyond(&[0.5, 0.3], &[0.0, 0.0]));
        assert!(s.extends_beyond(&[0.0, 0.0], &[0.5, 0.3]));
    }

    #[test]
    fn embedding_preserves_radial_distance() {
        let s = ConeSpace::new(2.0).unwrap();
        let e = s.index_coords(&[1.5, 0.7]);
        assert!((e.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn preimage_round_trip() {
        let s = ConeSpace::new(4.0).unwrap();
        let (x, o) = ([0.9, 0.5], [0.4, 1.5]);
        let y = s.contract_toward(&x, &o, 0.3).unwrap();
        let back = s.contraction_preimage(&y, &o, 0.3).unwrap().unwrap();
        assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12, "{back:?}");
    }
}
