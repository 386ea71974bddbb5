use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::measure::{Descriptor, DiscreteMeasure, GeodesicSegment, Point, SpaceTag};
use crate::space::{check_unit, MetricSpace, RayChart};

/// Unit vector of ℝ³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint(pub [f64; 3]);

impl SpherePoint {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("sphere point has norm {n}")));
        }
        Ok(SpherePoint(v))
    }

    /// Normalizes a nonzero vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let n = norm(&v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Invalid("cannot normalize a zero vector".into()));
        }
        Ok(SpherePoint([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Point at colatitude `theta` and longitude `phi`.
    pub fn spherical(theta: f64, phi: f64) -> Self {
        SpherePoint([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
    }

    pub fn north() -> Self {
        SpherePoint([0.0, 0.0, 1.0])
    }

    pub fn antipode(&self) -> Self {
        SpherePoint(self.0.map(|c| -c))
    }

    pub fn to_point(&self) -> Point {
        Point { space: SpaceTag::Sphere2, coords: self.0.to_vec() }
    }

    pub fn colatitude(&self) -> f64 {
        self.0[2].clamp(-1.0, 1.0).acos()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    norm(&cross(x, y)).atan2(dot(x, y))
}

/// Unit vector at `z` tangent to the great circle toward `x`, if `x ≠ ±z`.
fn tangent_toward(z: &[f64], x: &[f64]) -> Option<[f64; 3]> {
    let c = dot(x, z);
    let u = [x[0] - c * z[0], x[1] - c * z[1], x[2] - c * z[2]];
    let n = norm(&u);
    (n > 1e-15).then(|| [u[0] / n, u[1] / n, u[2] / n])
}

fn along(z: &[f64], u: &[f64; 3], phi: f64) -> Vec<f64> {
    let (s, c) = phi.sin_cos();
    (0..3).map(|k| c * z[k] + s * u[k]).collect()
}

fn is_antipodal(x: &[f64], y: &[f64]) -> bool {
    dot(x, y) < 0.0 && norm(&cross(x, y)) < 1e-12
}

/// Great-circle distance, in `[0, π]`.
pub fn sphere_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    dist(&x.0, &y.0)
}

fn slerp(x: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    if is_antipodal(x, y) {
        return Err(Error::NonUnique(" (antipodal points on the sphere)".into()));
    }
    if t == 0.0 {
        return Ok(x.to_vec());
    }
    if t == 1.0 {
        return Ok(y.to_vec());
    }
    let d = dist(x, y);
    match tangent_toward(x, y) {
        None => Ok(x.to_vec()),
        Some(u) => Ok(along(x, &u, t * d)),
    }
}

pub fn sphere_geodesic_point(x: &SpherePoint, y: &SpherePoint, t: f64) -> Result<SpherePoint> {
    check_unit(t)?;
    let v = slerp(&x.0, &y.0, t)?;
    Ok(SpherePoint([v[0], v[1], v[2]]))
}

fn inversion(z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if is_antipodal(x, z) {
        return Err(Error::OutOfRange("inversion undefined at the antipode of the center".into()));
    }
    let u = tangent_toward(z, x).ok_or_else(|| Error::OutOfRange("inversion undefined at the center".into()))?;
    let d = dist(x, z);
    Ok(along(z, &u, -(PI - d) / 2.0))
}

/// Point beyond `z` on the great circle from `x`, at distance `(π − d(x,z))/2` from `z`.
pub fn sphere_inversion_map(z: &SpherePoint, x: &SpherePoint) -> Result<SpherePoint> {
    let v = inversion(&z.0, &x.0)?;
    Ok(SpherePoint([v[0], v[1], v[2]]))
}

/// Unit sphere S² ⊂ ℝ³.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sphere2;

impl Sphere2 {
    pub fn inversion(&self, z: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        inversion(z, x)
    }
}

impl MetricSpace for Sphere2 {
    fn tag(&self) -> SpaceTag {
        SpaceTag::Sphere2
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        dist(x, y)
    }

    fn segment(&self, x: &[f64], y: &[f64]) -> Result<GeodesicSegment> {
        if is_antipodal(x, y) {
            return Err(Error::NonUnique(" (antipodal points on the sphere)".into()));
        }
        let (a, b) = (x.to_vec(), y.to_vec());
        Ok(GeodesicSegment::new(
            Point::new(SpaceTag::Sphere2, a.clone())?,
            Point::new(SpaceTag::Sphere2, b.clone())?,
            dist(x, y),
            true,
            Box::new(move |t| slerp(&a, &b, t).unwrap_or_else(|_| a.clone())),
        ))
    }

    fn contract_toward(&self, x: &[f64], o: &[f64], t: f64) -> Result<Vec<f64>> {
        check_unit(t)?;
        slerp(x, o, t)
    }

    fn contraction_preimage(&self, y: &[f64], o: &[f64], t: f64) -> Result<Option<Vec<f64>>> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::OutOfRange(format!("preimage time {t} not in (0, 1)")));
        }
        let d = dist(o, y);
        let Some(u) = tangent_toward(o, y) else {
            return Ok(if dot(o, y) > 0.0 { Some(o.to_vec()) } else { None });
        };
        let reach = d / (1.0 - t);
        Ok((reach < PI).then(|| along(o, &u, reach)))
    }

    fn cut_locus_member(&self, z: &[f64], x: &[f64]) -> Result<bool> {
        if dist(z, x) == 0.0 {
            return Err(Error::Invalid("cut locus membership needs x ≠ z".into()));
        }
        Ok(is_antipodal(z, x))
    }

    fn extends_beyond(&self, x: &[f64], z: &[f64]) -> bool {
        let d = dist(x, z);
        d > 0.0 && !is_antipodal(x, z)
    }

    fn ray_chart(&self, z: &[f64], x: &[f64]) -> Option<RayChart> {
        if is_antipodal(z, x) {
            return None;
        }
        let u = tangent_toward(z, x)?;
        let k = (0..3).min_by(|&i, &j| z[i].abs().total_cmp(&z[j].abs())).unwrap_or(0);
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let a = tangent_toward(z, &e)?;
        let b = cross(z, &a);
        Some(RayChart { direction: vec![dot(&u, &a), dot(&u, &b)], shape: None, arclength: dist(z, x) })
    }

    /// Cylindrical equal-area chart `(longitude, height)`.
    fn cell_coords(&self, x: &[f64]) -> Vec<f64> {
        vec![x[1].atan2(x[0]), x[2]]
    }

    fn intrinsic_dim(&self) -> usize {
        2
    }

    fn is_exceptional(&self, z: &[f64], x: &[f64]) -> bool {
        is_antipodal(z, x)
    }
}

/// Uniform cloud on S² with total mass `4π`.
pub fn sample_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DiscreteMeasure> {
    let mut coords = Vec::with_capacity(n);
    while coords.len() < n {
        let g: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Ok(p) = SpherePoint::from_vector(g) {
            coords.push(p.0.to_vec());
        }
    }
    DiscreteMeasure::uniform(SpaceTag::Sphere2, coords, 4.0 * PI / n as f64, Some(Descriptor::SphereSurface))
}
