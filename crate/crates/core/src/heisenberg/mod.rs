//! The Heisenberg group ℍⁿ with its Carnot–Carathéodory distance.

mod geodesic;
mod group;
mod inversion;

pub use geodesic::{
    av_matrix, av_rotation, endpoint_map, geodesic_point, lambda_map, lv_apply, psi_map, reversed_param, GeodesicParam,
};
pub use group::{dilate, group_inv, group_mul, HeisPoint};
pub use inversion::{cc_distance, g, g_prime, invert_endpoint, norm_cc, solve_v};

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::measure::{Descriptor, DiscreteMeasure, GeodesicSegment, Point, SpaceTag};
use crate::space::{check_unit, MetricSpace, RayChart};
use geodesic::gamma;
use group::{left_translate_inv, mul_coords};

/// Default tolerance of the `v`-equation solve.
pub const DEFAULT_TOL: f64 = 1e-14;

/// ℍⁿ in exponential coordinates `(ξ, η, t)`.
#[derive(Clone, Copy, Debug)]
pub struct HeisenbergSpace {
    n: usize,
}

impl HeisenbergSpace {
    pub fn new(n: usize) -> Self {
        HeisenbergSpace { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Geodesic parameter of `(−o)·x`, or `None` when `x = o`.
    pub fn param_from(&self, o: &[f64], x: &[f64]) -> Option<GeodesicParam> {
        let w = HeisPoint::from_coords(&left_translate_inv(o, x));
        if w.is_origin() {
            None
        } else {
            invert_endpoint(&w, DEFAULT_TOL).ok()
        }
    }
}

/// Whether `(−z)·x` lies on the center minus the origin.
pub fn cut_locus_member(z: &HeisPoint, x: &HeisPoint) -> Result<bool> {
    let w = group_mul(&group_inv(z), x);
    if w.is_origin() {
        return Err(Error::Invalid("cut locus membership needs x ≠ z".into()));
    }
    Ok(w.is_center())
}

/// `o·γ((1−t)·d(o, x))` along the geodesic from `o` to `x`.
pub fn contract_toward(x: &HeisPoint, o: &HeisPoint, t: f64) -> Result<HeisPoint> {
    let c = HeisenbergSpace::new(x.n()).contract_toward(&x.to_coords(), &o.to_coords(), t)?;
    Ok(HeisPoint::from_coords(&c))
}

impl MetricSpace for HeisenbergSpace {
    fn tag(&self) -> SpaceTag {
        SpaceTag::Heisenberg(self.n)
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        norm_cc(&HeisPoint::from_coords(&left_translate_inv(x, y)))
    }

    fn segment(&self, x: &[f64], y: &[f64]) -> Result<GeodesicSegment> {
        let tag = self.tag();
        let start = Point::new(tag, x.to_vec())?;
        let end = Point::new(tag, y.to_vec())?;
        let Some(p) = self.param_from(x, y) else {
            let xv = x.to_vec();
            return Ok(GeodesicSegment::new(start, end, 0.0, true, Box::new(move |_| xv.clone())));
        };
        let (xv, yv) = (x.to_vec(), y.to_vec());
        let dir = p.dir_complex();
        let (kappa, r) = (p.v / p.r, p.r);
        Ok(GeodesicSegment::new(
            start,
            end,
            r,
            !p.non_unique,
            Box::new(move |s| {
                if s == 0.0 {
                    xv.clone()
                } else if s == 1.0 {
                    yv.clone()
                } else {
                    mul_coords(&xv, &gamma(&dir, kappa, s * r).to_coords())
                }
            }),
        ))
    }

    fn contract_toward(&self, x: &[f64], o: &[f64], t: f64) -> Result<Vec<f64>> {
        check_unit(t)?;
        if t == 0.0 {
            return Ok(x.to_vec());
        }
        if t == 1.0 {
            return Ok(o.to_vec());
        }
        let Some(p) = self.param_from(o, x) else {
            return Ok(o.to_vec());
        };
        Ok(mul_coords(o, &gamma(&p.dir_complex(), p.v / p.r, (1.0 - t) * p.r).to_coords()))
    }

    fn contraction_preimage(&self, y: &[f64], o: &[f64], t: f64) -> Result<Option<Vec<f64>>> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::OutOfRange(format!("preimage time {t} not in (0, 1)")));
        }
        let Some(p) = self.param_from(o, y) else {
            return Ok(Some(o.to_vec()));
        };
        if p.non_unique || p.v.abs() / (1.0 - t) >= TAU {
            return Ok(None);
        }
        Ok(Some(mul_coords(o, &gamma(&p.dir_complex(), p.v / p.r, p.r / (1.0 - t)).to_coords())))
    }

    fn cut_locus_member(&self, z: &[f64], x: &[f64]) -> Result<bool> {
        cut_locus_member(&HeisPoint::from_coords(z), &HeisPoint::from_coords(x))
    }

    fn extends_beyond(&self, x: &[f64], z: &[f64]) -> bool {
        let w = HeisPoint::from_coords(&left_translate_inv(z, x));
        !w.is_center()
    }

    fn ray_chart(&self, z: &[f64], x: &[f64]) -> Option<RayChart> {
        let p = self.param_from(z, x)?;
        Some(RayChart { shape: Some(p.v / p.r), arclength: p.r, direction: p.dir })
    }

    fn index_box(&self, x: &[f64], radius: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let rho = (0..n).map(|j| x[j] * x[j] + x[n + j] * x[n + j]).sum::<f64>().sqrt();
        let mut lo: Vec<f64> = x.iter().map(|c| c - radius).collect();
        let mut hi: Vec<f64> = x.iter().map(|c| c + radius).collect();
        let dt = radius * radius + 2.0 * rho * radius;
        lo[2 * n] = x[2 * n] - dt;
        hi[2 * n] = x[2 * n] + dt;
        (lo, hi)
    }

    fn intrinsic_dim(&self) -> usize {
        2 * self.n + 1
    }

    fn is_exceptional(&self, z: &[f64], x: &[f64]) -> bool {
        let w = HeisPoint::from_coords(&left_translate_inv(z, x));
        w.is_center()
    }
}

/// Uniform (Haar) cloud on the coordinate box `[lo, hi]`.
pub fn sample_haar_box<R: Rng + ?Sized>(n_points: usize, lo: &[f64], hi: &[f64], rng: &mut R) -> Result<DiscreteMeasure> {
    if lo.len() != hi.len() || lo.len() % 2 != 1 || lo.len() < 3 {
        return Err(Error::Invalid("a Haar box needs 2n+1 lower and upper bounds".into()));
    }
    let n = (lo.len() - 1) / 2;
    let coords = (0..n_points)
        .map(|_| lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect())
        .collect();
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    DiscreteMeasure::uniform(
        SpaceTag::Heisenberg(n),
        coords,
        vol / n_points as f64,
        Some(Descriptor::HaarBox { lo: lo.to_vec(), hi: hi.to_vec() }),
    )
}
