use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::group::HeisPoint;
use super::inversion::invert_endpoint;
use crate::error::{Error, Result};

/// Parameter `(a+ib, v, r)` of a geodesic from the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicParam {
    /// Unit vector `(a₁..aₙ, b₁..bₙ)`.
    pub dir: Vec<f64>,
    pub v: f64,
    pub r: f64,
    /// Set when the endpoint is on the center and `dir` was chosen canonically.
    #[serde(default)]
    pub non_unique: bool,
}

impl GeodesicParam {
    pub fn new(dir: Vec<f64>, v: f64, r: f64) -> Result<Self> {
        let p = GeodesicParam { dir, v, r, non_unique: false };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dir.is_empty() || !self.dir.len().is_multiple_of(2) {
            return Err(Error::Invalid(format!("direction of length {} is not in ℝ²ⁿ", self.dir.len())));
        }
        let norm = self.dir.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("direction has norm {norm}")));
        }
        if !(self.v.abs() <= TAU) {
            return Err(Error::OutOfRange(format!("v = {} outside [−2π, 2π]", self.v)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::OutOfRange(format!("r = {} must be positive", self.r)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.dir.len() / 2
    }

    /// `a_j + i b_j`.
    pub fn dir_complex(&self) -> Vec<Complex64> {
        let n = self.n();
        (0..n).map(|j| Complex64::new(self.dir[j], self.dir[n + j])).collect()
    }

    pub fn from_complex(dir: &[Complex64], v: f64, r: f64) -> Self {
        let mut d: Vec<f64> = dir.iter().map(|c| c.re).collect();
        d.extend(dir.iter().map(|c| c.im));
        GeodesicParam { dir: d, v, r, non_unique: false }
    }

    /// Right end of the maximal minimizing interval (`∞` for horizontal lines).
    pub fn max_s(&self) -> f64 {
        if self.v.abs() <= 1e-12 {
            f64::INFINITY
        } else {
            TAU * self.r / self.v.abs()
        }
    }

    /// Member of the set `D` where the endpoint map is a diffeomorphism.
    pub fn in_d(&self) -> bool {
        self.v.abs() < TAU && self.r > 0.0
    }
}

/// `sin(x)/x`.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(u − sin u)/u²`.
pub(crate) fn h(u: f64) -> f64 {
    if u.abs() < 1.0 {
        let u2 = u * u;
        u * (1.0 / 6.0 - u2 * (1.0 / 120.0 - u2 * (1.0 / 5040.0 - u2 * (1.0 / 362_880.0 - u2 * (1.0 / 39_916_800.0 - u2 / 6_227_020_800.0)))))
    } else {
        (u - u.sin()) / (u * u)
    }
}

/// Point at arc length `s` along the geodesic, without interval checks.
pub(crate) fn gamma(dir: &[Complex64], kappa: f64, s: f64) -> HeisPoint {
    let u = kappa * s;
    let rot = Complex64::from_polar(s * sinc(u / 2.0), -u / 2.0);
    HeisPoint { zeta: dir.iter().map(|c| c * rot).collect(), t: 2.0 * s * s * h(u) }
}

/// Point at arc length `s ∈ [0, max_s]` along the geodesic with parameter `p`.
pub fn geodesic_point(p: &GeodesicParam, s: f64) -> Result<HeisPoint> {
    let max_s = p.max_s();
    if !(s >= 0.0 && s <= max_s * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange(format!("arc length {s} outside the maximal interval [0, {max_s}]")));
    }
    Ok(gamma(&p.dir_complex(), p.v / p.r, s))
}

/// Endpoint map: the point at arc length `r`.
pub fn endpoint_map(p: &GeodesicParam) -> HeisPoint {
    gamma(&p.dir_complex(), p.v / p.r, p.r)
}

/// `1 − cos v` without cancellation.
fn one_minus_cos(v: f64) -> f64 {
    let s = (v / 2.0).sin();
    2.0 * s * s
}

fn lv(v: f64) -> [[f64; 2]; 2] {
    let (s, c1) = (v.sin(), one_minus_cos(v));
    [[s, c1], [-c1, s]]
}

/// `L_v(x₁, x₂) = (x₁ sin v + x₂(1−cos v), −x₁(1−cos v) + x₂ sin v)`.
pub fn lv_apply(v: f64, x: [f64; 2]) -> Result<[f64; 2]> {
    if v == 0.0 {
        return Err(Error::OutOfRange("L_v needs v ≠ 0".into()));
    }
    let m = lv(v);
    Ok([m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]])
}

/// `A_v = L_{−v}⁻¹ L_v`.
pub fn av_matrix(v: f64) -> Result<[[f64; 2]; 2]> {
    if one_minus_cos(v) == 0.0 || (v / TAU).fract() == 0.0 {
        return Err(Error::OutOfRange(format!("A_v undefined at v = {v} (det L_v = 0)")));
    }
    let (a, b) = (lv(-v), lv(v));
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = inv[i][0] * b[0][j] + inv[i][1] * b[1][j];
        }
    }
    Ok(out)
}

/// Reflected parameter: direction `−(a+ib)`, turning `−v(2π−|v|)/(2|v|)`, length `(2π−|v|)/(2|v|)·r`.
/// Its endpoint continues the geodesic from `Φ(a+ib, v, r)` through the origin.
pub fn psi_map(p: &GeodesicParam) -> Result<GeodesicParam> {
    if p.v == 0.0 || p.v.abs() >= TAU {
        return Err(Error::OutOfRange(format!("Ψ needs 0 < |v| < 2π, got v = {}", p.v)));
    }
    let dir = p.dir.iter().map(|c| -c).collect();
    let factor = (TAU - p.v.abs()) / (2.0 * p.v.abs());
    Ok(GeodesicParam { dir, v: -p.v * factor, r: factor * p.r, non_unique: false })
}

/// `(A_v(a+ib), −v, r)`: the geodesic from the origin to `−Φ(a+ib, v, r)`.
pub fn reversed_param(p: &GeodesicParam) -> Result<GeodesicParam> {
    let a = av_matrix(p.v)?;
    let n = p.n();
    let mut dir = vec![0.0; 2 * n];
    for j in 0..n {
        let (x1, x2) = (p.dir[j], p.dir[n + j]);
        dir[j] = a[0][0] * x1 + a[0][1] * x2;
        dir[n + j] = a[1][0] * x1 + a[1][1] * x2;
    }
    Ok(GeodesicParam { dir, v: -p.v, r: p.r, non_unique: p.non_unique })
}

/// `Λ = Φ ∘ Ψ ∘ Φ⁻¹` off the center and the horizontal plane `t = 0`.
pub fn lambda_map(x: &HeisPoint) -> Result<HeisPoint> {
    if x.is_center() {
        return Err(Error::OutOfRange("Λ is undefined on the center L".into()));
    }
    if x.t == 0.0 {
        return Err(Error::OutOfRange("Λ is undefined on the horizontal plane t = 0".into()));
    }
    let p = invert_endpoint(x, super::DEFAULT_TOL)?;
    Ok(endpoint_map(&psi_map(&p)?))
}

/// Closed-form `A_v`: rotation by `π − v`.
pub fn av_rotation(v: f64) -> [[f64; 2]; 2] {
    let phi = PI - v;
    [[phi.cos(), -phi.sin()], [phi.sin(), phi.cos()]]
}
