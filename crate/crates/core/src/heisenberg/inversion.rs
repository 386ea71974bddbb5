use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::geodesic::{h, sinc, GeodesicParam};
use super::group::HeisPoint;
use crate::error::{Error, Result};

/// `g(v) = (v − sin v)/(1 − cos v)`.
pub fn g(v: f64) -> f64 {
    if v.abs() < 1e-8 {
        return v / 3.0 + v * v * v / 180.0;
    }
    let s = (v / 2.0).sin();
    // v − sin v = v²·h(v), 1 − cos v = 2 sin²(v/2)
    v * v * h(v) / (2.0 * s * s)
}

/// `g'(v) = 1 − g(v)·cot(v/2)`.
pub fn g_prime(v: f64) -> f64 {
    if v.abs() < 1e-3 {
        let v2 = v * v;
        return 1.0 / 3.0 + v2 / 60.0 + v2 * v2 / 2520.0;
    }
    let half = v / 2.0;
    1.0 - g(v) * half.cos() / half.sin()
}

const EDGE: f64 = TAU - 1e-12;

/// Solves `g(v) = tau` on `(−2π, 2π)` by safeguarded Newton iteration.
pub fn solve_v(tau: f64, tol: f64) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-EDGE, EDGE);
    if g(lo) >= tau {
        return lo;
    }
    if g(hi) <= tau {
        return hi;
    }
    let mut v = (3.0 * tau).clamp(-EDGE, EDGE);
    if tau.abs() > 1.0 {
        // near ±2π: g ≈ 4π/δ² with δ = 2π − |v|
        v = tau.signum() * (TAU - (4.0 * PI / tau.abs()).sqrt()).clamp(0.0, EDGE);
    }
    for _ in 0..200 {
        let f = g(v) - tau;
        if f == 0.0 {
            return v;
        }
        if f < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let d = g_prime(v);
        let mut next = v - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - v).abs();
        v = next;
        if step <= tol * v.abs().max(1.0) || hi - lo <= tol * v.abs().max(1.0) {
            break;
        }
    }
    v
}

/// Geodesic parameter of the geodesic from the origin to `x`.
pub fn invert_endpoint(x: &HeisPoint, tol: f64) -> Result<GeodesicParam> {
    let n = x.n();
    let rho = x.zeta_norm();
    if rho == 0.0 {
        if x.t == 0.0 {
            return Err(Error::Invalid("the origin has no geodesic parameter".into()));
        }
        let mut dir = vec![0.0; 2 * n];
        dir[0] = 1.0;
        return Ok(GeodesicParam { dir, v: TAU * x.t.signum(), r: (PI * x.t.abs()).sqrt(), non_unique: true });
    }
    let tau = x.t / (rho * rho);
    if !tau.is_finite() {
        let mut p = invert_endpoint(&HeisPoint::vertical(n, x.t), tol)?;
        p.non_unique = true;
        return Ok(p);
    }
    let v = solve_v(tau, tol);
    let r = if v.abs() > PI {
        (x.t / (2.0 * h(v))).sqrt()
    } else {
        rho / sinc(v / 2.0)
    };
    let rot = Complex64::from_polar(1.0 / rho, v / 2.0);
    let dir: Vec<Complex64> = x.zeta.iter().map(|z| z * rot).collect();
    Ok(GeodesicParam::from_complex(&dir, v, r))
}

/// Carnot–Carathéodory distance from the origin.
pub fn norm_cc(x: &HeisPoint) -> f64 {
    if x.is_origin() {
        0.0
    } else {
        invert_endpoint(x, super::DEFAULT_TOL).map(|p| p.r).unwrap_or(0.0)
    }
}

/// `d(x, y) = d(0, (−x)·y)`.
pub fn cc_distance(x: &HeisPoint, y: &HeisPoint) -> f64 {
    norm_cc(&super::group::group_mul(&super::group::group_inv(x), y))
}
