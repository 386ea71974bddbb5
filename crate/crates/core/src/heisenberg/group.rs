use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Point, SpaceTag};

/// `[ζ, t]` with `ζ ∈ ℂⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeisPoint {
    pub zeta: Vec<Complex64>,
    pub t: f64,
}

impl HeisPoint {
    pub fn new(zeta: Vec<Complex64>, t: f64) -> Self {
        HeisPoint { zeta, t }
    }

    pub fn origin(n: usize) -> Self {
        HeisPoint { zeta: vec![Complex64::new(0.0, 0.0); n], t: 0.0 }
    }

    /// `[0, t]` on the center.
    pub fn vertical(n: usize, t: f64) -> Self {
        HeisPoint { zeta: vec![Complex64::new(0.0, 0.0); n], t }
    }

    pub fn n(&self) -> usize {
        self.zeta.len()
    }

    /// Coordinates `(ξ₁..ξₙ, η₁..ηₙ, t)`.
    pub fn from_coords(c: &[f64]) -> Self {
        let n = (c.len() - 1) / 2;
        HeisPoint { zeta: (0..n).map(|j| Complex64::new(c[j], c[n + j])).collect(), t: c[2 * n] }
    }

    pub fn to_coords(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.zeta.iter().map(|z| z.re).collect();
        out.extend(self.zeta.iter().map(|z| z.im));
        out.push(self.t);
        out
    }

    pub fn to_point(&self) -> Point {
        Point { space: SpaceTag::Heisenberg(self.n()), coords: self.to_coords() }
    }

    pub fn from_point(p: &Point) -> Result<Self> {
        match p.space {
            SpaceTag::Heisenberg(_) => Ok(Self::from_coords(&p.coords)),
            other => Err(Error::SpaceMismatch { expected: "heis".into(), found: other.name() }),
        }
    }

    pub fn zeta_norm(&self) -> f64 {
        self.zeta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.zeta.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// On the center `L = {ζ = 0}`.
    pub fn is_center(&self) -> bool {
        self.zeta.iter().all(|z| *z == Complex64::new(0.0, 0.0))
    }

    pub fn is_origin(&self) -> bool {
        self.is_center() && self.t == 0.0
    }
}

/// `[ζ, t]·[ζ', t'] = [ζ+ζ', t+t'+2 Σ Im(ζ_j ζ̄'_j)]`.
pub fn group_mul(x: &HeisPoint, y: &HeisPoint) -> HeisPoint {
    let mut t = x.t + y.t;
    let mut zeta = Vec::with_capacity(x.n());
    for (a, b) in x.zeta.iter().zip(&y.zeta) {
        t += 2.0 * (a * b.conj()).im;
        zeta.push(a + b);
    }
    HeisPoint { zeta, t }
}

pub fn group_inv(x: &HeisPoint) -> HeisPoint {
    HeisPoint { zeta: x.zeta.iter().map(|z| -z).collect(), t: -x.t }
}

/// `δ_λ[ζ, t] = [λζ, λ²t]`.
pub fn dilate(x: &HeisPoint, lam: f64) -> Result<HeisPoint> {
    if !(lam > 0.0) {
        return Err(Error::OutOfRange(format!("dilation factor {lam} must be positive")));
    }
    Ok(HeisPoint { zeta: x.zeta.iter().map(|z| z * lam).collect(), t: lam * lam * x.t })
}

/// `(−x)·y` on raw coordinates.
pub(crate) fn left_translate_inv(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = (x.len() - 1) / 2;
    let mut out = vec![0.0; 2 * n + 1];
    let mut t = y[2 * n] - x[2 * n];
    for j in 0..n {
        let (a_re, a_im) = (-x[j], -x[n + j]);
        let (b_re, b_im) = (y[j], y[n + j]);
        // Im(a·conj(b)) = a_im·b_re − a_re·b_im
        t += 2.0 * (a_im * b_re - a_re * b_im);
        out[j] = a_re + b_re;
        out[n + j] = a_im + b_im;
    }
    out[2 * n] = t;
    out
}

/// `x·y` on raw coordinates.
pub(crate) fn mul_coords(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = (x.len() - 1) / 2;
    let mut out = vec![0.0; 2 * n + 1];
    let mut t = x[2 * n] + y[2 * n];
    for j in 0..n {
        t += 2.0 * (x[n + j] * y[j] - x[j] * y[n + j]);
        out[j] = x[j] + y[j];
        out[n + j] = x[n + j] + y[n + j];
    }
    out[2 * n] = t;
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeisPointRecord {
    zeta_re: Vec<f64>,
    zeta_im: Vec<f64>,
    t: f64,
}

impl Serialize for HeisPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HeisPointRecord {
            zeta_re: self.zeta.iter().map(|z| z.re).collect(),
            zeta_im: self.zeta.iter().map(|z| z.im).collect(),
            t: self.t,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HeisPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = HeisPointRecord::deserialize(d)?;
        if r.zeta_re.len() != r.zeta_im.len() || r.zeta_re.is_empty() {
            return Err(serde::de::Error::custom("zeta_re and zeta_im must be nonempty and of equal length"));
        }
        let p = HeisPoint {
            zeta: r.zeta_re.iter().zip(&r.zeta_im).map(|(a, b)| Complex64::new(*a, *b)).collect(),
            t: r.t,
        };
        if !p.is_finite() {
            return Err(serde::de::Error::custom("non-finite coordinates"));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn group_law_examples() {
        let x = HeisPoint::new(vec![c(0.3, -1.2)], 0.7);
        assert_eq!(group_mul(&HeisPoint::origin(1), &x), x);
        let p = group_mul(&HeisPoint::new(vec![c(1.0, 0.0)], 0.0), &HeisPoint::new(vec![c(0.0, 1.0)], 0.0));
        assert_eq!(p, HeisPoint::new(vec![c(1.0, 1.0)], -2.0));
        assert_eq!(group_mul(&x, &group_inv(&x)), HeisPoint::origin(1));
    }

    #[test]
    fn dilation_example() {
        let x = HeisPoint::new(vec![c(1.0, 0.0)], 4.0);
        assert_eq!(dilate(&x, 2.0).unwrap(), HeisPoint::new(vec![c(2.0, 0.0)], 16.0));
        assert_eq!(dilate(&x, 1.0).unwrap(), x);
        assert!(dilate(&x, 0.0).is_err());
    }

    #[test]
    fn coordinate_helpers_match_group_law() {
        let x = HeisPoint::new(vec![c(0.3, -1.2), c(2.0, 0.5)], 0.7);
        let y = HeisPoint::new(vec![c(-0.8, 0.1), c(0.4, 1.5)], -2.0);
        let xy = group_mul(&x, &y).to_coords();
        assert_eq!(mul_coords(&x.to_coords(), &y.to_coords()), xy);
        let inv = group_mul(&group_inv(&x), &y).to_coords();
        assert_eq!(left_translate_inv(&x.to_coords(), &y.to_coords()), inv);
    }

    #[test]
    fn json_shape() {
        let x = HeisPoint::new(vec![c(1.0, 2.0)], 3.0);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"zeta_re":[1.0],"zeta_im":[2.0],"t":3.0}"#);
        assert_eq!(serde_json::from_str::<HeisPoint>(&s).unwrap(), x);
    }
}
