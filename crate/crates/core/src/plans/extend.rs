use std::sync::Arc;

use super::InversionPlan;
use crate::error::{Error, Result};
use crate::euclid::ConvexBody;
use crate::measure::{Coupling, DiscreteMeasure, Pair, Particle, Point};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Extends a plan given on `B_r(z)` to the annuli `nr ≤ |x − z| < (n+1)r`, `n = 1..=annuli`.
///
/// The point at `(1−ε)·nr + ε·(n+1)r` on the ray in direction `u` goes to the point at
/// `(1−ε)·τ/2 + ε·τ` on the ray in direction `−u`, where `τ` is the exit distance along `−u`.
/// With `annuli = None` the annuli cover the whole support of `mu`.
pub fn extend_local_plan(
    body: &ConvexBody,
    z: &Point,
    local: &InversionPlan,
    mu: &DiscreteMeasure,
    r: f64,
    annuli: Option<usize>,
) -> Result<InversionPlan> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::OutOfRange(format!("local radius {r} must be positive")));
    }
    if !(body.margin(&z.coords) > 0.0) {
        return Err(Error::OutOfRange("center is not interior to the body".into()));
    }
    mu.space().ensure_same(&z.space)?;
    let zc = &z.coords;
    let radii: Vec<f64> = (0..mu.len()).map(|i| dist(mu.coords(i), zc)).collect();
    let inner: Vec<usize> = (0..mu.len()).filter(|&i| radii[i] < r).collect();
    let src = local.source();
    if src.len() != inner.len() || inner.iter().enumerate().any(|(k, &i)| src.coords(k) != mu.coords(i) || src.weight(k) != mu.weight(i)) {
        return Err(Error::Invalid("local plan source is not μ restricted to the open ball B_r(z)".into()));
    }
    let reach = radii.iter().copied().fold(0.0, f64::max);
    if r > reach {
        return Ok(local.clone());
    }
    let k = annuli.unwrap_or((reach / r).floor() as usize);
    let outer = (k + 1) as f64 * r;

    let kept: Vec<usize> = (0..mu.len()).filter(|&i| radii[i] < outer).collect();
    let mut new_index = vec![usize::MAX; mu.len()];
    for (k, &i) in kept.iter().enumerate() {
        new_index[i] = k;
    }
    let source = Arc::new(DiscreteMeasure::new(
        mu.space(),
        kept.iter().map(|&i| Particle { point: Point { space: mu.space(), coords: mu.coords(i).to_vec() }, weight: mu.weight(i) }).collect(),
        None,
    )?);
    let mut targets: Vec<Point> = local.coupling.targets().to_vec();
    let mut pairs: Vec<Pair> = local
        .coupling
        .pairs()
        .iter()
        .map(|p| Pair { source: new_index[inner[p.source]], ..*p })
        .collect();
    for &i in &kept {
        let rho = radii[i];
        if rho < r {
            continue;
        }
        let n = (rho / r).floor();
        let eps = rho / r - n;
        let u: Vec<f64> = mu.coords(i).iter().zip(zc).map(|(a, b)| (a - b) / rho).collect();
        let back: Vec<f64> = u.iter().map(|c| -c).collect();
        let tau = body.ray_exit(zc, &back);
        let s = (1.0 - eps) * tau / 2.0 + eps * tau;
        targets.push(Point { space: z.space, coords: zc.iter().zip(&back).map(|(a, b)| a + s * b).collect() });
        pairs.push(Pair { source: new_index[i], target: targets.len() - 1, weight: mu.weight(i) });
    }
    InversionPlan::new(z.clone(), Coupling::new(source, targets, pairs)?, local.excluded_mass)
}
