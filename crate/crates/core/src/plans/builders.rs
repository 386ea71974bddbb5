use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::InversionPlan;
use crate::error::{Error, Result};
use crate::euclid::ConvexBody;
use crate::heisenberg::{group_inv, group_mul, lambda_map, HeisPoint};
use crate::measure::{Coupling, DiscreteMeasure, Pair, Point, SpaceTag};
use crate::modelspaces::{sphere_distance, sphere_inversion_map, SpherePoint};

/// Radial inversion through `z` inside a convex body.
///
/// `x = z − s·u` goes to `z + s·ℓ₊(u)/ℓ₋(u)·u`, with `ℓ±(u)` the distances from `z` to the boundary along `±u`.
pub fn convex_inversion_point(body: &ConvexBody, z: &[f64], x: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
    let s = diff.iter().map(|c| c * c).sum::<f64>().sqrt();
    if s == 0.0 {
        return z.to_vec();
    }
    let u: Vec<f64> = diff.iter().map(|c| c / s).collect();
    let back: Vec<f64> = u.iter().map(|c| -c).collect();
    let (ahead, behind) = (body.ray_exit(z, &u), body.ray_exit(z, &back));
    let reach = s * ahead / behind;
    z.iter().zip(&u).map(|(a, b)| a + reach * b).collect()
}

pub fn build_plan_convex_body(body: &ConvexBody, z: &Point, mu: Arc<DiscreteMeasure>) -> Result<InversionPlan> {
    if mu.space() != SpaceTag::Euclid(body.dim()) {
        return Err(Error::SpaceMismatch { expected: SpaceTag::Euclid(body.dim()).name(), found: mu.space().name() });
    }
    mu.space().ensure_same(&z.space)?;
    if !(body.margin(&z.coords) > 0.0) {
        return Err(Error::OutOfRange(format!("center {:?} is not interior to the body", z.coords)));
    }
    if let Some(i) = (0..mu.len()).find(|&i| !body.contains(mu.coords(i), 1e-12)) {
        return Err(Error::OutOfRange(format!("particle {i} lies outside the body")));
    }
    let images: Vec<Point> = (0..mu.len())
        .into_par_iter()
        .map(|i| Point { space: z.space, coords: convex_inversion_point(body, &z.coords, mu.coords(i)) })
        .collect();
    InversionPlan::new(z.clone(), Coupling::from_map(mu, images)?, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExclusionConfig {
    /// Half-width of the excluded tube around the singular set.
    pub tube: f64,
    /// Largest admissible fraction of excluded mass.
    pub max_fraction: f64,
}

impl Default for ExclusionConfig {
    fn default() -> Self {
        ExclusionConfig { tube: 1e-3, max_fraction: 0.01 }
    }
}

/// Pairs `x` with `z·Λ((−z)·x)`; particles within the tube around the center line or the plane `t = 0`
/// (after translation) go to `z` and are counted as excluded.
pub fn build_plan_heisenberg(z: &HeisPoint, mu: Arc<DiscreteMeasure>, excl: &ExclusionConfig) -> Result<InversionPlan> {
    let tag = SpaceTag::Heisenberg(z.n());
    if mu.space() != tag {
        return Err(Error::SpaceMismatch { expected: tag.name(), found: mu.space().name() });
    }
    let zinv = group_inv(z);
    let images: Vec<Option<Point>> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let w = group_mul(&zinv, &HeisPoint::from_coords(mu.coords(i)));
            if w.zeta_norm() < excl.tube || w.t.abs() < excl.tube {
                return Ok(None);
            }
            Ok(Some(group_mul(z, &lambda_map(&w)?).to_point()))
        })
        .collect::<Result<_>>()?;
    finish_with_exclusions(z.to_point(), mu, images, excl)
}

/// Pairs `x` with its inversion through `z` on the great circle; the caps of radius `tube` around `z`
/// and `−z` go to `z` and are counted as excluded.
pub fn build_plan_sphere(z: &SpherePoint, mu: Arc<DiscreteMeasure>, excl: &ExclusionConfig) -> Result<InversionPlan> {
    if mu.space() != SpaceTag::Sphere2 {
        return Err(Error::SpaceMismatch { expected: "sphere2".into(), found: mu.space().name() });
    }
    let images: Vec<Option<Point>> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let x = SpherePoint::new(mu.coords(i).try_into().map_err(|_| Error::Invalid("sphere point needs 3 coordinates".into()))?)?;
            let d = sphere_distance(z, &x);
            if d < excl.tube || d > std::f64::consts::PI - excl.tube {
                return Ok(None);
            }
            Ok(Some(sphere_inversion_map(z, &x)?.to_point()))
        })
        .collect::<Result<_>>()?;
    finish_with_exclusions(z.to_point(), mu, images, excl)
}

fn finish_with_exclusions(
    center: Point,
    mu: Arc<DiscreteMeasure>,
    images: Vec<Option<Point>>,
    excl: &ExclusionConfig,
) -> Result<InversionPlan> {
    let excluded: f64 = images.iter().enumerate().filter(|(_, y)| y.is_none()).map(|(i, _)| mu.weight(i)).sum();
    let total = mu.total_mass();
    if total > 0.0 && excluded > excl.max_fraction * total {
        return Err(Error::ExcessiveExclusion { fraction: excluded / total, limit: excl.max_fraction });
    }
    let targets: Vec<Point> = images.into_iter().map(|y| y.unwrap_or_else(|| center.clone())).collect();
    InversionPlan::new(center, Coupling::from_map(mu, targets)?, excluded)
}

/// The only coupling supported in `H(apex)` on a cone with angle below `2π`: everything goes to the apex.
pub fn build_plan_cone_apex(mu: Arc<DiscreteMeasure>) -> Result<InversionPlan> {
    let SpaceTag::Cone { .. } = mu.space() else {
        return Err(Error::SpaceMismatch { expected: "cone".into(), found: mu.space().name() });
    };
    let apex = Point::new(mu.space(), vec![0.0, 0.0])?;
    let pairs = (0..mu.len()).map(|i| Pair { source: i, target: 0, weight: mu.weight(i) }).collect();
    InversionPlan::new(apex.clone(), Coupling::new(mu, vec![apex], pairs)?, 0.0)
}

/// Inputs a plan builder may need beyond the center and the measure.
#[derive(Clone, Debug, Default)]
pub struct BuildContext {
    pub body: Option<ConvexBody>,
    pub exclusion: ExclusionConfig,
}

pub trait PlanBuilder: Send + Sync {
    fn name(&self) -> &'static str;

    fn build(&self, z: &Point, mu: Arc<DiscreteMeasure>, ctx: &BuildContext) -> Result<InversionPlan>;
}

struct ConvexBuilder;
struct HeisenbergBuilder;
struct SphereBuilder;
struct ConeApexBuilder;

impl PlanBuilder for ConvexBuilder {
    fn name(&self) -> &'static str {
        "convex"
    }

    fn build(&self, z: &Point, mu: Arc<DiscreteMeasure>, ctx: &BuildContext) -> Result<InversionPlan> {
        let body = ctx.body.as_ref().ok_or_else(|| Error::Invalid("the convex builder needs a body".into()))?;
        build_plan_convex_body(body, z, mu)
    }
}

impl PlanBuilder for HeisenbergBuilder {
    fn name(&self) -> &'static str {
        "heisenberg"
    }

    fn build(&self, z: &Point, mu: Arc<DiscreteMeasure>, ctx: &BuildContext) -> Result<InversionPlan> {
        build_plan_heisenberg(&HeisPoint::from_point(z)?, mu, &ctx.exclusion)
    }
}

impl PlanBuilder for SphereBuilder {
    fn name(&self) -> &'static str {
        "sphere"
    }

    fn build(&self, z: &Point, mu: Arc<DiscreteMeasure>, ctx: &BuildContext) -> Result<InversionPlan> {
        let c: [f64; 3] = z.coords.as_slice().try_into().map_err(|_| Error::Invalid("sphere center needs 3 coordinates".into()))?;
        build_plan_sphere(&SpherePoint::new(c)?, mu, &ctx.exclusion)
    }
}

impl PlanBuilder for ConeApexBuilder {
    fn name(&self) -> &'static str {
        "cone-apex"
    }

    fn build(&self, z: &Point, mu: Arc<DiscreteMeasure>, _ctx: &BuildContext) -> Result<InversionPlan> {
        if z.coords[0] != 0.0 {
            return Err(Error::Invalid("the cone builder only handles the apex".into()));
        }
        build_plan_cone_apex(mu)
    }
}

pub struct BuilderRegistry {
    builders: BTreeMap<&'static str, Box<dyn PlanBuilder>>,
}

impl BuilderRegistry {
    pub fn builtin() -> Self {
        let mut r = BuilderRegistry { builders: BTreeMap::new() };
        r.register(Box::new(ConvexBuilder));
        r.register(Box::new(HeisenbergBuilder));
        r.register(Box::new(SphereBuilder));
        r.register(Box::new(ConeApexBuilder));
        r
    }

    pub fn register(&mut self, builder: Box<dyn PlanBuilder>) {
        self.builders.insert(builder.name(), builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn get(&self, name: &str) -> Result<&dyn PlanBuilder> {
        self.builders.get(name).map(|b| b.as_ref()).ok_or_else(|| Error::Invalid(format!("unknown plan builder `{name}`")))
    }
}
