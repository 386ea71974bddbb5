use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{density_ratio_bound, hz_defect};
use super::InversionPlan;
use crate::error::{Error, Result};
use crate::measure::{pushforward, Coupling, DiscreteMeasure, Point, SpaceTag};
use crate::space::MetricSpace;
use crate::transport::solve_transport;

/// A map between sample sets.
pub trait PointMap: Send + Sync {
    fn describe(&self) -> String;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

struct Identity;
struct Snap(f64);
struct Scale(f64);
struct Rotate(f64);

/// Explicit association of source points to target points.
pub struct TableMap {
    entries: HashMap<Vec<u64>, Vec<f64>>,
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|c| c.to_bits()).collect()
}

impl TableMap {
    pub fn new(pairs: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        TableMap { entries: pairs.into_iter().map(|(a, b)| (bits(&a), b)).collect() }
    }
}

impl PointMap for Identity {
    fn describe(&self) -> String {
        "identity".into()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }
}

impl PointMap for Snap {
    fn describe(&self) -> String {
        format!("snap:{}", self.0)
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().map(|c| (c / self.0).round() * self.0).collect())
    }
}

impl PointMap for Scale {
    fn describe(&self) -> String {
        format!("scale:{}", self.0)
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().map(|c| c * self.0).collect())
    }
}

impl PointMap for Rotate {
    fn describe(&self) -> String {
        format!("rotate:{}", self.0)
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() < 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: x.len() });
        }
        let (s, c) = self.0.sin_cos();
        let mut y = x.to_vec();
        y[0] = c * x[0] - s * x[1];
        y[1] = s * x[0] + c * x[1];
        Ok(y)
    }
}

impl PointMap for TableMap {
    fn describe(&self) -> String {
        format!("table[{}]", self.entries.len())
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.entries.get(&bits(x)).cloned().ok_or_else(|| Error::Invalid(format!("point {x:?} is not in the map table")))
    }
}

type MapFactory = fn(f64) -> Result<Box<dyn PointMap>>;

/// Parametric maps keyed by name, written `name` or `name:param`.
pub struct MapRegistry {
    factories: BTreeMap<&'static str, (bool, MapFactory)>,
}

impl MapRegistry {
    pub fn builtin() -> Self {
        let mut r = MapRegistry { factories: BTreeMap::new() };
        r.register("identity", false, |_| Ok(Box::new(Identity)));
        r.register("snap", true, |h| {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::OutOfRange(format!("grid step {h} must be positive")));
            }
            Ok(Box::new(Snap(h)))
        });
        r.register("scale", true, |c| {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::OutOfRange(format!("scale factor {c} must be positive")));
            }
            Ok(Box::new(Scale(c)))
        });
        r.register("rotate", true, |a| Ok(Box::new(Rotate(a))));
        r
    }

    pub fn register(&mut self, name: &'static str, takes_param: bool, factory: MapFactory) {
        self.factories.insert(name, (takes_param, factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn parse(&self, spec: &str) -> Result<Box<dyn PointMap>> {
        let (name, param) = match spec.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (spec, None),
        };
        let (takes, factory) = self.factories.get(name).ok_or_else(|| Error::Invalid(format!("unknown map `{name}`")))?;
        match (takes, param) {
            (true, Some(p)) => factory(p.trim().parse().map_err(|_| Error::Invalid(format!("bad map parameter `{p}`")))?),
            (false, None) => factory(0.0),
            (true, None) => Err(Error::Invalid(format!("map `{name}` needs a parameter"))),
            (false, Some(_)) => Err(Error::Invalid(format!("map `{name}` takes no parameter"))),
        }
    }
}

/// Candidate ε-isometry between two pointed sample spaces.
#[derive(Clone)]
pub struct EpsIsometry {
    pub map: Arc<dyn PointMap>,
    pub eps: f64,
    pub radius: f64,
    pub base_src: Vec<f64>,
    pub base_tgt: Vec<f64>,
}

impl std::fmt::Debug for EpsIsometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EpsIsometry")
            .field("map", &self.map.describe())
            .field("eps", &self.eps)
            .field("radius", &self.radius)
            .field("base_src", &self.base_src)
            .field("base_tgt", &self.base_tgt)
            .finish()
    }
}

/// File form: `{"map": "snap:0.01", "eps": ..., "radius": ..., "base": [...]}`; `"map": "table"` reads `table`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsIsometrySpec {
    pub map: String,
    pub eps: f64,
    pub radius: f64,
    pub base: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl EpsIsometry {
    /// Target base point defaults to the image of the source base point.
    pub fn new(map: Arc<dyn PointMap>, eps: f64, radius: f64, base_src: Vec<f64>) -> Result<Self> {
        if !(eps >= 0.0 && radius > 0.0) {
            return Err(Error::OutOfRange(format!("eps {eps} and radius {radius} must be nonnegative and positive")));
        }
        let base_tgt = map.apply(&base_src)?;
        Ok(EpsIsometry { map, eps, radius, base_src, base_tgt })
    }

    pub fn from_spec(spec: EpsIsometrySpec, registry: &MapRegistry) -> Result<Self> {
        let map: Arc<dyn PointMap> = if spec.map == "table" {
            Arc::new(TableMap::new(spec.table.ok_or_else(|| Error::Invalid("table map without a table".into()))?))
        } else {
            Arc::from(registry.parse(&spec.map)?)
        };
        let mut f = EpsIsometry::new(map, spec.eps, spec.radius, spec.base)?;
        if let Some(b) = spec.base_target {
            f.base_tgt = b;
        }
        Ok(f)
    }

    pub fn apply_point(&self, p: &Point, target: SpaceTag) -> Result<Point> {
        Point::new(target, self.map.apply(&p.coords)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub map: String,
    pub eps: f64,
    /// `max |d(x,y) − d(f(x),f(y))|` over sampled source pairs in the `R`-ball.
    pub distortion: f64,
    /// Largest distance from a target sample in `B_{R−ε}` to the image set.
    pub surjectivity_defect: f64,
    pub base_defect: f64,
    /// W₁ between the normalized pushed and target samples on their `R`-balls, after quantization.
    pub bl_proxy: Option<f64>,
    /// Quantization step used for the proxy.
    pub quantization: Option<f64>,
    pub points_checked: usize,
    pub pass: bool,
}

/// Atoms per side above which the measure proxy quantizes.
const PROXY_ATOMS: usize = 400;

fn quantize(points: &[(Vec<f64>, f64)], step: f64) -> Vec<(Vec<f64>, f64)> {
    if step == 0.0 {
        return points.to_vec();
    }
    let mut cells: BTreeMap<Vec<i64>, (Vec<f64>, f64)> = BTreeMap::new();
    for (x, w) in points {
        let key: Vec<i64> = x.iter().map(|c| (c / step).floor() as i64).collect();
        let entry = cells.entry(key.clone()).or_insert_with(|| (key.iter().map(|k| (*k as f64 + 0.5) * step).collect(), 0.0));
        entry.1 += w;
    }
    cells.into_values().collect()
}

fn w1_proxy(a: &[(Vec<f64>, f64)], b: &[(Vec<f64>, f64)], space: &dyn MetricSpace, euclidean: bool) -> Result<(Option<f64>, Option<f64>)> {
    let (ma, mb): (f64, f64) = (a.iter().map(|p| p.1).sum(), b.iter().map(|p| p.1).sum());
    if ma <= 0.0 || mb <= 0.0 {
        return Ok((None, None));
    }
    let mut step = 0.0;
    let (mut qa, mut qb) = (a.to_vec(), b.to_vec());
    if qa.len().max(qb.len()) > PROXY_ATOMS {
        if !euclidean {
            return Ok((None, None));
        }
        let span = a.iter().chain(b).flat_map(|p| p.0.iter()).fold(0.0f64, |m, c| m.max(c.abs()));
        step = (2.0 * span / 64.0).max(f64::MIN_POSITIVE);
        loop {
            qa = quantize(a, step);
            qb = quantize(b, step);
            if qa.len().max(qb.len()) <= PROXY_ATOMS {
                break;
            }
            step *= 1.5;
        }
    }
    let supply: Vec<f64> = qa.iter().map(|p| p.1 / ma).collect();
    let demand: Vec<f64> = qb.iter().map(|p| p.1 / mb).collect();
    let sol = solve_transport(&supply, &demand, &|i, j| space.distance(&qa[i].0, &qb[j].0))?;
    Ok((Some(sol.cost.max(0.0)), (step > 0.0).then_some(step)))
}

/// Checks the ε-isometry conditions on sample sets; pairs are taken among the first `max_points` ball members.
pub fn check_eps_isometry(
    f: &EpsIsometry,
    src: &DiscreteMeasure,
    tgt: &DiscreteMeasure,
    src_space: &dyn MetricSpace,
    tgt_space: &dyn MetricSpace,
    max_points: usize,
) -> Result<IsometryReport> {
    src_space.tag().ensure_same(&src.space())?;
    tgt_space.tag().ensure_same(&tgt.space())?;
    let ball: Vec<usize> = (0..src.len()).filter(|&i| src_space.distance(src.coords(i), &f.base_src) <= f.radius).collect();
    let images: Vec<Vec<f64>> = ball.iter().map(|&i| f.map.apply(src.coords(i))).collect::<Result<_>>()?;
    let m = ball.len().min(max_points);
    let distortion = (0..m)
        .into_par_iter()
        .map(|a| {
            (a + 1..m)
                .map(|b| {
                    let d0 = src_space.distance(src.coords(ball[a]), src.coords(ball[b]));
                    (d0 - tgt_space.distance(&images[a], &images[b])).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let inner = (f.radius - f.eps).max(0.0);
    let tgt_ball: Vec<usize> = (0..tgt.len()).filter(|&j| tgt_space.distance(tgt.coords(j), &f.base_tgt) <= inner).take(max_points).collect();
    let surjectivity_defect = tgt_ball
        .par_iter()
        .map(|&j| images.iter().map(|y| tgt_space.distance(tgt.coords(j), y)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max);
    let base_defect = tgt_space.distance(&f.map.apply(&f.base_src)?, &f.base_tgt);
    let pushed: Vec<(Vec<f64>, f64)> = images.iter().zip(&ball).map(|(y, &i)| (y.clone(), src.weight(i))).collect();
    let target: Vec<(Vec<f64>, f64)> = (0..tgt.len())
        .filter(|&j| tgt_space.distance(tgt.coords(j), &f.base_tgt) <= f.radius)
        .map(|j| (tgt.coords(j).to_vec(), tgt.weight(j)))
        .collect();
    let euclidean = matches!(tgt_space.tag(), SpaceTag::Euclid(_));
    let (bl_proxy, quantization) = w1_proxy(&pushed, &target, tgt_space, euclidean)?;
    Ok(IsometryReport {
        map: f.map.describe(),
        eps: f.eps,
        distortion,
        surjectivity_defect,
        base_defect,
        bl_proxy,
        quantization,
        points_checked: m,
        pass: distortion <= f.eps && surjectivity_defect <= f.eps && base_defect <= f.eps,
    })
}

#[derive(Clone, Debug)]
pub struct PushReport {
    pub pushed: InversionPlan,
    pub hz_defect: f64,
    pub original_hz_defect: f64,
    /// `hz_defect(plan) + 4·eps`.
    pub hz_bound: f64,
    pub bound_holds: bool,
    pub uniformity_constant: f64,
    pub original_uniformity_constant: f64,
}

/// Pushes both coordinates of a plan through `f`; the center becomes `f(z)`.
pub fn push_plan(
    plan: &InversionPlan,
    f: &EpsIsometry,
    src_space: &dyn MetricSpace,
    tgt_space: &dyn MetricSpace,
    cell_size: f64,
) -> Result<PushReport> {
    let tag = tgt_space.tag();
    let src = plan.source();
    let mut failure = None;
    let pushed_src = pushforward(src, |p| match f.apply_point(p, tag) {
        Ok(q) => q,
        Err(e) => {
            failure.get_or_insert(e);
            p.clone()
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let pushed_src = Arc::new(pushed_src?);
    let targets: Vec<Point> = plan.coupling.targets().iter().map(|t| f.apply_point(t, tag)).collect::<Result<_>>()?;
    let center = f.apply_point(&plan.center, tag)?;
    let coupling = Coupling::new(pushed_src.clone(), targets, plan.coupling.pairs().to_vec())?;
    let pushed = InversionPlan::new(center, coupling, plan.excluded_mass)?;
    let (original_hz_defect, _) = hz_defect(&plan.coupling, &plan.center.coords, src_space);
    let (hz, _) = hz_defect(&pushed.coupling, &pushed.center.coords, tgt_space);
    let hz_bound = original_hz_defect + 4.0 * f.eps;
    let original_uniformity_constant = density_ratio_bound(&plan.second_marginal()?, src, cell_size)?;
    let uniformity_constant = density_ratio_bound(&pushed.second_marginal()?, &pushed_src, cell_size)?;
    Ok(PushReport {
        pushed,
        hz_defect: hz,
        original_hz_defect,
        hz_bound,
        bound_holds: hz <= hz_bound,
        uniformity_constant,
        original_uniformity_constant,
    })
}
