use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MCPProfile;
use crate::error::{Error, Result};
use crate::measure::{Descriptor, DiscreteMeasure, NeighborhoodIndex, SpaceTag};
use crate::space::MetricSpace;

/// Spatial resolution of a ratio estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Radius of the test balls.
    pub eps: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Resolution {
    pub fn doubled(self) -> Self {
        Resolution { eps: self.eps / 2.0, fd_step: self.fd_step / 2.0 }
    }
}

/// Estimator of contraction ratios, prepared once per cloud and resolution.
pub trait ContractionEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn prepare<'a>(
        &self,
        measure: &'a DiscreteMeasure,
        space: &'a dyn MetricSpace,
        res: Resolution,
    ) -> Result<Box<dyn RatioProbe + 'a>>;
}

pub trait RatioProbe: Sync {
    /// `m(A_{t,o}) / m(A)` for `A` the test ball around `x`.
    fn forward(&self, x: &[f64], o: &[f64], t: f64) -> Result<Option<f64>>;

    /// `m(A) / m(e₀(e_t⁻¹(A)))` for `A` the test ball around the time-`t` point between `x` and `o`.
    fn strong(&self, x: &[f64], o: &[f64], t: f64) -> Result<Option<f64>>;
}

/// Jacobian determinant of the contraction map by central differences.
///
/// Needs coordinates in which the reference measure is Lebesgue (ℝᵈ, ℍⁿ with Haar).
pub struct JacobianEstimator;

struct JacobianProbe<'a> {
    space: &'a dyn MetricSpace,
    step: f64,
}

impl ContractionEstimator for JacobianEstimator {
    fn name(&self) -> &'static str {
        "jacobian"
    }

    fn prepare<'a>(
        &self,
        _measure: &'a DiscreteMeasure,
        space: &'a dyn MetricSpace,
        res: Resolution,
    ) -> Result<Box<dyn RatioProbe + 'a>> {
        if !matches!(space.tag(), SpaceTag::Euclid(_) | SpaceTag::Heisenberg(_)) {
            return Err(Error::Unsupported { op: "jacobian estimator", space: space.tag().name() });
        }
        Ok(Box::new(JacobianProbe { space, step: res.fd_step }))
    }
}

impl JacobianProbe<'_> {
    fn det(&self, x: &[f64], o: &[f64], t: f64) -> Result<Option<f64>> {
        if let SpaceTag::Euclid(d) = self.space.tag() {
            return Ok(Some((1.0 - t).powi(d as i32)));
        }
        if self.space.is_exceptional(o, x) {
            return Ok(None);
        }
        let dim = x.len();
        let h = self.step * x.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        let mut y = x.to_vec();
        for j in 0..dim {
            y[j] = x[j] + h;
            let plus = self.space.contract_toward(&y, o, t)?;
            y[j] = x[j] - h;
            let minus = self.space.contract_toward(&y, o, t)?;
            y[j] = x[j];
            for i in 0..dim {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        let det = jac.determinant().abs();
        Ok(det.is_finite().then_some(det))
    }
}

impl RatioProbe for JacobianProbe<'_> {
    fn forward(&self, x: &[f64], o: &[f64], t: f64) -> Result<Option<f64>> {
        self.det(x, o, t)
    }

    fn strong(&self, x: &[f64], o: &[f64], t: f64) -> Result<Option<f64>> {
        self.det(x, o, t)
    }
}

/// Particle counting: mass of the particles whose contraction preimage lies in the test ball.
pub struct NeighborhoodEstimator;

struct NeighborhoodProbe<'a> {
    index: NeighborhoodIndex<'a>,
}

impl ContractionEstimator for NeighborhoodEstimator {
    fn name(&self) -> &'static str {
        "neighborhood"
    }

    fn prepare<'a>(
        &self,
        measure: &'a DiscreteMeasure,
        space: &'a dyn MetricSpace,
        res: Resolution,
    ) -> Result<Box<dyn RatioProbe + 'a>> {
        Ok(Box::new(NeighborhoodProbe { index: NeighborhoodIndex::new(measure, space, res.eps)? }))
    }
}

impl NeighborhoodProbe<'_> {
    fn mass(&self, members: &[usize]) -> f64 {
        members.iter().map(|&i| self.index.measure().weight(i)).sum()
    }
}

impl RatioProbe for NeighborhoodProbe<'_> {
    fn forward(&self, x: &[f64], o: &[f64], t: f64) -> Result<Option<f64>> {
        let (space, m, eps) = (self.index.space(), self.index.measure(), self.index.eps());
        let members = self.index.within(x, eps);
        let m_a = self.mass(&members);
        if m_a <= 0.0 {
            return Ok(None);
        }
        let c = space.contract_toward(x, o, t)?;
        let mut reach = (1.0 - t) * eps;
        for &i in &members {
            reach = reach.max(space.distance(&space.contract_toward(m.coords(i), o, t)?, &c));
        }
        let mut m_t = 0.0;
        for i in self.index.within(&c, 1.5 * reach + 1e-12) {
            if let Some(p) = space.contraction_preimage(m.coords(i), o, t)? {
                if space.distance(&p, x) <= eps {
                    m_t += m.weight(i);
                }
            }
        }
        Ok(Some(m_t / m_a))
    }

    fn strong(&self, x: &[f64], o: &[f64], t: f64) -> Result<Option<f64>> {
        let (space, m, eps) = (self.index.space(), self.index.measure(), self.index.eps());
        let y = space.contract_toward(x, o, t)?;
        let members = self.index.within(&y, eps);
        let m_a = self.mass(&members);
        let mut reach = eps / (1.0 - t);
        for &i in &members {
            if let Some(p) = space.contraction_preimage(m.coords(i), o, t)? {
                reach = reach.max(space.distance(&p, x));
            }
        }
        let mut m_pre = 0.0;
        for i in self.index.within(x, 1.5 * reach + 1e-12) {
            if space.distance(&space.contract_toward(m.coords(i), o, t)?, &y) <= eps {
                m_pre += m.weight(i);
            }
        }
        Ok((m_pre > 0.0).then(|| m_a / m_pre))
    }
}

/// Name-keyed contraction estimators.
pub struct EstimatorRegistry {
    estimators: BTreeMap<&'static str, Box<dyn ContractionEstimator>>,
}

impl EstimatorRegistry {
    pub fn builtin() -> Self {
        let mut r = EstimatorRegistry { estimators: BTreeMap::new() };
        r.register(Box::new(JacobianEstimator));
        r.register(Box::new(NeighborhoodEstimator));
        r
    }

    pub fn register(&mut self, estimator: Box<dyn ContractionEstimator>) {
        self.estimators.insert(estimator.name(), estimator);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.estimators.keys().copied()
    }

    /// Looks up `name`; `"auto"` picks the Jacobian for analytic Lebesgue/Haar clouds and counting otherwise.
    pub fn resolve(&self, name: &str, measure: &DiscreteMeasure) -> Result<&dyn ContractionEstimator> {
        let name = if name == "auto" {
            let analytic = matches!(measure.descriptor(), Some(Descriptor::UniformOnBody { .. } | Descriptor::HaarBox { .. }));
            let flat = matches!(measure.space(), SpaceTag::Euclid(_) | SpaceTag::Heisenberg(_));
            if analytic && flat { "jacobian" } else { "neighborhood" }
        } else {
            name
        };
        self.estimators
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| Error::Invalid(format!("unknown estimator `{name}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McpConfig {
    pub trials: usize,
    pub eps: f64,
    pub fd_step: f64,
    pub slack: f64,
    pub t_grid: Vec<f64>,
    pub seed: u64,
    pub estimator: String,
}

impl Default for McpConfig {
    fn default() -> Self {
        McpConfig {
            trials: 10_000,
            eps: 0.05,
            fd_step: 1e-5,
            slack: 0.05,
            t_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            seed: 0,
            estimator: "auto".into(),
        }
    }
}

impl McpConfig {
    fn resolution(&self) -> Resolution {
        Resolution { eps: self.eps, fd_step: self.fd_step }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::OutOfRange("at least one trial is needed".into()));
        }
        if !(self.eps > 0.0 && self.fd_step > 0.0) {
            return Err(Error::OutOfRange("eps and fd_step must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.slack) {
            return Err(Error::OutOfRange(format!("slack {} not in [0, 1)", self.slack)));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::OutOfRange("t grid must be nonempty inside (0, 1)".into()));
        }
        Ok(())
    }
}

/// The single check that produced the worst ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McpWitness {
    pub trial: usize,
    pub x_index: usize,
    pub o_index: usize,
    pub x: Vec<f64>,
    pub o: Vec<f64>,
    pub t: f64,
    pub eps: f64,
    pub ratio: f64,
    pub bound: f64,
    /// `ratio / bound`.
    pub normalized: f64,
    /// Ratio recomputed at doubled resolution.
    pub confirmed_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McpRow {
    pub t: f64,
    pub worst_ratio: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McpReport {
    pub pass: bool,
    pub strong: bool,
    pub estimator: String,
    pub profile: MCPProfile,
    pub trials: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub slack: f64,
    /// Failures reproduced at doubled resolution.
    pub confirmed_failures: usize,
    /// Failures that vanished at doubled resolution.
    pub unconfirmed_failures: usize,
    pub worst: Option<McpWitness>,
    pub per_t: Vec<McpRow>,
}

/// Qualitative MCP check: `m(A_{t,o}) ≥ f(t)·m(A)·(1 − slack)` on random balls `A`.
pub fn mcp_verify(
    measure: &DiscreteMeasure,
    space: &dyn MetricSpace,
    profile: &MCPProfile,
    config: &McpConfig,
) -> Result<McpReport> {
    run(measure, space, profile, config, &EstimatorRegistry::builtin(), false)
}

/// Strong MCP check: `m(A) ≥ f(t)·m(e₀(e_t⁻¹(A)))·(1 − slack)`.
pub fn strong_mcp_verify(
    measure: &DiscreteMeasure,
    space: &dyn MetricSpace,
    profile: &MCPProfile,
    config: &McpConfig,
) -> Result<McpReport> {
    if let Some(p) = measure.particles().first() {
        let c = &p.point.coords;
        space.contraction_preimage(c, c, 0.5)?;
    }
    run(measure, space, profile, config, &EstimatorRegistry::builtin(), true)
}

pub fn mcp_verify_with(
    measure: &DiscreteMeasure,
    space: &dyn MetricSpace,
    profile: &MCPProfile,
    config: &McpConfig,
    registry: &EstimatorRegistry,
    strong: bool,
) -> Result<McpReport> {
    run(measure, space, profile, config, registry, strong)
}

/// Generator for trial `index`: stream `index` of the ChaCha8 generator seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn probe_ratio(probe: &dyn RatioProbe, strong: bool, x: &[f64], o: &[f64], t: f64) -> Result<Option<f64>> {
    if strong { probe.strong(x, o, t) } else { probe.forward(x, o, t) }
}

fn run(
    measure: &DiscreteMeasure,
    space: &dyn MetricSpace,
    profile: &MCPProfile,
    config: &McpConfig,
    registry: &EstimatorRegistry,
    strong: bool,
) -> Result<McpReport> {
    profile.validate()?;
    config.validate()?;
    space.tag().ensure_same(&measure.space())?;
    let support: Vec<usize> = (0..measure.len()).filter(|&i| measure.weight(i) > 0.0).collect();
    if support.len() < 2 {
        return Err(Error::Invalid("MCP checks need at least two weighted particles".into()));
    }
    let estimator = registry.resolve(&config.estimator, measure)?;
    let res = config.resolution();
    let probe = estimator.prepare(measure, space, res)?;
    let fine = estimator.prepare(measure, space, res.doubled())?;

    let picks: Vec<(usize, usize)> = (0..config.trials)
        .map(|i| {
            let mut rng = trial_rng(config.seed, i as u64);
            let x = support[rng.random_range(0..support.len())];
            let mut o = support[rng.random_range(0..support.len())];
            while o == x {
                o = support[rng.random_range(0..support.len())];
            }
            (x, o)
        })
        .collect();

    let ratios: Vec<Vec<Option<f64>>> = picks
        .par_iter()
        .map(|&(x, o)| {
            config
                .t_grid
                .iter()
                .map(|&t| probe_ratio(probe.as_ref(), strong, measure.coords(x), measure.coords(o), t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let floor = 1.0 - config.slack;
    let candidates: Vec<(usize, usize)> = ratios
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter().enumerate().filter_map(move |(k, r)| {
                let bound = profile.eval(config.t_grid[k]);
                r.filter(|&r| r < bound * floor).map(|_| (i, k))
            })
        })
        .collect();
    let confirmations: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|&(i, k)| {
            let (x, o) = picks[i];
            probe_ratio(fine.as_ref(), strong, measure.coords(x), measure.coords(o), config.t_grid[k])
        })
        .collect::<Result<_>>()?;

    let mut confirmed = BTreeMap::new();
    let mut unconfirmed = 0;
    for (&(i, k), c) in candidates.iter().zip(&confirmations) {
        let bound = profile.eval(config.t_grid[k]);
        match c {
            Some(c) if *c < bound * floor => {
                confirmed.insert((i, k), *c);
            }
            _ => unconfirmed += 1,
        }
    }

    let mut worst: Option<(f64, usize, usize)> = None;
    let mut per_t: Vec<McpRow> =
        config.t_grid.iter().map(|&t| McpRow { t, worst_ratio: f64::INFINITY, bound: profile.eval(t) }).collect();
    let (mut evaluated, mut skipped) = (0, 0);
    for (i, row) in ratios.iter().enumerate() {
        for (k, r) in row.iter().enumerate() {
            let Some(r) = *r else {
                skipped += 1;
                continue;
            };
            evaluated += 1;
            per_t[k].worst_ratio = per_t[k].worst_ratio.min(r);
            let eligible = confirmed.is_empty() || confirmed.contains_key(&(i, k));
            let normalized = r / per_t[k].bound;
            if eligible && worst.is_none_or(|(w, _, _)| normalized < w) {
                worst = Some((normalized, i, k));
            }
        }
    }
    let worst = worst.map(|(normalized, i, k)| {
        let (x, o) = picks[i];
        McpWitness {
            trial: i,
            x_index: x,
            o_index: o,
            x: measure.coords(x).to_vec(),
            o: measure.coords(o).to_vec(),
            t: config.t_grid[k],
            eps: config.eps,
            ratio: ratios[i][k].unwrap_or(f64::NAN),
            bound: per_t[k].bound,
            normalized,
            confirmed_ratio: confirmed.get(&(i, k)).copied(),
        }
    });
    Ok(McpReport {
        pass: confirmed.is_empty(),
        strong,
        estimator: estimator.name().into(),
        profile: profile.clone(),
        trials: config.trials,
        evaluated,
        skipped,
        slack: config.slack,
        confirmed_failures: confirmed.len(),
        unconfirmed_failures: unconfirmed,
        worst,
        per_t,
    })
}

/// Ratios `m(A_{t,o})/m(A)` along a time grid for one fixed `(A, o)`.
pub fn contraction_profile(
    measure: &DiscreteMeasure,
    space: &dyn MetricSpace,
    x: &[f64],
    o: &[f64],
    t_grid: &[f64],
    estimator: &str,
    res: Resolution,
) -> Result<Vec<Option<f64>>> {
    let registry = EstimatorRegistry::builtin();
    let probe = registry.resolve(estimator, measure)?.prepare(measure, space, res)?;
    t_grid.iter().map(|&t| probe.forward(x, o, t)).collect()
}
