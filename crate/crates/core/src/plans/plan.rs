use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{
    cell_masses, cloud_reference, concentrated_mass, union_grid, Coupling, CouplingRecord, DiscreteMeasure, MeasureRecord, Point,
    PointRecord, Side, DEFAULT_MAX_CELLS,
};
use crate::space::MetricSpace;

/// Coupling of `μ` with targets on geodesics through `center`.
#[derive(Clone, Debug)]
pub struct InversionPlan {
    pub center: Point,
    pub coupling: Coupling,
    /// Mass of the particles sent to the center because they lie in the excluded null set.
    pub excluded_mass: f64,
    pub diagnostics: Option<PlanDiagnostics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Tolerance on `|d(x,y) − d(x,z) − d(z,y)|`.
    pub hz_tol: f64,
    /// Tolerance on the finest singularity score.
    pub ac_tol: f64,
    /// Coarse cell side; the fine grid halves it.
    pub cell_size: f64,
    /// Density ratio above which coarse-cell mass counts as concentrated; scaled by the cell count at the fine level.
    pub density_cap: f64,
    pub marginal_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { hz_tol: 1e-7, ac_tol: 0.02, cell_size: 0.1, density_cap: 10.0, marginal_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub marginal_defect: f64,
    pub hz_defect: f64,
    /// Pair index of the largest collinearity defect.
    pub hz_worst_pair: Option<usize>,
    pub uniformity_constant: f64,
    /// Singular fractions of the second marginal at the coarse and the fine cell size.
    pub ac_scores: Vec<f64>,
    pub excluded_mass: f64,
    pub marginal_ok: bool,
    pub hz_ok: bool,
    pub ac_ok: bool,
    pub pass: bool,
}

impl InversionPlan {
    pub fn new(center: Point, coupling: Coupling, excluded_mass: f64) -> Result<Self> {
        coupling.source().space().ensure_same(&center.space)?;
        Ok(InversionPlan { center, coupling, excluded_mass, diagnostics: None })
    }

    pub fn source(&self) -> &Arc<DiscreteMeasure> {
        self.coupling.source()
    }

    pub fn second_marginal(&self) -> Result<DiscreteMeasure> {
        self.coupling.marginal(Side::Second)
    }
}

/// `(max |d(x,y) − d(x,z) − d(z,y)|, argmax)` over pairs of positive weight.
pub fn hz_defect(coupling: &Coupling, z: &[f64], space: &dyn MetricSpace) -> (f64, Option<usize>) {
    let src = coupling.source();
    let defects: Vec<f64> = coupling
        .pairs()
        .par_iter()
        .map(|p| {
            if p.weight <= 0.0 {
                return 0.0;
            }
            let (x, y) = (src.coords(p.source), &coupling.targets()[p.target].coords);
            (space.distance(x, y) - space.distance(x, z) - space.distance(z, y)).abs()
        })
        .collect();
    let mut best = (0.0, None);
    for (k, d) in defects.into_iter().enumerate() {
        if d > best.0 || (best.1.is_none() && d >= best.0) {
            best = (d, Some(k));
        }
    }
    best
}

/// `max_cells (P₂)♯π(cell) / μ(cell)` over cells carrying second-marginal mass; `∞` when `μ(cell) = 0`.
pub fn uniformity_constant(plan: &InversionPlan, mu: &DiscreteMeasure, cell_size: f64) -> Result<f64> {
    let second = plan.second_marginal()?;
    density_ratio_bound(&second, mu, cell_size)
}

pub(crate) fn density_ratio_bound(m: &DiscreteMeasure, mu: &DiscreteMeasure, cell_size: f64) -> Result<f64> {
    m.space().ensure_same(&mu.space())?;
    let space = crate::space::space_for(&m.space())?;
    let spec = union_grid(m, mu, space.as_ref(), cell_size, DEFAULT_MAX_CELLS)?;
    let top = cell_masses(m, space.as_ref(), &spec);
    let bottom = cloud_reference(mu, space.as_ref(), &spec);
    let mut keys: Vec<_> = top.iter().filter(|(_, &v)| v > 0.0).collect();
    keys.sort_by(|a, b| a.0.cmp(b.0));
    let mut worst = 0.0f64;
    for (k, &v) in keys {
        match bottom.cell_mass(k) {
            b if b > 0.0 => worst = worst.max(v / b),
            _ => return Ok(f64::INFINITY),
        }
    }
    Ok(worst)
}

/// Checks the three defining conditions of an inversion plan against `μ`.
pub fn verify_plan(
    plan: &InversionPlan,
    mu: &DiscreteMeasure,
    space: &dyn MetricSpace,
    config: &VerifyConfig,
) -> Result<PlanDiagnostics> {
    space.tag().ensure_same(&mu.space())?;
    let first = plan.coupling.first_marginal_weights();
    if first.len() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), found: first.len() });
    }
    let src = plan.source();
    for i in 0..mu.len() {
        if src.coords(i) != mu.coords(i) {
            return Err(Error::Invalid(format!("plan source particle {i} is not the particle of μ")));
        }
    }
    let marginal_defect = first.iter().zip(mu.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (hz, worst) = hz_defect(&plan.coupling, &plan.center.coords, space);
    let second = plan.second_marginal()?;
    // The fine cap grows with the cell count so both levels flag the same mass per coarse cell:
    // atoms stay flagged while mass with a large but integrable density drains away.
    let mass = second.total_mass();
    let dim = mu.particles().first().map_or(0, |p| space.cell_coords(&p.point.coords).len()) as i32;
    let ac_scores = vec![
        concentrated_mass(&second, mu, config.cell_size, config.density_cap)? / mass,
        concentrated_mass(&second, mu, config.cell_size / 2.0, config.density_cap * 2f64.powi(dim))? / mass,
    ];
    let uniformity = density_ratio_bound(&second, mu, config.cell_size)?;
    let marginal_ok = marginal_defect <= config.marginal_tol;
    let hz_ok = hz <= config.hz_tol;
    let ac_ok = ac_scores[1] <= config.ac_tol && ac_scores[1] <= ac_scores[0] + config.ac_tol / 2.0;
    Ok(PlanDiagnostics {
        marginal_defect,
        hz_defect: hz,
        hz_worst_pair: worst,
        uniformity_constant: uniformity,
        ac_scores,
        excluded_mass: plan.excluded_mass,
        marginal_ok,
        hz_ok,
        ac_ok,
        pass: marginal_ok && hz_ok && ac_ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleReport {
    /// `μ`-mass where the density vanishes.
    pub zero_set_mass: f64,
}

/// Multiplies every pair weight by `f(x)` of its source particle; the new source is `f·μ`.
pub fn rescale_plan(plan: &InversionPlan, f: impl Fn(&Point) -> f64) -> Result<(InversionPlan, RescaleReport)> {
    let src = plan.source();
    let mut factors = Vec::with_capacity(src.len());
    let mut zero_set_mass = 0.0;
    for (i, p) in src.particles().iter().enumerate() {
        let v = f(&p.point);
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::OutOfRange(format!("density {v} at particle {i} is not a nonnegative number")));
        }
        if v == 0.0 {
            zero_set_mass += p.weight;
        }
        factors.push(v);
    }
    let rescaled = Arc::new(DiscreteMeasure::new(
        src.space(),
        src.particles()
            .iter()
            .zip(&factors)
            .map(|(p, &v)| crate::measure::Particle { point: p.point.clone(), weight: v * p.weight })
            .collect(),
        None,
    )?);
    let coupling = plan.coupling.reweighted(rescaled, |p| factors[p.source] * p.weight)?;
    let excluded_mass = plan.excluded_mass;
    Ok((InversionPlan { center: plan.center.clone(), coupling, excluded_mass, diagnostics: None }, RescaleReport { zero_set_mass }))
}

/// On-disk form: `{"center": point, "source": measure, "pairs": [...], "targets": [...], "diagnostics": {...}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRecord {
    pub center: PointRecord,
    pub source: MeasureRecord,
    pub pairs: Vec<(usize, usize, f64)>,
    pub targets: Vec<Vec<f64>>,
    #[serde(default)]
    pub excluded_mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<PlanDiagnostics>,
}

impl From<&InversionPlan> for PlanRecord {
    fn from(p: &InversionPlan) -> Self {
        let c = CouplingRecord::from(&p.coupling);
        PlanRecord {
            center: PointRecord::from(&p.center),
            source: MeasureRecord::from(p.source().as_ref()),
            pairs: c.pairs,
            targets: c.targets,
            excluded_mass: p.excluded_mass,
            diagnostics: p.diagnostics.clone(),
        }
    }
}

impl TryFrom<PlanRecord> for InversionPlan {
    type Error = Error;

    fn try_from(r: PlanRecord) -> Result<Self> {
        let source = Arc::new(DiscreteMeasure::try_from(r.source)?);
        let center = Point::try_from(r.center)?;
        let coupling = CouplingRecord { pairs: r.pairs, targets: r.targets }.into_coupling(source)?;
        let mut plan = InversionPlan::new(center, coupling, r.excluded_mass)?;
        plan.diagnostics = r.diagnostics;
        Ok(plan)
    }
}
