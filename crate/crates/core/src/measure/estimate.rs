use std::collections::HashMap;

use rayon::prelude::*;

use super::{CellKey, Descriptor, DiscreteMeasure, GridIndex, GridSpec, Point};
use crate::error::{Error, Result};
use crate::space::{space_for, MetricSpace};

/// Default cap on the number of grid cells a bounding box may be cut into.
pub const DEFAULT_MAX_CELLS: f64 = 1e10;

/// Reusable ε-neighborhood estimator over a fixed particle cloud.
pub struct NeighborhoodIndex<'a> {
    space: &'a dyn MetricSpace,
    measure: &'a DiscreteMeasure,
    grid: GridIndex,
    eps: f64,
}

impl<'a> NeighborhoodIndex<'a> {
    pub fn new(measure: &'a DiscreteMeasure, space: &'a dyn MetricSpace, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::OutOfRange(format!("eps {eps} must be positive")));
        }
        space.tag().ensure_same(&measure.space())?;
        let coords: Vec<Vec<f64>> = measure.particles().iter().map(|p| space.index_coords(&p.point.coords)).collect();
        let dim = coords.first().map_or(space.tag().ambient_dim(), Vec::len);
        let grid = GridIndex::build(GridSpec::new(vec![0.0; dim], eps)?, &coords);
        Ok(NeighborhoodIndex { space, measure, grid, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Mass of the particles within `eps` of at least one probe.
    pub fn mass_near(&self, probes: &[Vec<f64>]) -> f64 {
        let mut hit = vec![false; self.measure.len()];
        for probe in probes {
            self.mark(probe, &mut hit);
        }
        hit.iter().zip(self.measure.particles()).filter(|(h, _)| **h).map(|(_, p)| p.weight).sum()
    }

    /// Indices of the particles within `eps` of `probe`.
    pub fn neighbors(&self, probe: &[f64]) -> Vec<usize> {
        self.within(probe, self.eps)
    }

    /// Indices of the particles within `radius` of `probe` (any radius).
    pub fn within(&self, probe: &[f64], radius: f64) -> Vec<usize> {
        let (lo, hi) = self.space.index_box(probe, radius);
        let mut out = Vec::new();
        self.grid.for_each_in_box(&lo, &hi, |i| {
            if self.space.distance(probe, self.measure.coords(i)) <= radius {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    pub fn measure(&self) -> &'a DiscreteMeasure {
        self.measure
    }

    pub fn space(&self) -> &'a dyn MetricSpace {
        self.space
    }

    fn mark(&self, probe: &[f64], hit: &mut [bool]) {
        let (lo, hi) = self.space.index_box(probe, self.eps);
        self.grid.for_each_in_box(&lo, &hi, |i| {
            if !hit[i] && self.space.distance(probe, self.measure.coords(i)) <= self.eps {
                hit[i] = true;
            }
        });
    }

    /// Distance from `probe` to the nearest particle if it is at most `eps`.
    pub fn nearest_within(&self, probe: &[f64]) -> Option<f64> {
        let (lo, hi) = self.space.index_box(probe, self.eps);
        let mut best: Option<f64> = None;
        self.grid.for_each_in_box(&lo, &hi, |i| {
            let d = self.space.distance(probe, self.measure.coords(i));
            if d <= self.eps && best.is_none_or(|b| d < b) {
                best = Some(d);
            }
        });
        best
    }
}

/// Sum of the weights of `measure` within distance `eps` of `probes`.
pub fn eps_neighborhood_mass(measure: &DiscreteMeasure, probes: &[Point], eps: f64) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::Invalid("probe set is empty".into()));
    }
    for p in probes {
        measure.space().ensure_same(&p.space)?;
    }
    let space = space_for(&measure.space())?;
    let index = NeighborhoodIndex::new(measure, space.as_ref(), eps)?;
    let coords: Vec<Vec<f64>> = probes.iter().map(|p| p.coords.clone()).collect();
    Ok(index.mass_near(&coords))
}

/// Cell masses of `measure` on `spec`, in the space's cell chart.
pub fn cell_masses(measure: &DiscreteMeasure, space: &dyn MetricSpace, spec: &GridSpec) -> HashMap<CellKey, f64> {
    let keys: Vec<CellKey> = measure
        .particles()
        .par_iter()
        .map(|p| spec.key(&space.cell_coords(&p.point.coords)))
        .collect();
    let mut out: HashMap<CellKey, f64> = HashMap::new();
    for (k, p) in keys.into_iter().zip(measure.particles()) {
        *out.entry(k).or_insert(0.0) += p.weight;
    }
    out
}

/// Reference mass assigned to grid cells.
pub trait CellReference: Sync {
    fn cell_mass(&self, key: &CellKey) -> f64;
    fn total(&self) -> f64;
}

/// Reference given by a particle cloud.
pub struct ParticleReference {
    masses: HashMap<CellKey, f64>,
    total: f64,
}

impl ParticleReference {
    pub fn new(measure: &DiscreteMeasure, space: &dyn MetricSpace, spec: &GridSpec) -> Self {
        ParticleReference { masses: cell_masses(measure, space, spec), total: measure.total_mass() }
    }
}

impl CellReference for ParticleReference {
    fn cell_mass(&self, key: &CellKey) -> f64 {
        self.masses.get(key).copied().unwrap_or(0.0)
    }
    fn total(&self) -> f64 {
        self.total
    }
}

/// Reference with constant density on a coordinate box (e.g. Haar measure on a box).
pub struct AnalyticReference {
    lo: Vec<f64>,
    hi: Vec<f64>,
    density: f64,
    spec: GridSpec,
}

impl AnalyticReference {
    /// `total` mass spread uniformly over `[lo, hi]`.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, total: f64, spec: GridSpec) -> Result<Self> {
        if lo.len() != spec.dim() || hi.len() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), found: lo.len() });
        }
        let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        if !(vol > 0.0) {
            return Err(Error::Invalid("reference box has no volume".into()));
        }
        Ok(AnalyticReference { density: total / vol, lo, hi, spec })
    }
}

impl CellReference for AnalyticReference {
    fn cell_mass(&self, key: &CellKey) -> f64 {
        let corner = self.spec.corner(key);
        let upper = self.spec.upper(key);
        let mut vol = 1.0;
        for i in 0..corner.len() {
            let a = corner[i].max(self.lo[i]);
            let b = upper[i].min(self.hi[i]);
            if b <= a {
                return 0.0;
            }
            vol *= b - a;
        }
        self.density * vol
    }
    fn total(&self) -> f64 {
        self.density * self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product::<f64>()
    }
}

/// Haar measure of the whole group with the constant density of a Haar-box cloud.
pub struct HaarReference {
    density: f64,
    spec: GridSpec,
    total: f64,
}

impl CellReference for HaarReference {
    fn cell_mass(&self, key: &CellKey) -> f64 {
        self.density * self.spec.volume_of(key)
    }
    fn total(&self) -> f64 {
        self.total
    }
}

/// Reference masses of `mu` on `spec`. A Haar-box cloud stands for Haar measure, which lives on the
/// whole group, so its density is extended beyond the box; other clouds use their particles.
pub fn cloud_reference(mu: &DiscreteMeasure, space: &dyn MetricSpace, spec: &GridSpec) -> Box<dyn CellReference> {
    if let Some(d @ Descriptor::HaarBox { .. }) = mu.descriptor() {
        if let Some(vol) = d.volume().filter(|v| *v > 0.0) {
            let total = mu.total_mass();
            return Box::new(HaarReference { density: total / vol, spec: spec.clone(), total });
        }
    }
    Box::new(ParticleReference::new(mu, space, spec))
}

/// Mass of `m` in excess of `cap` times the (mass-matched) reference, summed over cells.
///
/// With `cap = f64::INFINITY` only cells of zero reference mass contribute.
pub fn singular_excess(m: &HashMap<CellKey, f64>, m_total: f64, reference: &dyn CellReference, cap: f64) -> f64 {
    let scale = if reference.total() > 0.0 { m_total / reference.total() } else { 0.0 };
    let mut cells: Vec<(&CellKey, &f64)> = m.iter().collect();
    cells.sort_by(|a, b| a.0.cmp(b.0));
    cells
        .into_iter()
        .map(|(k, &mass)| {
            let r = reference.cell_mass(k);
            if r <= 0.0 {
                mass
            } else if cap.is_finite() {
                (mass - cap * scale * r).max(0.0)
            } else {
                0.0
            }
        })
        .sum()
}

/// Mass of `m` in grid cells of side `cell_size` carrying no mass of `mu`.
pub fn singularity_score(m: &DiscreteMeasure, mu: &DiscreteMeasure, cell_size: f64) -> Result<f64> {
    singularity_score_capped(m, mu, cell_size, DEFAULT_MAX_CELLS)
}

pub fn singularity_score_capped(m: &DiscreteMeasure, mu: &DiscreteMeasure, cell_size: f64, max_cells: f64) -> Result<f64> {
    m.space().ensure_same(&mu.space())?;
    let space = space_for(&m.space())?;
    let spec = union_grid(m, mu, space.as_ref(), cell_size, max_cells)?;
    let reference = ParticleReference::new(mu, space.as_ref(), &spec);
    Ok(singular_excess(&cell_masses(m, space.as_ref(), &spec), m.total_mass(), &reference, f64::INFINITY))
}

/// Mass of `m` above `cap` times the mass-matched density of `mu`, on cells of side `cell_size`.
pub fn capped_singularity_score(m: &DiscreteMeasure, mu: &DiscreteMeasure, cell_size: f64, cap: f64) -> Result<f64> {
    m.space().ensure_same(&mu.space())?;
    let space = space_for(&m.space())?;
    let spec = union_grid(m, mu, space.as_ref(), cell_size, DEFAULT_MAX_CELLS)?;
    let reference = cloud_reference(mu, space.as_ref(), &spec);
    Ok(singular_excess(&cell_masses(m, space.as_ref(), &spec), m.total_mass(), reference.as_ref(), cap))
}

/// Mass of `m` in cells where `μ` vanishes or where `m` exceeds `cap` times the mass-matched `μ`.
///
/// Unlike [`capped_singularity_score`] the whole cell mass counts, so an isolated atom scores its full
/// weight.
pub fn concentrated_mass(m: &DiscreteMeasure, mu: &DiscreteMeasure, cell_size: f64, cap: f64) -> Result<f64> {
    m.space().ensure_same(&mu.space())?;
    let space = space_for(&m.space())?;
    let spec = union_grid(m, mu, space.as_ref(), cell_size, DEFAULT_MAX_CELLS)?;
    let reference = cloud_reference(mu, space.as_ref(), &spec);
    let scale = if reference.total() > 0.0 { m.total_mass() / reference.total() } else { 0.0 };
    let mut cells: Vec<(CellKey, f64)> = cell_masses(m, space.as_ref(), &spec).into_iter().collect();
    cells.sort_by_key(|a| a.0);
    Ok(cells
        .into_iter()
        .filter(|(k, mass)| {
            let r = reference.cell_mass(k);
            r <= 0.0 || *mass > cap * scale * r
        })
        .map(|(_, mass)| mass)
        .sum())
}

/// Grid tiling the joint bounding box, closed at its upper corner. The cell-count cap applies to the
/// box of the reference `b` only: cells are hashed, so far-away mass of `a` costs nothing.
pub(crate) fn union_grid(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    space: &dyn MetricSpace,
    cell: f64,
    max_cells: f64,
) -> Result<GridSpec> {
    let bounds = |m: &DiscreteMeasure| -> Option<(Vec<f64>, Vec<f64>)> {
        let mut it = m.particles().iter().map(|p| space.cell_coords(&p.point.coords));
        let first = it.next()?;
        Some(it.fold((first.clone(), first), |(mut lo, mut hi), c| {
            for i in 0..c.len() {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
            (lo, hi)
        }))
    };
    let (ra, rb) = (bounds(a), bounds(b));
    let (ref_lo, ref_hi) = rb.clone().or_else(|| ra.clone()).ok_or_else(|| Error::Invalid("both measures are empty".into()))?;
    let (anchor, top) = match ra {
        Some((lo, hi)) => (
            lo.iter().zip(&ref_lo).map(|(x, y)| x.min(*y)).collect(),
            hi.iter().zip(&ref_hi).map(|(x, y)| x.max(*y)).collect(),
        ),
        None => (ref_lo.clone(), ref_hi.clone()),
    };
    let spec = GridSpec::new(anchor, cell)?.with_closed_top(top);
    spec.check_cap(&ref_lo, &ref_hi, max_cells)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::measure::SpaceTag;

    fn uniform_square(n: usize, seed: u64) -> DiscreteMeasure {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        DiscreteMeasure::uniform(SpaceTag::Euclid(2), coords, 1.0 / n as f64, None).unwrap()
    }

    #[test]
    fn all_particles_as_probes_give_total_mass() {
        let m = uniform_square(500, 1);
        let probes: Vec<Point> = m.particles().iter().map(|p| p.point.clone()).collect();
        assert!((eps_neighborhood_mass(&m, &probes, 1e-9).unwrap() - m.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn disjoint_probe_gives_zero() {
        let m = uniform_square(1000, 2);
        assert_eq!(eps_neighborhood_mass(&m, &[Point::euclid(&[10.0, 10.0])], 0.1).unwrap(), 0.0);
    }

    #[test]
    fn left_half_probe_gives_about_half() {
        let m = uniform_square(10_000, 3);
        let probes: Vec<Point> = m.particles().iter().filter(|p| p.point.coords[0] < 0.5).map(|p| p.point.clone()).collect();
        let mass = eps_neighborhood_mass(&m, &probes, 0.02).unwrap();
        // thickened half-square has area 0.5 + 0.02
        assert!((mass - 0.52).abs() < 0.05, "mass {mass}");
        assert!((mass - 0.5 * m.total_mass()).abs() <= 0.05);
    }

    #[test]
    fn mixed_tags_rejected() {
        let m = uniform_square(10, 4);
        let probe = Point::new(SpaceTag::Heisenberg(1), vec![0.0; 3]).unwrap();
        assert!(eps_neighborhood_mass(&m, &[probe], 0.1).is_err());
    }

    #[test]
    fn score_zero_for_identical_measures() {
        let m = uniform_square(2000, 5);
        for cell in [0.2, 0.1, 0.05, 0.01] {
            assert_eq!(singularity_score(&m, &m, cell).unwrap(), 0.0);
        }
    }

    #[test]
    fn isolated_atom_scores_one() {
        let mu = uniform_square(2000, 6);
        let atom = DiscreteMeasure::dirac(Point::euclid(&[0.5, 0.5]), 1.0).unwrap();
        let nearest = mu
            .particles()
            .iter()
            .map(|p| ((p.point.coords[0] - 0.5).powi(2) + (p.point.coords[1] - 0.5).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        let score = singularity_score(&atom, &mu, nearest / 4.0).unwrap();
        assert_eq!(score, 1.0);
    }

    #[test]
    fn half_atom_scores_half_with_cap() {
        let mu = uniform_square(20_000, 7);
        let diffuse = uniform_square(20_000, 8);
        let mut atoms: Vec<(Vec<f64>, f64)> =
            diffuse.particles().iter().map(|p| (p.point.coords.clone(), 0.5 * p.weight)).collect();
        atoms.push((vec![0.3, 0.7], 0.5));
        let m = DiscreteMeasure::from_weighted(SpaceTag::Euclid(2), atoms, None).unwrap();
        let space = space_for(&m.space()).unwrap();
        let spec = union_grid(&m, &mu, space.as_ref(), 0.02, DEFAULT_MAX_CELLS).unwrap();
        let reference = ParticleReference::new(&mu, space.as_ref(), &spec);
        let excess = singular_excess(&cell_masses(&m, space.as_ref(), &spec), m.total_mass(), &reference, 10.0);
        assert!((excess - 0.5).abs() < 0.02, "excess {excess}");
    }

    #[test]
    fn analytic_reference_integrates_box() {
        let spec = GridSpec::new(vec![0.0, 0.0], 0.3).unwrap();
        let r = AnalyticReference::new(vec![0.0, 0.0], vec![1.0, 1.0], 2.0, spec.clone()).unwrap();
        let mut sum = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let mut k = [0i64; 8];
                k[0] = i;
                k[1] = j;
                sum += r.cell_mass(&CellKey(k));
            }
        }
        assert!((sum - 2.0).abs() < 1e-12);
    }
}
