//! Exact discrete W₂ transport, displacement interpolation and contraction to a Dirac mass.

mod flow;

pub use flow::{solve_transport, FlowSolution, RESIDUAL_CUTOFF};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{pushforward, Coupling, DiscreteMeasure, Pair, Particle, Point};
use crate::space::MetricSpace;

/// Default bound on the number of atoms per side.
pub const DEFAULT_SIZE_CAP: usize = 500;

#[derive(Clone, Debug)]
pub struct TransportResult {
    pub coupling: Coupling,
    /// `W₂²`.
    pub cost: f64,
    pub duals: Option<(Vec<f64>, Vec<f64>)>,
}

impl TransportResult {
    pub fn w2(&self) -> f64 {
        self.cost.max(0.0).sqrt()
    }
}

/// On-disk form of a transport result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportRecord {
    pub pairs: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub w2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duals: Option<(Vec<f64>, Vec<f64>)>,
}

impl From<&TransportResult> for TransportRecord {
    fn from(r: &TransportResult) -> Self {
        TransportRecord {
            pairs: r.coupling.pairs().iter().map(|p| (p.source, p.target, p.weight)).collect(),
            cost: r.cost,
            w2: r.w2(),
            duals: r.duals.clone(),
        }
    }
}

/// Optimal coupling for the cost `d²`, with potentials as certificate.
pub fn solve_w2(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, space: &dyn MetricSpace) -> Result<TransportResult> {
    solve_w2_capped(mu0, mu1, space, DEFAULT_SIZE_CAP)
}

pub fn solve_w2_capped(mu0: &DiscreteMeasure, mu1: &DiscreteMeasure, space: &dyn MetricSpace, cap: usize) -> Result<TransportResult> {
    space.tag().ensure_same(&mu0.space())?;
    space.tag().ensure_same(&mu1.space())?;
    if mu0.len() > cap || mu1.len() > cap {
        return Err(Error::SizeCap { rows: mu0.len(), cols: mu1.len(), cap });
    }
    let (m0, m1) = (mu0.total_mass(), mu1.total_mass());
    if (m0 - m1).abs() > 1e-9 * m0.max(m1).max(1.0) {
        return Err(Error::MassMismatch(m0, m1));
    }
    let cost = |i: usize, j: usize| {
        let d = space.distance(mu0.coords(i), mu1.coords(j));
        d * d
    };
    let sol = solve_transport(&mu0.weights(), &mu1.weights(), &cost)?;
    let source = Arc::new(mu0.clone());
    let targets = mu1.particles().iter().map(|p| p.point.clone()).collect();
    let pairs = sol.flows.iter().map(|&(i, j, w)| Pair { source: i, target: j, weight: w }).collect();
    let coupling = Coupling::new_unchecked(source, targets, pairs)?;
    Ok(TransportResult { coupling, cost: sol.cost, duals: Some((sol.row_potential, sol.col_potential)) })
}

/// Displacement interpolation at time `t`, with the indices of pairs joined by a canonical
/// (non-unique) geodesic.
#[derive(Clone, Debug)]
pub struct Interpolation {
    pub measure: DiscreteMeasure,
    pub non_unique_pairs: Vec<usize>,
}

/// `μ_t = Σ w_ij δ_{γ_ij(t)}`.
pub fn interpolate(result: &TransportResult, t: f64, space: &dyn MetricSpace) -> Result<Interpolation> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("time {t} not in [0, 1]")));
    }
    let c = &result.coupling;
    let mut particles = Vec::with_capacity(c.pairs().len());
    let mut non_unique_pairs = Vec::new();
    for (k, p) in c.pairs().iter().enumerate() {
        let seg = space
            .segment(c.source().coords(p.source), &c.targets()[p.target].coords)
            .map_err(|e| Error::Invalid(format!("pair {k}: {e}")))?;
        if !seg.unique {
            non_unique_pairs.push(k);
        }
        particles.push(Particle { point: seg.point_at(t), weight: p.weight });
    }
    Ok(Interpolation { measure: DiscreteMeasure::new(space.tag(), particles, None)?, non_unique_pairs })
}

/// Pushforward of `μ` under the contraction toward `o` at time `t`.
pub fn contract_to_dirac(mu: &DiscreteMeasure, o: &Point, t: f64, space: &dyn MetricSpace) -> Result<DiscreteMeasure> {
    space.tag().ensure_same(&o.space)?;
    let mut err = None;
    let out = pushforward(mu, |p| match space.contract_toward(&p.coords, &o.coords, t) {
        Ok(coords) => Point { space: p.space, coords },
        Err(e) => {
            err.get_or_insert(e);
            p.clone()
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
