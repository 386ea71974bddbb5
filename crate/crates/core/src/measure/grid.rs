use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest coordinate dimension the grid index supports.
pub const MAX_GRID_DIM: usize = 8;

/// Integer cell coordinates, padded with zeros beyond the grid dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey(pub [i64; MAX_GRID_DIM]);

/// Axis-aligned cubical lattice: cell `k` covers `origin + cell·[k, k+1)`.
///
/// With a closed top the box `[origin, top]` is cut into `round(extent / cell)` bins per axis and
/// the last bin absorbs the remainder (and the top edge), so no sliver cells appear at the edge.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub origin: Vec<f64>,
    pub cell: f64,
    pub top: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, cell: f64) -> Result<Self> {
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::OutOfRange(format!("cell size {cell} must be positive")));
        }
        if origin.len() > MAX_GRID_DIM {
            return Err(Error::OutOfRange(format!("grid dimension {} exceeds {MAX_GRID_DIM}", origin.len())));
        }
        Ok(GridSpec { origin, cell, top: None })
    }

    /// Closes the tiled box at `top`; the last bin per axis is between half and one and a half cells wide.
    pub fn with_closed_top(mut self, top: Vec<f64>) -> Self {
        self.top = Some(top);
        self
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn key(&self, x: &[f64]) -> CellKey {
        let mut k = [0i64; MAX_GRID_DIM];
        for (i, (&c, &o)) in x.iter().zip(&self.origin).enumerate() {
            k[i] = ((c - o) / self.cell).floor() as i64;
            if let Some(last) = self.last_bin(i) {
                k[i] = k[i].min(last);
            }
        }
        CellKey(k)
    }

    fn last_bin(&self, axis: usize) -> Option<i64> {
        let top = self.top.as_ref()?;
        Some((((top[axis] - self.origin[axis]) / self.cell).round() as i64 - 1).max(0))
    }

    /// Upper corner of a cell; the last bins of a closed grid end at the top.
    pub fn upper(&self, key: &CellKey) -> Vec<f64> {
        (0..self.dim())
            .map(|i| match (self.last_bin(i), &self.top) {
                (Some(last), Some(top)) if key.0[i] == last => top[i].max(self.origin[i] + key.0[i] as f64 * self.cell),
                _ => self.origin[i] + (key.0[i] + 1) as f64 * self.cell,
            })
            .collect()
    }

    /// Volume of a particular cell, which differs from [`GridSpec::cell_volume`] only in the last bins.
    pub fn volume_of(&self, key: &CellKey) -> f64 {
        self.corner(key).iter().zip(self.upper(key)).map(|(a, b)| b - a).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell.powi(self.dim() as i32)
    }

    /// Lower corner of a cell.
    pub fn corner(&self, key: &CellKey) -> Vec<f64> {
        self.origin.iter().enumerate().map(|(i, o)| o + key.0[i] as f64 * self.cell).collect()
    }

    /// Number of cells needed to tile the box `[lo, hi]`.
    pub fn cells_in_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        lo.iter()
            .zip(hi)
            .map(|(a, b)| (((b - a) / self.cell).floor() + 1.0).max(1.0))
            .product()
    }

    pub fn check_cap(&self, lo: &[f64], hi: &[f64], cap: f64) -> Result<()> {
        let cells = self.cells_in_box(lo, hi);
        if cells > cap {
            return Err(Error::TooManyCells { cells, cap });
        }
        Ok(())
    }
}

/// Bucketed point index over a [`GridSpec`].
#[derive(Clone, Debug)]
pub struct GridIndex {
    spec: GridSpec,
    buckets: HashMap<CellKey, Vec<u32>>,
}

impl GridIndex {
    pub fn build(spec: GridSpec, points: &[Vec<f64>]) -> Self {
        let mut buckets: HashMap<CellKey, Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(spec.key(p)).or_default().push(i as u32);
        }
        GridIndex { spec, buckets }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn occupied_cells(&self) -> usize {
        self.buckets.len()
    }

    /// Calls `visit` with every indexed point whose cell meets the box `[lo, hi]`.
    pub fn for_each_in_box(&self, lo: &[f64], hi: &[f64], mut visit: impl FnMut(usize)) {
        let d = self.spec.dim();
        let klo = self.spec.key(lo);
        let khi = self.spec.key(hi);
        let span: f64 = (0..d).map(|i| (khi.0[i] - klo.0[i] + 1) as f64).product();
        if span > self.buckets.len() as f64 {
            for (key, members) in &self.buckets {
                if (0..d).all(|i| key.0[i] >= klo.0[i] && key.0[i] <= khi.0[i]) {
                    members.iter().for_each(|&m| visit(m as usize));
                }
            }
            return;
        }
        let mut cur = klo;
        loop {
            if let Some(members) = self.buckets.get(&cur) {
                members.iter().for_each(|&m| visit(m as usize));
            }
            let mut axis = 0;
            loop {
                if axis == d {
                    return;
                }
                if cur.0[axis] < khi.0[axis] {
                    cur.0[axis] += 1;
                    break;
                }
                cur.0[axis] = klo.0[axis];
                axis += 1;
            }
        }
    }
}
