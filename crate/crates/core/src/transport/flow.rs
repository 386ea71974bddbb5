//! Exact transportation problem by successive shortest paths with node potentials.

use crate::error::{Error, Result};

/// Optimal flow of a transportation problem.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolution {
    /// `(row, col, mass)` with positive mass, in row-major order.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Row potentials `φ` and column potentials `ψ` with `φ_i + ψ_j ≤ c_ij`.
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
}

/// Relative mass below which supplies and demands count as exhausted.
pub const RESIDUAL_CUTOFF: f64 = 1e-15;

/// Minimizes `Σ c_ij x_ij` subject to row sums `supply` and column sums `demand`.
///
/// Shortest paths are found by dense Dijkstra; ties go to the lowest node index (rows before
/// columns), which fixes the returned plan among equally optimal ones.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> Result<FlowSolution> {
    let (n, m) = (supply.len(), demand.len());
    if n == 0 || m == 0 {
        return Err(Error::Invalid("transport between empty measures".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if supply.iter().chain(demand).any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::Invalid("masses must be finite and nonnegative".into()));
    }
    if (total_s - total_d).abs() > 1e-9 * total_s.max(total_d).max(f64::MIN_POSITIVE) {
        return Err(Error::MassMismatch(total_s, total_d));
    }
    let c: Vec<f64> = (0..n * m).map(|k| cost(k / m, k % m)).collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("cost matrix has non-finite entries".into()));
    }
    let cutoff = RESIDUAL_CUTOFF * total_s.max(f64::MIN_POSITIVE);
    let mut rest_s = supply.to_vec();
    let scale = if total_d > 0.0 { total_s / total_d } else { 1.0 };
    let mut rest_d: Vec<f64> = demand.iter().map(|d| d * scale).collect();
    let mut x = vec![0.0; n * m];
    let mut pot = vec![0.0; n + m];
    let v = n + m;
    let mut dist = vec![0.0; v];
    let mut prev = vec![usize::MAX; v];
    let mut done = vec![false; v];

    loop {
        if rest_s.iter().all(|s| *s <= cutoff) || rest_d.iter().all(|d| *d <= cutoff) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if rest_s[i] > cutoff {
                dist[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for k in 0..v {
                if !done[k] && dist[k] < best {
                    best = dist[k];
                    u = k;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && rest_d[u - n] > cutoff {
                target = Some(u);
                break;
            }
            if u < n {
                for j in 0..m {
                    let w = n + j;
                    if done[w] {
                        continue;
                    }
                    let rc = (c[u * m + j] + pot[u] - pot[w]).max(0.0);
                    if dist[u] + rc < dist[w] {
                        dist[w] = dist[u] + rc;
                        prev[w] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || x[i * m + j] <= 0.0 {
                        continue;
                    }
                    let rc = (-c[i * m + j] + pot[u] - pot[i]).max(0.0);
                    if dist[u] + rc < dist[i] {
                        dist[i] = dist[u] + rc;
                        prev[i] = u;
                    }
                }
            }
        }
        let Some(t) = target else {
            return Err(Error::Invalid("no augmenting path (infeasible transport problem)".into()));
        };
        let dt = dist[t];
        for k in 0..v {
            pot[k] += dist[k].min(dt);
        }
        // bottleneck along the path
        let mut delta = rest_d[t - n];
        let mut node = t;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if p >= n {
                delta = delta.min(x[node * m + (p - n)]);
            }
            node = p;
        }
        delta = delta.min(rest_s[node]);
        let src = node;
        let mut node = t;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if p < n {
                x[p * m + (node - n)] += delta;
            } else {
                let cell = node * m + (p - n);
                x[cell] -= delta;
                if x[cell] <= cutoff {
                    x[cell] = 0.0;
                }
            }
            node = p;
        }
        rest_s[src] -= delta;
        rest_d[t - n] -= delta;
    }

    let mut flows = Vec::new();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let w = x[i * m + j];
            if w > 0.0 {
                flows.push((i, j, w));
                total += w * c[i * m + j];
            }
        }
    }
    Ok(FlowSolution {
        flows,
        cost: total,
        row_potential: pot[..n].iter().map(|p| -p).collect(),
        col_potential: pot[n..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let c = [[0.0, 2.0], [2.0, 0.0]];
        let s = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &|i, j| c[i][j]).unwrap();
        assert_eq!(s.cost, 0.0);
        assert_eq!(s.flows, vec![(0, 0, 0.5), (1, 1, 0.5)]);
    }

    #[test]
    fn requires_rerouting() {
        // greedy would send row 0 to col 0; the optimum reroutes through a backward edge
        let c = [[1.0, 2.0], [1.0, 10.0]];
        let s = solve_transport(&[1.0, 1.0], &[1.0, 1.0], &|i, j| c[i][j]).unwrap();
        assert_eq!(s.cost, 3.0);
        for (i, j, _) in &s.flows {
            assert!((s.row_potential[*i] + s.col_potential[*j] - c[*i][*j]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unbalanced() {
        assert!(matches!(solve_transport(&[1.0], &[2.0], &|_, _| 0.0), Err(Error::MassMismatch(..))));
    }
}
