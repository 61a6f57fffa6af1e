//! Exact transportation problem with general marginals, solved by
//! successive shortest augmenting paths with Dijkstra and node potentials on
//! the dense bipartite graph.

use crate::error::{Error, Result};

const MASS_EPS: f64 = 1e-15;

/// Minimises `Σ plan[i][j] cost[i][j]` over couplings of `supply` and
/// `demand` (each summing to the same total). Returns the row-major plan.
pub fn solve_transportation(cost: &[f64], supply: &[f64], demand: &[f64]) -> Result<Vec<f64>> {
    let n = supply.len();
    let m = demand.len();
    assert_eq!(cost.len(), n * m);
    // Node layout: 0 = source, 1..=n rows, n+1..=n+m columns, n+m+1 sink.
    let nodes = n + m + 2;
    let sink = n + m + 1;
    let col = |j: usize| n + 1 + j;

    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let mut flow = vec![0.0; n * m];
    let mut pot = vec![0.0; nodes];
    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    let total: f64 = supply.iter().sum();
    let max_rounds = 4 * (n + m) * (n + m) + 16;
    for _ in 0..max_rounds {
        let remaining: f64 = ra.iter().sum();
        if remaining <= 1e-13 * total.max(1.0) {
            return Ok(flow);
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|f| *f = false);
        dist[0] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX || u == sink {
                break;
            }
            done[u] = true;
            let du = dist[u];
            let relax = |v: usize, c: f64, dist: &mut [f64], prev: &mut [usize]| {
                let nd = du + c + pot[u] - pot[v];
                // Reduced costs are non-negative up to rounding.
                let nd = nd.max(du);
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                }
            };
            if u == 0 {
                for (i, &r) in ra.iter().enumerate() {
                    if r > MASS_EPS {
                        relax(1 + i, 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..m {
                    relax(col(j), cost[i * m + j], &mut dist, &mut prev);
                }
            } else {
                let j = u - n - 1;
                for i in 0..n {
                    if flow[i * m + j] > MASS_EPS {
                        relax(1 + i, -cost[i * m + j], &mut dist, &mut prev);
                    }
                }
                if rb[j] > MASS_EPS {
                    relax(sink, 0.0, &mut dist, &mut prev);
                }
            }
        }
        let dt = dist[sink];
        if !dt.is_finite() {
            let left: f64 = ra.iter().sum();
            if left <= 1e-9 {
                return Ok(flow);
            }
            return Err(Error::InvalidMeasure(format!(
                "transport problem infeasible with {left} unshipped mass"
            )));
        }
        for v in 0..nodes {
            pot[v] += dist[v].min(dt);
        }
        // Bottleneck along the path sink <- col <- row <- ... <- source.
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            if u == 0 {
                bottleneck = bottleneck.min(ra[v - 1]);
            } else if v == sink {
                bottleneck = bottleneck.min(rb[u - n - 1]);
            } else if u > n {
                // Reverse arc column -> row cancels existing flow.
                bottleneck = bottleneck.min(flow[(v - 1) * m + (u - n - 1)]);
            }
            v = u;
        }
        let mut v = sink;
        while v != 0 {
            let u = prev[v];
            if u == 0 {
                ra[v - 1] -= bottleneck;
            } else if v == sink {
                rb[u - n - 1] -= bottleneck;
            } else if u <= n {
                flow[(u - 1) * m + (v - n - 1)] += bottleneck;
            } else {
                let f = &mut flow[(v - 1) * m + (u - n - 1)];
                *f -= bottleneck;
                if *f < MASS_EPS {
                    *f = 0.0;
                }
            }
            v = u;
        }
        for r in ra.iter_mut().chain(rb.iter_mut()) {
            if *r < MASS_EPS {
                *r = 0.0;
            }
        }
    }
    Err(Error::InvalidMeasure("transport solver did not terminate".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_forced_and_free() {
        // Moving mass 0.5 from row 0 to column 1 is cheaper than the diagonal.
        let cost = [0.0, 1.0, 5.0, 0.0];
        let plan = solve_transportation(&cost, &[0.7, 0.3], &[0.4, 0.6]).unwrap();
        let total: f64 = plan.iter().zip(&cost).map(|(p, c)| p * c).sum();
        assert!((total - 0.3).abs() < 1e-12, "{plan:?}");
    }

    #[test]
    fn marginals_are_respected() {
        let cost: Vec<f64> = (0..12).map(|k| ((k * 7) % 5) as f64 + 0.5).collect();
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.25, 0.5, 0.25];
        let plan = solve_transportation(&cost, &a, &b).unwrap();
        for i in 0..4 {
            let s: f64 = plan[i * 3..i * 3 + 3].iter().sum();
            assert!((s - a[i]).abs() < 1e-12);
        }
        for j in 0..3 {
            let s: f64 = (0..4).map(|i| plan[i * 3 + j]).sum();
            assert!((s - b[j]).abs() < 1e-12);
        }
    }
}
