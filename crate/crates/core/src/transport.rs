//! Exact discrete optimal transport.
//!
//! Square problems with uniform marginals go through a Hungarian solver;
//! everything else through successive shortest paths with Dijkstra
//! potentials. Both finish with an explicit dual-feasibility check.

use crate::error::{Error, Result};

/// Largest supported side of the cost matrix.
pub const MAX_SIDE: usize = 1024;
/// Reduced costs below `-CERT_TOL` fail the optimality certificate.
pub const CERT_TOL: f64 = 1e-10;

const MASS_EPS: f64 = 1e-14;

/// Dense row-major cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub cost: f64,
    /// `(row, col, mass)` for every arc carrying positive mass.
    pub flows: Vec<(usize, usize, f64)>,
}

/// Minimum of `sum pi_ij c_ij` over couplings of `a` and `b`.
pub fn solve(cost: &CostMatrix, a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    let (n, m) = (cost.rows, cost.cols);
    if n > MAX_SIDE || m > MAX_SIDE {
        return Err(Error::TooLarge { rows: n, cols: m });
    }
    if n != a.len() || m != b.len() || n == 0 || m == 0 {
        return Err(Error::Precondition("marginal lengths do not match the cost matrix".into()));
    }
    if n == m && is_uniform(a) && is_uniform(b) {
        let perm = assignment(cost)?;
        let w = 1.0 / n as f64;
        let flows: Vec<_> = perm.iter().enumerate().map(|(i, &j)| (i, j, w)).collect();
        let cost = flows.iter().map(|&(i, j, _)| cost.at(i, j)).sum::<f64>() * w;
        return Ok(TransportPlan { cost, flows });
    }
    shortest_paths(cost, a, b)
}

fn is_uniform(w: &[f64]) -> bool {
    let target = 1.0 / w.len() as f64;
    w.iter().all(|&x| (x - target).abs() <= 1e-12)
}

/// Optimal permutation for a square cost matrix (row `i` goes to column `perm[i]`).
pub fn assignment(cost: &CostMatrix) -> Result<Vec<usize>> {
    let n = cost.rows;
    if cost.cols != n {
        return Err(Error::Precondition("assignment needs a square cost matrix".into()));
    }
    // 1-based potentials with a dummy column 0
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            if !delta.is_finite() {
                return Err(Error::SolverFailed("non-finite cost in assignment".into()));
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    // dual feasibility and complementary slackness
    for i in 0..n {
        for j in 0..n {
            let reduced = cost.at(i, j) - u[i + 1] - v[j + 1];
            if reduced < -CERT_TOL {
                return Err(Error::SolverFailed(format!("assignment dual infeasible by {reduced:e}")));
            }
        }
        let slack = cost.at(i, perm[i]) - u[i + 1] - v[perm[i] + 1];
        if slack.abs() > CERT_TOL {
            return Err(Error::SolverFailed(format!("assignment slackness violated by {slack:e}")));
        }
    }
    Ok(perm)
}

/// Successive shortest augmenting paths on the residual transportation network.
///
/// Sources with remaining supply stay at potential zero, which lets all of
/// them act as Dijkstra roots without a super source.
fn shortest_paths(cost: &CostMatrix, a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    let (n, m) = (cost.rows, cost.cols);
    let nodes = n + m;
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![0.0f64; n * m];
    let mut pot = vec![0.0f64; nodes];
    let max_rounds = 8 * (n + m) + 64;
    for _ in 0..max_rounds {
        if supply.iter().all(|&s| s <= MASS_EPS) || demand.iter().all(|&d| d <= MASS_EPS) {
            break;
        }
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        for i in 0..n {
            if supply[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut best = f64::INFINITY;
            let mut u = usize::MAX;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && demand[u - n] > MASS_EPS {
                target = u;
                break;
            }
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let nd = dist[u] + (cost.at(u, j) + pot[u] - pot[v]).max(0.0);
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= 0.0 {
                        continue;
                    }
                    let nd = dist[u] + (-cost.at(i, j) + pot[u] - pot[i]).max(0.0);
                    if nd < dist[i] {
                        dist[i] = nd;
                        prev[i] = u;
                    }
                }
            }
        }
        if target == usize::MAX {
            return Err(Error::SolverFailed("no augmenting path with mass remaining".into()));
        }
        let dt = dist[target];
        for v in 0..nodes {
            pot[v] += dist[v].min(dt);
        }
        // bottleneck along the path
        let mut amount = demand[target - n];
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                // backward arc sink u -> source v
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        let root = v;
        let mut v = target;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += amount;
            } else {
                let f = &mut flow[v * m + (u - n)];
                *f -= amount;
                if *f < MASS_EPS * 1e-3 {
                    *f = 0.0;
                }
            }
            v = u;
        }
        supply[root] -= amount;
        demand[target - n] -= amount;
    }
    if supply.iter().any(|&s| s > 1e-12) {
        return Err(Error::SolverFailed("iteration limit reached before all mass was moved".into()));
    }
    // reduced-cost certificate on every residual arc
    for i in 0..n {
        for j in 0..m {
            let reduced = cost.at(i, j) + pot[i] - pot[n + j];
            if reduced < -CERT_TOL {
                return Err(Error::SolverFailed(format!("reduced cost {reduced:e} on arc ({i},{j})")));
            }
            if flow[i * m + j] > 0.0 && -reduced < -CERT_TOL {
                return Err(Error::SolverFailed(format!("reduced cost {:e} on reverse arc ({i},{j})", -reduced)));
            }
        }
    }
    let mut flows = Vec::new();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0.0 {
                total += f * cost.at(i, j);
                flows.push((i, j, f));
            }
        }
    }
    Ok(TransportPlan { cost: total, flows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cost: &CostMatrix) -> f64 {
        fn rec(cost: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.rows {
                *best = best.min(acc);
                return;
            }
            for j in 0..cost.cols {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost.at(row, j), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.cols], 0.0, &mut best);
        best / cost.rows as f64
    }

    #[test]
    fn assignment_matches_permutations() {
        let cost = CostMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.1 * (i as f64 - j as f64).abs());
        let w = vec![0.2; 5];
        let plan = solve(&cost, &w, &w).unwrap();
        assert!((plan.cost - brute_force(&cost)).abs() < 1e-12);
    }

    #[test]
    fn general_weights_against_hand_solution() {
        // two sources, three sinks on a line
        let xs = [0.0f64, 1.0];
        let ys = [0.0, 0.5, 1.0];
        let cost = CostMatrix::from_fn(2, 3, |i, j| (xs[i] - ys[j]).abs());
        let plan = solve(&cost, &[0.5, 0.5], &[0.25, 0.5, 0.25]).unwrap();
        // 0.25 stays at 0, 0.25 moves 0 -> 0.5, 0.25 moves 1 -> 0.5, 0.25 stays at 1
        assert!((plan.cost - 0.25).abs() < 1e-14);
        let moved: f64 = plan.flows.iter().map(|f| f.2).sum();
        assert!((moved - 1.0).abs() < 1e-12);
    }

    #[test]
    fn general_solver_agrees_with_assignment() {
        let cost = CostMatrix::from_fn(6, 6, |i, j| ((i as f64 + 1.3).sin() - (j as f64 * 0.7).cos()).abs());
        let w = vec![1.0 / 6.0; 6];
        let a = shortest_paths(&cost, &w, &w).unwrap().cost;
        let b = solve(&cost, &w, &w).unwrap().cost;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn oversized_problem_is_rejected() {
        let cost = CostMatrix { rows: 1025, cols: 1, data: vec![0.0; 1025] };
        let a = vec![1.0 / 1025.0; 1025];
        assert!(matches!(solve(&cost, &a, &[1.0]), Err(Error::TooLarge { .. })));
    }
}
