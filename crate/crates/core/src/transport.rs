//! Exact discrete optimal transport.
//!
//! The transportation problem min Σ c_ij π_ij over couplings of a supply
//! vector and a demand vector is solved with the primal transportation
//! simplex (a network simplex on the complete bipartite graph). The basis is
//! a spanning tree of m + n - 1 cells, duals come from the tree, and the
//! entering cell is the most negative reduced cost. After a run of
//! degenerate pivots the entering rule falls back to Bland's rule.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{Coupling, DiscreteMeasure};

#[derive(Debug, Clone, Serialize)]
pub struct TransportSolution {
    pub plan: Vec<Vec<f64>>,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
    pub cost: f64,
    /// Primal minus dual objective.
    pub duality_gap: f64,
    /// Most negative reduced cost c_ij - u_i - v_j at termination (≥ -tol).
    pub min_reduced_cost: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
}

struct Tableau<'a> {
    m: usize,
    n: usize,
    cost: &'a [Vec<f64>],
    flow: Vec<Vec<f64>>,
    basic: Vec<Vec<bool>>,
    cells: Vec<Cell>,
}

impl Tableau<'_> {
    fn duals(&self) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut u = vec![f64::NAN; m];
        let mut v = vec![f64::NAN; n];
        u[0] = 0.0;
        let mut row_adj = vec![Vec::new(); m];
        let mut col_adj = vec![Vec::new(); n];
        for c in &self.cells {
            row_adj[c.i].push(c.j);
            col_adj[c.j].push(c.i);
        }
        // nodes 0..m are rows, m..m+n columns
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            if node < m {
                for &j in &row_adj[node] {
                    if v[j].is_nan() {
                        v[j] = self.cost[node][j] - u[node];
                        stack.push(m + j);
                    }
                }
            } else {
                let j = node - m;
                for &i in &col_adj[j] {
                    if u[i].is_nan() {
                        u[i] = self.cost[i][j] - v[j];
                        stack.push(i);
                    }
                }
            }
        }
        (u, v)
    }

    /// Cells of the tree path from row `i` to column `j`, in order.
    fn tree_path(&self, i: usize, j: usize) -> Vec<Cell> {
        let (m, n) = (self.m, self.n);
        let mut row_adj = vec![Vec::new(); m];
        let mut col_adj = vec![Vec::new(); n];
        for c in &self.cells {
            row_adj[c.i].push(c.j);
            col_adj[c.j].push(c.i);
        }
        let mut parent = vec![usize::MAX; m + n];
        parent[i] = i;
        let mut queue = std::collections::VecDeque::from([i]);
        while let Some(node) = queue.pop_front() {
            if node == m + j {
                break;
            }
            if node < m {
                for &jj in &row_adj[node] {
                    if parent[m + jj] == usize::MAX {
                        parent[m + jj] = node;
                        queue.push_back(m + jj);
                    }
                }
            } else {
                for &ii in &col_adj[node - m] {
                    if parent[ii] == usize::MAX {
                        parent[ii] = node;
                        queue.push_back(ii);
                    }
                }
            }
        }
        let mut path = Vec::new();
        let mut node = m + j;
        while node != i {
            let p = parent[node];
            let cell = if node < m { Cell { i: node, j: p - m } } else { Cell { i: p, j: node - m } };
            path.push(cell);
            node = p;
        }
        path.reverse();
        path
    }
}

/// Solve min Σ cost_ij π_ij subject to row sums `supply` and column sums `demand`.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("empty transport problem".into()));
    }
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("cost matrix shape mismatch".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite transport cost".into()));
    }
    let (ts, td): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (ts - td).abs() > 1e-9 * ts.max(1.0) {
        return Err(Error::InvalidParameter(format!("supply {ts} and demand {td} differ")));
    }

    // north-west corner start: a staircase spanning tree with m + n - 1 cells
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut tab = Tableau {
        m,
        n,
        cost,
        flow: vec![vec![0.0; n]; m],
        basic: vec![vec![false; n]; m],
        cells: Vec::with_capacity(m + n - 1),
    };
    let (mut i, mut j) = (0, 0);
    loop {
        let x = if i == m - 1 && j == n - 1 { s[i].max(d[j]) } else { s[i].min(d[j]) }.max(0.0);
        tab.flow[i][j] = x;
        tab.basic[i][j] = true;
        tab.cells.push(Cell { i, j });
        s[i] -= x;
        d[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || s[i] <= d[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(tab.cells.len(), m + n - 1);

    let scale = cost.iter().flatten().fold(0.0f64, |a, c| a.max(c.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    let mut pivots = 0;
    let mut degenerate_run = 0;
    loop {
        let (u, v) = tab.duals();
        let mut entering: Option<(usize, usize, f64)> = None;
        let bland = degenerate_run > m + n;
        'search: for ii in 0..m {
            for jj in 0..n {
                if tab.basic[ii][jj] {
                    continue;
                }
                let r = cost[ii][jj] - u[ii] - v[jj];
                if r < -tol {
                    if bland {
                        entering = Some((ii, jj, r));
                        break 'search;
                    }
                    if entering.is_none_or(|(_, _, best)| r < best) {
                        entering = Some((ii, jj, r));
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            return Ok(finish(&tab, supply, demand, u, v, pivots));
        };
        if pivots >= max_pivots {
            return Err(Error::SolverFailure { iterations: pivots, gradient_norm: f64::NAN });
        }
        pivots += 1;

        // cycle: entering (+), then the tree path from column ej back to row ei
        // alternates (-, +, -, ...)
        let path = tab.tree_path(ei, ej);
        let minus: Vec<Cell> = path.iter().rev().step_by(2).copied().collect();
        let plus: Vec<Cell> = path.iter().rev().skip(1).step_by(2).copied().collect();
        let mut leave = minus[0];
        let mut theta = f64::INFINITY;
        for c in &minus {
            let f = tab.flow[c.i][c.j];
            let better = f < theta
                || (bland && f == theta && (c.i, c.j) < (leave.i, leave.j));
            if better {
                theta = f;
                leave = *c;
            }
        }
        let theta = theta.max(0.0);
        degenerate_run = if theta <= tol { degenerate_run + 1 } else { 0 };
        tab.flow[ei][ej] += theta;
        for c in &plus {
            tab.flow[c.i][c.j] += theta;
        }
        for c in &minus {
            tab.flow[c.i][c.j] = (tab.flow[c.i][c.j] - theta).max(0.0);
        }
        tab.flow[leave.i][leave.j] = 0.0;
        tab.basic[leave.i][leave.j] = false;
        tab.basic[ei][ej] = true;
        let pos = tab
            .cells
            .iter()
            .position(|c| c.i == leave.i && c.j == leave.j)
            .expect("leaving cell is basic");
        tab.cells[pos] = Cell { i: ei, j: ej };
    }
}

fn finish(
    tab: &Tableau<'_>,
    supply: &[f64],
    demand: &[f64],
    u: Vec<f64>,
    v: Vec<f64>,
    pivots: usize,
) -> TransportSolution {
    let mut cost = 0.0;
    let mut min_reduced = f64::INFINITY;
    for i in 0..tab.m {
        for j in 0..tab.n {
            cost += tab.cost[i][j] * tab.flow[i][j];
            min_reduced = min_reduced.min(tab.cost[i][j] - u[i] - v[j]);
        }
    }
    let dual: f64 = supply.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>()
        + demand.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    TransportSolution {
        plan: tab.flow.clone(),
        row_duals: u,
        col_duals: v,
        cost,
        duality_gap: cost - dual,
        min_reduced_cost: min_reduced,
        pivots,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WassersteinResult {
    pub p: f64,
    /// W_p(μ₁, μ₂).
    pub cost: f64,
    pub plan: Coupling,
    pub solution: TransportSolution,
}

/// Exact W_p(μ₁, μ₂) with an optimal coupling.
pub fn wasserstein(p: f64, mu1: &DiscreteMeasure, mu2: &DiscreteMeasure) -> Result<WassersteinResult> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("Wasserstein exponent must be >= 1, got {p}")));
    }
    if mu1.space != mu2.space {
        return Err(Error::IncompatibleSpace("measures live in different spaces".into()));
    }
    let space = &mu1.space;
    let cost: Vec<Vec<f64>> = mu1
        .atoms
        .iter()
        .map(|x| mu2.atoms.iter().map(|y| space.dist(x, y).powf(p)).collect())
        .collect();
    let solution = solve_transport(&mu1.weights, &mu2.weights, &cost)?;
    let plan = Coupling { rows: mu1.clone(), cols: mu2.clone(), matrix: solution.plan.clone() };
    Ok(WassersteinResult { p, cost: solution.cost.max(0.0).powf(1.0 / p), plan, solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{GeodesicSpace, SpacePoint};

    #[test]
    fn identical_measures_cost_zero() {
        let space = GeodesicSpace::euclidean(2);
        let mu = DiscreteMeasure::new(
            space,
            vec![vec![0.0, 0.0].into(), vec![1.0, 2.0].into(), vec![-1.0, 0.5].into()],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let w = wasserstein(2.0, &mu, &mu).unwrap();
        assert!(w.cost.abs() < 1e-12);
        for (i, row) in w.plan.matrix.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if i == j {
                    assert!((x - mu.weights[i]).abs() < 1e-15);
                } else {
                    assert_eq!(*x, 0.0);
                }
            }
        }
        assert!(w.plan.validate().valid);
    }

    #[test]
    fn diracs() {
        let s = GeodesicSpace::sphere(2, 1.0);
        let x = SpacePoint::new(vec![1.0, 0.0, 0.0]);
        let y = SpacePoint::new(vec![0.0, 1.0, 0.0]);
        let a = DiscreteMeasure::dirac(s.clone(), x.clone()).unwrap();
        let b = DiscreteMeasure::dirac(s.clone(), y.clone()).unwrap();
        for p in [1.0, 2.0] {
            let w = wasserstein(p, &a, &b).unwrap();
            assert!((w.cost - s.dist(&x, &y)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_mixed_spaces() {
        let a = DiscreteMeasure::dirac(GeodesicSpace::euclidean(1), vec![0.0].into()).unwrap();
        let b = DiscreteMeasure::dirac(GeodesicSpace::euclidean(2), vec![0.0, 0.0].into()).unwrap();
        assert!(matches!(wasserstein(2.0, &a, &b), Err(Error::IncompatibleSpace(_))));
    }

    #[test]
    fn degenerate_problem_is_solved() {
        // many ties in both supply/demand and costs
        let supply = vec![0.25; 4];
        let demand = vec![0.25; 4];
        let cost = vec![vec![1.0; 4]; 4];
        let sol = solve_transport(&supply, &demand, &cost).unwrap();
        assert!((sol.cost - 1.0).abs() < 1e-15);
        assert!(sol.duality_gap.abs() < 1e-14);
    }

    #[test]
    fn small_known_instance() {
        // classic 3x3 example, optimum found by enumeration of the six matchings
        let supply = vec![1.0 / 3.0; 3];
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let sol = solve_transport(&supply, &supply, &cost).unwrap();
        assert!((sol.cost - 5.0 / 3.0).abs() < 1e-14);
        assert!(sol.min_reduced_cost >= -1e-12);
    }
}
