//! Finite Lipschitz extension into a ball of a CAT(κ) space.
//!
//! Known values are copied verbatim. Unknown values start at the barycenter
//! of the known ones and are improved by block-coordinate sweeps: an
//! inverse-distance barycenter of the nearest neighbors, then a per-point
//! weighted minimax step that minimizes the largest ratio
//! d(v, v_j) / d(p_i, p_j) over the ball. A move is kept only when it does
//! not increase the global Lipschitz constant, so the recorded history is
//! nonincreasing.

use serde::{Deserialize, Serialize};

use crate::barycenter::{barycenter, descend, orthogonal_project, ConvexSet, SolverOptions};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::model_space::CurvatureClass;
use crate::space::{GeodesicSpace, SpacePoint};

/// Largest ratio d(v_i, v_j) / d(p_i, p_j) over pairs. Coincident domain
/// points with different values give +∞.
pub fn lipschitz_constant(
    source: &GeodesicSpace,
    points: &[SpacePoint],
    target: &GeodesicSpace,
    values: &[SpacePoint],
) -> Result<f64> {
    if points.len() != values.len() || points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need equally many points and values, at least 2 (got {} and {})",
            points.len(),
            values.len()
        )));
    }
    points.iter().try_for_each(|p| source.check_point(p))?;
    values.iter().try_for_each(|v| target.check_point(v))?;
    Ok(max_ratio(source, points, target, values, None))
}

fn pair_ratio(ds: f64, dt: f64) -> f64 {
    if dt == 0.0 {
        0.0
    } else if ds == 0.0 {
        f64::INFINITY
    } else {
        dt / ds
    }
}

/// Max ratio over all pairs, or over pairs touching `only` when given.
fn max_ratio(
    source: &GeodesicSpace,
    points: &[SpacePoint],
    target: &GeodesicSpace,
    values: &[SpacePoint],
    only: Option<usize>,
) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if only.is_some_and(|k| k != i && k != j) {
                continue;
            }
            best = best.max(pair_ratio(source.dist(&points[i], &points[j]), target.dist(&values[i], &values[j])));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionInstance {
    pub source: GeodesicSpace,
    pub domain_points: Vec<SpacePoint>,
    pub z_indices: Vec<usize>,
    pub target: GeodesicSpace,
    pub center: SpacePoint,
    pub radius: f64,
    /// f_values[k] is the value at domain_points[z_indices[k]].
    pub f_values: Vec<SpacePoint>,
}

impl ExtensionInstance {
    pub fn validate(&self, cc: &CurvatureClass) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInstance(m));
        if !matches!(self.source, GeodesicSpace::Euclidean { .. } | GeodesicSpace::Sphere { .. }) {
            return bad("the domain must be a Euclidean space or a sphere".into());
        }
        self.source.validate()?;
        self.target.validate()?;
        if self.target.curvature_upper_bound() > cc.kappa {
            return bad(format!("target is not CAT({})", cc.kappa));
        }
        let n = self.domain_points.len();
        self.domain_points.iter().try_for_each(|p| self.source.check_point(p))?;
        for i in 0..n {
            for j in i + 1..n {
                if self.source.dist(&self.domain_points[i], &self.domain_points[j]) == 0.0 {
                    return bad(format!("domain points {i} and {j} coincide"));
                }
            }
        }
        if self.z_indices.is_empty() {
            return bad("at least one value must be given".into());
        }
        if self.z_indices.len() != self.f_values.len() {
            return bad("one value per index in z_indices is required".into());
        }
        let mut seen = vec![false; n];
        for &k in &self.z_indices {
            if k >= n || std::mem::replace(&mut seen[k], true) {
                return bad(format!("index {k} out of range or repeated"));
            }
        }
        if let Some(q) = cc.quarter_radius().finite() {
            if self.radius > q * (1.0 + 1e-12) {
                return bad(format!("radius {} exceeds D_(kappa,eps)/4 = {q}", self.radius));
            }
        }
        self.target.check_point(&self.center)?;
        self.target.check_ball_radius(self.radius)?;
        for v in &self.f_values {
            self.target.check_point(v)?;
            if self.target.dist(&self.center, v) > self.radius * (1.0 + 1e-12) {
                return bad("a given value lies outside the ball".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendOptions {
    /// Neighbors used by the barycentric step; default min(4, |S| - 1).
    pub neighbors: Option<usize>,
    /// Neighbor weights are d^(-power).
    pub inverse_power: f64,
    pub max_sweeps: usize,
    /// Stop once a sweep improves the constant by less than this.
    pub improve_tol: f64,
    /// Dual iterations of the minimax step; it also stops once the duality
    /// gap on squared ratios falls below 1e-9 relative.
    pub minimax_iterations: usize,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        Self { neighbors: None, inverse_power: 1.0, max_sweeps: 10_000, improve_tol: 1e-8, minimax_iterations: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionResult {
    pub values: Vec<SpacePoint>,
    pub lip_original: f64,
    pub lip_extended: f64,
    /// lip_extended / lip_original; 1 when both vanish.
    pub ratio: f64,
    pub c_ext: f64,
    pub certified: bool,
    /// Global constant after initialization and after each sweep.
    pub lip_history: Vec<f64>,
}

struct Solver<'a> {
    inst: &'a ExtensionInstance,
    opts: ExtendOptions,
    ball: ConvexSet,
    /// Pairwise source distances.
    ds: Vec<Vec<f64>>,
}

impl Solver<'_> {
    fn global(&self, values: &[SpacePoint]) -> f64 {
        max_ratio(&self.inst.source, &self.inst.domain_points, &self.inst.target, values, None)
    }

    fn local(&self, values: &[SpacePoint], i: usize) -> f64 {
        max_ratio(&self.inst.source, &self.inst.domain_points, &self.inst.target, values, Some(i))
    }

    fn project(&self, x: &SpacePoint) -> Result<SpacePoint> {
        orthogonal_project(&self.inst.target, &self.ball, x)
    }

    /// Minimizer of Σ c_j d(v, q_j)² over the ball, approximately in curved
    /// targets: barycenter followed by projection.
    fn weighted_center(&self, anchors: &[&SpacePoint], c: &[f64], warm: &SpacePoint) -> Result<SpacePoint> {
        let total: f64 = c.iter().sum();
        let (atoms, weights): (Vec<SpacePoint>, Vec<f64>) = anchors
            .iter()
            .zip(c)
            .filter(|(_, w)| **w > 0.0)
            .map(|(a, w)| ((*a).clone(), w / total))
            .unzip();
        let s: f64 = weights.iter().sum();
        let weights = weights.iter().map(|w| w / s).collect();
        let mu = DiscreteMeasure::new(self.inst.target.clone(), atoms, weights)?;
        if mu.atoms.iter().all(|a| a.coords == mu.atoms[0].coords) {
            return Ok(mu.atoms[0].clone());
        }
        let b = match self.inst.target {
            GeodesicSpace::Euclidean { .. } => barycenter(&mu)?.point,
            _ => descend(&mu, warm.clone(), SolverOptions { gradient_tol: 1e-9, max_iterations: 1000 })
                .or_else(|_| barycenter(&mu))?
                .point,
        };
        self.project(&b)
    }

    /// Inverse-distance barycenter of the nearest domain neighbors.
    fn neighbor_step(&self, values: &[SpacePoint], i: usize) -> Result<SpacePoint> {
        let n = values.len();
        let k = self.opts.neighbors.unwrap_or(4).min(n - 1).max(1);
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| self.ds[i][a].total_cmp(&self.ds[i][b]).then(a.cmp(&b)));
        order.truncate(k);
        let anchors: Vec<&SpacePoint> = order.iter().map(|&j| &values[j]).collect();
        let c: Vec<f64> = order.iter().map(|&j| self.ds[i][j].powf(-self.opts.inverse_power)).collect();
        self.weighted_center(&anchors, &c, &values[i])
    }

    /// min over the ball of max_j d(v, v_j) / d(p_i, p_j), via pairwise
    /// Frank-Wolfe on the dual weights λ. With Euclidean targets the inner
    /// problem is exact and the duality gap bounds the error.
    fn minimax_step(&self, values: &[SpacePoint], i: usize) -> Result<SpacePoint> {
        let target = &self.inst.target;
        let others: Vec<usize> = (0..values.len()).filter(|&j| j != i).collect();
        let anchors: Vec<&SpacePoint> = others.iter().map(|&j| &values[j]).collect();
        let a: Vec<f64> = others.iter().map(|&j| self.ds[i][j].powi(-2)).collect();
        let m = anchors.len();
        let flat = matches!(target, GeodesicSpace::Euclidean { .. });
        let iterations = if flat { self.opts.minimax_iterations } else { self.opts.minimax_iterations.min(40) };

        let center_for = |lambda: &[f64], warm: &SpacePoint| -> Result<SpacePoint> {
            let c: Vec<f64> = lambda.iter().zip(&a).map(|(l, w)| l * w).collect();
            self.weighted_center(&anchors, &c, warm)
        };
        let grads = |v: &SpacePoint| -> Vec<f64> {
            anchors.iter().zip(&a).map(|(q, w)| w * target.dist(v, q).powi(2)).collect()
        };
        let dual = |lambda: &[f64], v: &SpacePoint| -> f64 { lambda.iter().zip(grads(v)).map(|(l, g)| l * g).sum() };

        // start from the vertex with the largest weighted distance
        let g0 = grads(&values[i]);
        let start = (0..m).max_by(|&x, &y| g0[x].total_cmp(&g0[y])).unwrap();
        let mut lambda = vec![0.0; m];
        lambda[start] = 1.0;
        let mut v = center_for(&lambda, &values[i])?;
        let mut best = (g0.iter().cloned().fold(0.0, f64::max), values[i].clone());
        for it in 0..iterations {
            let g = grads(&v);
            let primal = g.iter().cloned().fold(0.0, f64::max);
            if primal < best.0 {
                best = (primal, v.clone());
            }
            let gap = primal - dual(&lambda, &v);
            if gap <= 1e-9 * primal.max(1e-300) {
                break;
            }
            let up = (0..m).max_by(|&x, &y| g[x].total_cmp(&g[y])).unwrap();
            if flat {
                let down = (0..m)
                    .filter(|&j| lambda[j] > 0.0 && j != up)
                    .min_by(|&x, &y| g[x].total_cmp(&g[y]));
                let Some(down) = down else { break };
                let gmax = lambda[down];
                let along = |gamma: f64| -> Result<(f64, SpacePoint)> {
                    let mut l = lambda.clone();
                    l[up] += gamma;
                    l[down] -= gamma;
                    let w = center_for(&l, &v)?;
                    Ok((dual(&l, &w), w))
                };
                // the dual is concave along the segment
                let (mut lo, mut hi) = (0.0, gmax);
                for _ in 0..50 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if along(m1)?.0 < along(m2)?.0 {
                        lo = m1;
                    } else {
                        hi = m2;
                    }
                }
                let gamma = if along(gmax)?.0 >= along(0.5 * (lo + hi))?.0 { gmax } else { 0.5 * (lo + hi) };
                lambda[up] += gamma;
                lambda[down] -= gamma;
                if gamma == gmax {
                    lambda[down] = 0.0;
                }
            } else {
                let step = 2.0 / (it as f64 + 2.0);
                lambda.iter_mut().for_each(|l| *l *= 1.0 - step);
                lambda[up] += step;
            }
            v = center_for(&lambda, &v)?;
        }
        let primal = grads(&v).into_iter().fold(0.0, f64::max);
        Ok(if primal < best.0 { v } else { best.1 })
    }
}

/// Extends the partial map and certifies the Lipschitz ratio against C_ε.
pub fn extend(instance: &ExtensionInstance, cc: &CurvatureClass) -> Result<ExtensionResult> {
    extend_with(instance, cc, ExtendOptions::default())
}

pub fn extend_with(instance: &ExtensionInstance, cc: &CurvatureClass, opts: ExtendOptions) -> Result<ExtensionResult> {
    instance.validate(cc)?;
    let src = &instance.source;
    let n = instance.domain_points.len();
    let ds = (0..n)
        .map(|i| (0..n).map(|j| src.dist(&instance.domain_points[i], &instance.domain_points[j])).collect())
        .collect();
    let solver = Solver {
        inst: instance,
        opts,
        ball: ConvexSet::ClosedBall { center: instance.center.clone(), radius: instance.radius },
        ds,
    };

    let known_points: Vec<SpacePoint> = instance.z_indices.iter().map(|&k| instance.domain_points[k].clone()).collect();
    let lip_original = max_ratio(src, &known_points, &instance.target, &instance.f_values, None);

    let start = barycenter(&DiscreteMeasure::uniform(instance.target.clone(), instance.f_values.clone())?)?.point;
    let start = solver.project(&start)?;
    let mut values = vec![start; n];
    let mut known = vec![false; n];
    for (&k, v) in instance.z_indices.iter().zip(&instance.f_values) {
        values[k] = v.clone();
        known[k] = true;
    }
    let unknown: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();

    let mut lip = solver.global(&values);
    let mut history = vec![lip];
    for _ in 0..opts.max_sweeps {
        if unknown.is_empty() {
            break;
        }
        let before = lip;
        for &i in &unknown {
            for minimax in [false, true] {
                let cand = if minimax { solver.minimax_step(&values, i)? } else { solver.neighbor_step(&values, i)? };
                let old = std::mem::replace(&mut values[i], cand);
                let updated = solver.local(&values, i).max(lip_without(&solver, &values, i));
                if updated <= lip {
                    lip = solver.global(&values);
                } else {
                    values[i] = old;
                }
            }
        }
        history.push(lip);
        if before - lip < opts.improve_tol {
            break;
        }
    }

    let ratio = if lip_original > 0.0 {
        lip / lip_original
    } else if lip == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let c_ext = cc.constants().c_ext;
    Ok(ExtensionResult {
        values,
        lip_original,
        lip_extended: lip,
        ratio,
        c_ext,
        certified: ratio <= c_ext,
        lip_history: history,
    })
}

/// Global constant restricted to pairs not touching `i`.
fn lip_without(solver: &Solver<'_>, values: &[SpacePoint], i: usize) -> f64 {
    let inst = solver.inst;
    let mut best: f64 = 0.0;
    for a in 0..values.len() {
        for b in a + 1..values.len() {
            if a != i && b != i {
                best = best.max(pair_ratio(solver.ds[a][b], inst.target.dist(&values[a], &values[b])));
            }
        }
    }
    best
}
