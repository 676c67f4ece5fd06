//! Fréchet barycenters, orthogonal projections onto convex sets and
//! conditional barycenters along finite filtrations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::space::{GeodesicSpace, SpacePoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub gradient_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gradient_tol: 1e-10, max_iterations: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarycenterResult {
    pub point: SpacePoint,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// z ↦ Σ wᵢ d(z, xᵢ)².
pub fn frechet_objective(z: &SpacePoint, mu: &DiscreteMeasure) -> Result<f64> {
    mu.space.check_point(z)?;
    Ok(objective(&mu.space, z, mu))
}

fn objective(space: &GeodesicSpace, z: &SpacePoint, mu: &DiscreteMeasure) -> f64 {
    mu.iter().map(|(x, w)| w * space.dist(z, x).powi(2)).sum()
}

/// Riemannian gradient of the Fréchet objective: -2 Σ wᵢ log_z(xᵢ).
pub fn frechet_gradient(z: &SpacePoint, mu: &DiscreteMeasure) -> Vec<f64> {
    let space = &mu.space;
    let mut g = vec![0.0; z.coords.len()];
    for (x, w) in mu.iter() {
        if w == 0.0 {
            continue;
        }
        let v = space.log(z, x);
        for (gi, vi) in g.iter_mut().zip(&v) {
            *gi -= 2.0 * w * vi;
        }
    }
    g
}

/// Checks that the support lies in a ball of radius < D_κ / 2 centered at
/// one of its atoms; for products each marginal is checked on its factor.
pub fn check_support_regime(mu: &DiscreteMeasure) -> Result<()> {
    for (factor, marginal) in mu.space.factors().into_iter().zip(mu.marginals()) {
        let Some(d) = factor.diameter_bound().finite() else { continue };
        let limit = d / 2.0;
        let ok = marginal.atoms.iter().any(|c| {
            marginal.atoms.iter().all(|x| factor.dist(c, x) < limit)
        });
        if !ok {
            return Err(Error::OutOfRegime(format!(
                "support does not fit in a ball of radius < D_kappa/2 = {limit}"
            )));
        }
    }
    Ok(())
}

fn extrinsic_mean(mu: &DiscreteMeasure) -> Result<SpacePoint> {
    let mut m = vec![0.0; mu.space.coord_len()];
    for (x, w) in mu.iter() {
        for (mi, xi) in m.iter_mut().zip(&x.coords) {
            *mi += w * xi;
        }
    }
    mu.space.reproject(&m)
}

/// Unique minimizer of the Fréchet objective.
pub fn barycenter(mu: &DiscreteMeasure) -> Result<BarycenterResult> {
    barycenter_with(mu, SolverOptions::default())
}

pub fn barycenter_with(mu: &DiscreteMeasure, opts: SolverOptions) -> Result<BarycenterResult> {
    mu.validate()?;
    check_support_regime(mu)?;
    if mu.atoms.iter().all(|a| a.coords == mu.atoms[0].coords) {
        // a Dirac mass, returned bit for bit
        let point = mu.atoms[0].clone();
        return Ok(BarycenterResult { point, objective: 0.0, gradient_norm: 0.0, iterations: 0 });
    }
    let start = extrinsic_mean(mu)?;
    if let GeodesicSpace::Euclidean { .. } = mu.space {
        let gradient_norm = mu.space.tangent_norm(&frechet_gradient(&start, mu));
        return Ok(BarycenterResult {
            objective: objective(&mu.space, &start, mu),
            point: start,
            gradient_norm,
            iterations: 0,
        });
    }
    descend(mu, start, opts)
}

/// Barycenter starting from a caller supplied point (no regime check).
pub(crate) fn descend(mu: &DiscreteMeasure, start: SpacePoint, opts: SolverOptions) -> Result<BarycenterResult> {
    let space = &mu.space;
    let mut z = start;
    let mut f = objective(space, &z, mu);
    let mut g = frechet_gradient(&z, mu);
    let mut gn = space.tangent_norm(&g);
    let mut iterations = 0;
    let mut stalls = 0;
    while gn > opts.gradient_tol {
        if iterations >= opts.max_iterations {
            return Err(Error::SolverFailure { iterations, gradient_norm: gn });
        }
        iterations += 1;
        // Armijo backtracking from the flat Newton step 1/2
        let mut alpha = 0.5;
        let slack = 8.0 * f64::EPSILON * f.max(1e-300);
        let mut accepted = None;
        for _ in 0..60 {
            let step: Vec<f64> = g.iter().map(|c| -alpha * c).collect();
            let cand = space.exp(&z, &step);
            let fc = objective(space, &cand, mu);
            if fc <= f - 1e-4 * alpha * gn * gn + slack {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            return Err(Error::SolverFailure { iterations, gradient_norm: gn });
        };
        let g_new = frechet_gradient(&cand, mu);
        let gn_new = space.tangent_norm(&g_new);
        // the objective is at roundoff level; stop once the gradient stops shrinking
        if gn_new >= gn {
            stalls += 1;
            if stalls > 50 {
                return Err(Error::SolverFailure { iterations, gradient_norm: gn });
            }
        } else {
            stalls = 0;
        }
        z = cand;
        f = fc;
        g = g_new;
        gn = gn_new;
    }
    Ok(BarycenterResult { point: z, objective: f, gradient_norm: gn, iterations })
}

/// Closed convex sets whose convexity is guaranteed in the small-ball regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    GeodesicSegment { a: SpacePoint, b: SpacePoint },
    ClosedBall { center: SpacePoint, radius: f64 },
    /// One convex set per factor of a product space.
    ProductOfFactors { factors: Vec<ConvexSet> },
}

impl ConvexSet {
    pub fn contains(&self, space: &GeodesicSpace, x: &SpacePoint, tol: f64) -> Result<bool> {
        Ok(space.distance(x, &orthogonal_project(space, self, x)?)? <= tol)
    }

    /// d(x, C).
    pub fn distance_to(&self, space: &GeodesicSpace, x: &SpacePoint) -> Result<f64> {
        let p = orthogonal_project(space, self, x)?;
        space.distance(x, &p)
    }
}

/// The nearest point of `set` to `x`.
pub fn orthogonal_project(space: &GeodesicSpace, set: &ConvexSet, x: &SpacePoint) -> Result<SpacePoint> {
    space.check_point(x)?;
    match set {
        ConvexSet::ClosedBall { center, radius } => {
            let d = space.distance(center, x)?;
            if d <= *radius {
                return Ok(x.clone());
            }
            space.geodesic_point(center, x, radius / d)
        }
        ConvexSet::GeodesicSegment { a, b } => project_on_segment(space, a, b, x),
        ConvexSet::ProductOfFactors { factors } => {
            let spaces = space.factors();
            if !matches!(space, GeodesicSpace::Product { .. }) || spaces.len() != factors.len() {
                return Err(Error::IncompatibleSpace(
                    "product convex set needs a product space with matching factors".into(),
                ));
            }
            let parts = space.split(x);
            let projected = spaces
                .iter()
                .zip(factors)
                .zip(&parts)
                .map(|((s, c), p)| orthogonal_project(s, c, p))
                .collect::<Result<Vec<_>>>()?;
            Ok(GeodesicSpace::join(&projected))
        }
    }
}

fn project_on_segment(space: &GeodesicSpace, a: &SpacePoint, b: &SpacePoint, x: &SpacePoint) -> Result<SpacePoint> {
    let len = space.distance(a, b)?;
    space.geodesic_point(a, b, 0.5)?;
    if len == 0.0 {
        return Ok(a.clone());
    }
    // derivative sign of t ↦ d(x, γ(t))²/2 is -⟨log_γ(t) x, γ'(t)⟩
    let slope = |t: f64| -> f64 {
        let p = space.geodesic_unchecked(a, b, t);
        let to_x = space.log(&p, x);
        let mut vel = space.log(&p, b);
        let back = space.log(&p, a);
        for (v, w) in vel.iter_mut().zip(&back) {
            *v -= w;
        }
        -space.inner(&to_x, &vel)
    };
    if slope(0.0) >= 0.0 {
        return Ok(a.clone());
    }
    if slope(1.0) <= 0.0 {
        return Ok(b.clone());
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(space.geodesic_unchecked(a, b, 0.5 * (lo + hi)))
}

/// Nested partitions F₀ ⊆ F₁ ⊆ … ⊆ F_n of Ω = {0, …, N-1} and a full-support measure.
///
/// `levels[i][ω]` is the label of the F_i atom containing ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filtration {
    pub levels: Vec<Vec<usize>>,
    pub base_measure: Vec<f64>,
}

impl Filtration {
    pub fn new(levels: Vec<Vec<usize>>, base_measure: Vec<f64>) -> Result<Self> {
        let f = Self { levels, base_measure };
        f.validate()?;
        Ok(f)
    }

    pub fn ground_size(&self) -> usize {
        self.base_measure.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ground_size();
        if n == 0 {
            return Err(Error::InvalidInstance("empty ground set".into()));
        }
        if self.base_measure.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInstance("base measure must have full support".into()));
        }
        let total: f64 = self.base_measure.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInstance(format!("base measure sums to {total}")));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| l.len() != n) {
            return Err(Error::InvalidInstance("every level must label each point of the ground set".into()));
        }
        for w in self.levels.windows(2) {
            let (coarse, fine) = (&w[0], &w[1]);
            for a in 0..n {
                for b in 0..n {
                    if fine[a] == fine[b] && coarse[a] != coarse[b] {
                        return Err(Error::InvalidInstance(format!(
                            "level is not a refinement: {a} and {b} share a fine atom but not a coarse one"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Indices of the atom of `level` containing ω.
    pub fn atom(&self, level: usize, omega: usize) -> Vec<usize> {
        let labels = &self.levels[level];
        (0..self.ground_size()).filter(|&a| labels[a] == labels[omega]).collect()
    }
}

/// B_μ(Z | F_level): on each atom, the barycenter of the normalized
/// restriction of μ pushed forward by Z.
pub fn conditional_barycenter(
    space: &GeodesicSpace,
    zmap: &[SpacePoint],
    filtration: &Filtration,
    level: usize,
) -> Result<Vec<SpacePoint>> {
    if zmap.len() != filtration.ground_size() {
        return Err(Error::InvalidInstance(format!(
            "map has {} values on a ground set of size {}",
            zmap.len(),
            filtration.ground_size()
        )));
    }
    if level >= filtration.levels.len() {
        return Err(Error::InvalidInstance(format!("no level {level} in the filtration")));
    }
    let mut out: Vec<Option<SpacePoint>> = vec![None; zmap.len()];
    for omega in 0..zmap.len() {
        if out[omega].is_some() {
            continue;
        }
        let atom = filtration.atom(level, omega);
        let mass: f64 = atom.iter().map(|&a| filtration.base_measure[a]).sum();
        let atoms: Vec<SpacePoint> = atom.iter().map(|&a| zmap[a].clone()).collect();
        let mut weights: Vec<f64> = atom.iter().map(|&a| filtration.base_measure[a] / mass).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mu = DiscreteMeasure::new(space.clone(), atoms, weights)?.merged();
        let b = if mu.len() == 1 { mu.atoms[0].clone() } else { barycenter(&mu)?.point };
        for a in atom {
            out[a] = Some(b.clone());
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every point lies in an atom")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn r2() -> GeodesicSpace {
        GeodesicSpace::euclidean(2)
    }

    #[test]
    fn objective_examples() {
        let line = GeodesicSpace::euclidean(1);
        let x = SpacePoint::new(vec![3.0]);
        let dirac = DiscreteMeasure::dirac(line.clone(), x.clone()).unwrap();
        assert_eq!(frechet_objective(&x, &dirac).unwrap(), 0.0);
        let mu = DiscreteMeasure::uniform(line, vec![vec![0.0].into(), vec![2.0].into()]).unwrap();
        assert_relative_eq!(frechet_objective(&vec![1.0].into(), &mu).unwrap(), 1.0);

        let s = GeodesicSpace::sphere(2, 1.0);
        let mu = DiscreteMeasure::uniform(s.clone(), vec![vec![1.0, 0.0, 0.0].into(), vec![0.0, 1.0, 0.0].into()])
            .unwrap();
        let h = 0.5f64.sqrt();
        let mid = SpacePoint::new(vec![h, h, 0.0]);
        assert_relative_eq!(frechet_objective(&mid, &mu).unwrap(), PI * PI / 16.0, epsilon = 1e-14);
        assert!(frechet_objective(&vec![1.0, 0.0].into(), &mu).is_err());
    }

    #[test]
    fn euclidean_closed_form() {
        let mu = DiscreteMeasure::uniform(r2(), vec![vec![0.0, 0.0].into(), vec![2.0, 0.0].into()]).unwrap();
        let b = barycenter(&mu).unwrap();
        assert_eq!(b.point.coords, vec![1.0, 0.0]);
        assert_eq!(b.iterations, 0);
        assert!(b.gradient_norm <= 1e-10);
    }

    #[test]
    fn sphere_two_points_midpoint() {
        let s = GeodesicSpace::sphere(2, 1.0);
        let x = SpacePoint::new(vec![1.0, 0.0, 0.0]);
        let y = SpacePoint::new(vec![0.6, 0.8, 0.0]);
        let mu = DiscreteMeasure::uniform(s.clone(), vec![x.clone(), y.clone()]).unwrap();
        let b = barycenter(&mu).unwrap();
        let mid = s.geodesic_point(&x, &y, 0.5).unwrap();
        assert!(s.dist(&b.point, &mid) < 1e-12);
        assert!(b.gradient_norm <= 1e-10);
    }

    #[test]
    fn out_of_regime_rejected() {
        let s = GeodesicSpace::sphere(2, 1.0);
        let mu = DiscreteMeasure::uniform(
            s,
            vec![vec![1.0, 0.0, 0.0].into(), vec![0.0, 1.0, 0.0].into(), vec![-1.0, 0.0, 0.0].into()],
        )
        .unwrap();
        assert!(matches!(barycenter(&mu), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn projection_examples() {
        let space = r2();
        let seg = ConvexSet::GeodesicSegment { a: vec![0.0, 0.0].into(), b: vec![2.0, 0.0].into() };
        let p = orthogonal_project(&space, &seg, &vec![1.0, 5.0].into()).unwrap();
        assert!((p.coords[0] - 1.0).abs() < 1e-12 && p.coords[1].abs() < 1e-12);
        let inside = SpacePoint::new(vec![0.5, 0.0]);
        assert_eq!(orthogonal_project(&space, &seg, &inside).unwrap().coords[1], 0.0);
        let ball = ConvexSet::ClosedBall { center: vec![0.0, 0.0].into(), radius: 1.0 };
        assert_eq!(orthogonal_project(&space, &ball, &vec![2.0, 0.0].into()).unwrap().coords, vec![1.0, 0.0]);
        assert_eq!(orthogonal_project(&space, &ball, &inside).unwrap(), inside);
        let prod = ConvexSet::ProductOfFactors { factors: vec![ball] };
        assert!(matches!(
            orthogonal_project(&space, &prod, &inside),
            Err(Error::IncompatibleSpace(_))
        ));
    }

    #[test]
    fn conditional_barycenter_examples() {
        let space = r2();
        let z: Vec<SpacePoint> = [[0.0, 0.0], [2.0, 0.0], [0.0, 4.0], [2.0, 4.0]]
            .iter()
            .map(|c| SpacePoint::new(c.to_vec()))
            .collect();
        let f = Filtration::new(
            vec![vec![0, 0, 0, 0], vec![0, 0, 1, 1], vec![0, 1, 2, 3]],
            vec![0.25; 4],
        )
        .unwrap();
        assert_eq!(conditional_barycenter(&space, &z, &f, 2).unwrap(), z);
        let top = conditional_barycenter(&space, &z, &f, 0).unwrap();
        assert!(top.iter().all(|p| p.coords == vec![1.0, 2.0]));
        let mid = conditional_barycenter(&space, &z, &f, 1).unwrap();
        assert_eq!(mid[0].coords, vec![1.0, 0.0]);
        assert_eq!(mid[1].coords, vec![1.0, 0.0]);
        assert_eq!(mid[2].coords, vec![1.0, 4.0]);
        assert_eq!(mid[3].coords, vec![1.0, 4.0]);
    }

    #[test]
    fn filtration_must_refine() {
        let bad = Filtration::new(vec![vec![0, 0, 1, 1], vec![0, 1, 1, 2]], vec![0.25; 4]);
        assert!(matches!(bad, Err(Error::InvalidInstance(_))));
        let no_support = Filtration::new(vec![vec![0, 0]], vec![1.0, 0.0]);
        assert!(no_support.is_err());
    }
}
