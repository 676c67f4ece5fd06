use rand::Rng;
use serde::{Deserialize, Serialize};

use super::report::CheckReport;
use crate::barycenter::{barycenter, conditional_barycenter, frechet_objective, ConvexSet, Filtration};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::model_space::CurvatureClass;
use crate::rng::flat_dirichlet;
use crate::space::{GeodesicSpace, SpacePoint};
use crate::transport::wasserstein;

const REGIME_SLACK: f64 = 1e-12;

/// The space must be CAT(κ) for the class's κ.
fn check_class(space: &GeodesicSpace, cc: &CurvatureClass) -> Result<()> {
    if space.curvature_upper_bound() > cc.kappa {
        return Err(Error::InvalidParameter(format!(
            "space has curvature up to {} but the class assumes kappa = {}",
            space.curvature_upper_bound(),
            cc.kappa
        )));
    }
    Ok(())
}

/// All pairwise distances among `points` at most D_{κ,ε}/2.
fn check_diameter(space: &GeodesicSpace, cc: &CurvatureClass, points: &[&SpacePoint]) -> Result<()> {
    let Some(limit) = cc.safe_diameter().finite().map(|d| d / 2.0) else { return Ok(()) };
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = space.dist(a, b);
            if d > limit * (1.0 + REGIME_SLACK) {
                return Err(Error::OutOfRegime(format!(
                    "points at distance {d} exceed the diameter budget D_(kappa,eps)/2 = {limit}"
                )));
            }
        }
    }
    Ok(())
}

fn check_in_ball(space: &GeodesicSpace, center: &SpacePoint, radius: f64, points: &[&SpacePoint]) -> Result<()> {
    for p in points {
        space.check_point(p)?;
        let d = space.dist(center, p);
        if d > radius * (1.0 + REGIME_SLACK) + 1e-15 {
            return Err(Error::OutOfRegime(format!("point at distance {d} outside the ball of radius {radius}")));
        }
    }
    Ok(())
}

/// d(z, γ(t))² ≤ (1-t) d(z,x)² + t d(z,y)² - (k/2) t(1-t) d(x,y)².
#[allow(clippy::too_many_arguments)]
pub fn check_uniform_convexity(
    space: &GeodesicSpace,
    cc: &CurvatureClass,
    x: &SpacePoint,
    y: &SpacePoint,
    z: &SpacePoint,
    t: f64,
    tol: f64,
    fingerprint: String,
) -> Result<CheckReport> {
    check_class(space, cc)?;
    for p in [x, y, z] {
        space.check_point(p)?;
    }
    check_diameter(space, cc, &[x, y, z])?;
    let k = cc.constants().k;
    let g = space.geodesic_point(x, y, t)?;
    let lhs = space.dist(z, &g).powi(2);
    let rhs = (1.0 - t) * space.dist(z, x).powi(2) + t * space.dist(z, y).powi(2)
        - 0.5 * k * t * (1.0 - t) * space.dist(x, y).powi(2);
    Ok(CheckReport::new("convexity", lhs, rhs, tol, fingerprint))
}

/// 1 - cos(√κ d) computed as 2 sin²(√κ d / 2).
fn one_minus_cos(kappa: f64, d: f64) -> f64 {
    2.0 * (0.5 * kappa.sqrt() * d).sin().powi(2)
}

/// Φ(x, y) = (1 - cos_κ d(x,y)) / √(cos_κ d(x,o) cos_κ d(y,o) - 1/2).
pub fn kendall_phi(space: &GeodesicSpace, x: &SpacePoint, y: &SpacePoint, o: &SpacePoint, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kendall_phi needs kappa > 0, got {kappa}")));
    }
    for p in [x, y, o] {
        space.check_point(p)?;
    }
    let s = kappa.sqrt();
    let radicand = (s * space.dist(x, o)).cos() * (s * space.dist(y, o)).cos() - 0.5;
    if !(radicand > 0.0) {
        return Err(Error::OutOfRegime(format!("points too far from o (radicand {radicand})")));
    }
    Ok(one_minus_cos(kappa, space.dist(x, y)) / radicand.sqrt())
}

/// Convexity of Φ along the product geodesic u ↦ (λ(u), μ(u)):
/// Φ(λ(u), μ(u)) ≤ (1-a) Φ(λ(s), μ(s)) + a Φ(λ(t), μ(t)) with u = (1-a)s + a t.
#[allow(clippy::too_many_arguments)]
pub fn check_phi_convexity(
    space: &GeodesicSpace,
    kappa: f64,
    o: &SpacePoint,
    r: f64,
    lambda: (&SpacePoint, &SpacePoint),
    mu: (&SpacePoint, &SpacePoint),
    s: f64,
    t: f64,
    a: f64,
    tol: f64,
    fingerprint: String,
) -> Result<CheckReport> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter("Phi convexity needs kappa > 0".into()));
    }
    if space.curvature_upper_bound() > kappa {
        return Err(Error::InvalidParameter("space is not CAT(kappa) for this kappa".into()));
    }
    let quarter = std::f64::consts::PI / kappa.sqrt() / 4.0;
    if !(r < quarter) {
        return Err(Error::OutOfRegime(format!("Phi needs r < D_kappa/4 = {quarter}, got {r}")));
    }
    for v in [s, t, a] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("parameter {v} outside [0, 1]")));
        }
    }
    // the ball is convex, so geodesics between its points stay inside
    check_in_ball(space, o, r, &[lambda.0, lambda.1, mu.0, mu.1])?;
    let at = |u: f64| -> Result<f64> {
        let p = space.geodesic_point(lambda.0, lambda.1, u)?;
        let q = space.geodesic_point(mu.0, mu.1, u)?;
        kendall_phi(space, &p, &q, o, kappa)
    };
    let u = (1.0 - a) * s + a * t;
    let lhs = at(u)?;
    let rhs = (1.0 - a) * at(s)? + a * at(t)?;
    Ok(CheckReport::new("phi", lhs, rhs, tol, fingerprint))
}

/// Four geodesics on the unit sphere S² ⊂ R³ through two base points:
/// λ̄, λ̲ start at `x` with velocities of equal length, μ̄, μ̲ at `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicQuadruple {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub lambda_upper: [f64; 3],
    pub lambda_lower: [f64; 3],
    pub mu_upper: [f64; 3],
    pub mu_lower: [f64; 3],
}

fn great_circle(base: &[f64; 3], vel: &[f64; 3], t: f64) -> [f64; 3] {
    let n = (vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]).sqrt();
    if n == 0.0 {
        return *base;
    }
    let (s, c) = (n * t).sin_cos();
    [0, 1, 2].map(|i| c * base[i] + s * vel[i] / n)
}

pub const SPCALC_STEP: f64 = 1e-4;

/// Second central difference at t = 0 of
/// Ψ(t) = |λ̄(t) - μ̄(t)|² / (2 (λ̲₁(t) μ̲₁(t) - h̃²)^{1/p}), p = 1/(1 - h̃²), c = 1.
pub fn spcalc_second_difference(h: f64, h_tilde: f64, quad: &GeodesicQuadruple, step: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter(format!("h must lie in (0, 1), got {h}")));
    }
    if !(h_tilde > 0.0 && h_tilde < h) {
        return Err(Error::InvalidParameter(format!("h_tilde must lie in (0, h), got {h_tilde}")));
    }
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let norm = |a: &[f64; 3]| dot(a, a).sqrt();
    for (base, vels) in [(&quad.x, [&quad.lambda_upper, &quad.lambda_lower]), (&quad.y, [&quad.mu_upper, &quad.mu_lower])] {
        if (norm(base) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInstance("base point is not on the unit sphere".into()));
        }
        if vels.iter().any(|v| dot(base, v).abs() > 1e-12 * norm(v).max(1.0)) {
            return Err(Error::InvalidInstance("velocity is not tangent".into()));
        }
        if (norm(vels[0]) - norm(vels[1])).abs() > 1e-12 * norm(vels[0]).max(1.0) {
            return Err(Error::InvalidInstance("paired geodesics must have equal speed".into()));
        }
    }
    let p = 1.0 / (1.0 - h_tilde * h_tilde);
    let psi = |t: f64| -> Result<f64> {
        let lu = great_circle(&quad.x, &quad.lambda_upper, t);
        let ll = great_circle(&quad.x, &quad.lambda_lower, t);
        let mu = great_circle(&quad.y, &quad.mu_upper, t);
        let ml = great_circle(&quad.y, &quad.mu_lower, t);
        if [lu[0], ll[0], mu[0], ml[0]].iter().any(|c| !(*c > h)) {
            return Err(Error::OutOfRegime(format!("geodesic leaves the cap x1 > {h}")));
        }
        let num: f64 = (0..3).map(|i| (lu[i] - mu[i]).powi(2)).sum();
        let den = 2.0 * (ll[0] * ml[0] - h_tilde * h_tilde).powf(1.0 / p);
        Ok(num / den)
    };
    Ok((psi(step)? - 2.0 * psi(0.0)? + psi(-step)?) / (step * step))
}

pub fn check_spcalc_psi(h: f64, h_tilde: f64, quad: &GeodesicQuadruple, tol: f64, fingerprint: String) -> Result<CheckReport> {
    let second = spcalc_second_difference(h, h_tilde, quad, SPCALC_STEP)?;
    Ok(CheckReport::new("spcalc", 0.0, second, tol, fingerprint))
}

/// Which region hypothesis the variance inequality is checked under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VarianceRegime {
    /// supp(μ) ∪ {z} has diameter at most D_{κ,ε}/2, z arbitrary.
    #[default]
    Diameter,
    /// supp(μ) lies in the ball of radius D_{κ,ε}/2 around z.
    CenteredBall,
}

/// d(z, B(μ))² + (k/2) ∫ d(B(μ), x)² dμ ≤ ∫ d(z, x)² dμ.
pub fn check_variance(
    cc: &CurvatureClass,
    mu: &DiscreteMeasure,
    z: &SpacePoint,
    regime: VarianceRegime,
    tol: f64,
    fingerprint: String,
) -> Result<CheckReport> {
    let space = &mu.space;
    check_class(space, cc)?;
    space.check_point(z)?;
    match regime {
        VarianceRegime::Diameter => {
            let mut pts: Vec<&SpacePoint> = mu.atoms.iter().collect();
            pts.push(z);
            check_diameter(space, cc, &pts)?;
        }
        VarianceRegime::CenteredBall => {
            if let Some(d) = cc.safe_diameter().finite() {
                let pts: Vec<&SpacePoint> = mu.atoms.iter().collect();
                check_in_ball(space, z, d / 2.0, &pts)?;
            }
        }
    }
    let k = cc.constants().k;
    let b = barycenter(mu)?;
    let lhs = space.dist(z, &b.point).powi(2) + 0.5 * k * b.objective;
    let rhs = frechet_objective(z, mu)?;
    Ok(CheckReport::new("variance", lhs, rhs, tol, fingerprint))
}

/// Convex test functions admitted by the Jensen check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// z ↦ d(anchor, z)².
    SquaredDistance { anchor: SpacePoint },
    /// z ↦ d(z, C).
    DistanceToSet { set: ConvexSet },
    /// z ↦ ⟨gradient, z⟩ + offset on a Euclidean space.
    Affine { gradient: Vec<f64>, offset: f64 },
}

fn distance_is_convex(space: &GeodesicSpace, set: &ConvexSet) -> bool {
    match set {
        // d(·, c) - ρ is convex within distance π/(2√κ) of c
        ConvexSet::ClosedBall { .. } => true,
        ConvexSet::GeodesicSegment { .. } => space.curvature_upper_bound() <= 0.0,
        ConvexSet::ProductOfFactors { factors } => {
            let spaces = space.factors();
            spaces.len() == factors.len()
                && spaces.iter().zip(factors).all(|(s, c)| distance_is_convex(s, c))
        }
    }
}

impl TestFunction {
    /// Rejects functions whose convexity is not known on `space`.
    pub fn certify(&self, space: &GeodesicSpace) -> Result<()> {
        match self {
            TestFunction::SquaredDistance { anchor } => space.check_point(anchor),
            TestFunction::DistanceToSet { set } => {
                if distance_is_convex(space, set) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "distance to a geodesic segment is not convex under positive curvature".into(),
                    ))
                }
            }
            TestFunction::Affine { gradient, .. } => match space {
                GeodesicSpace::Euclidean { dim } if gradient.len() == *dim => Ok(()),
                _ => Err(Error::InvalidParameter(
                    "affine test functions are only registered on Euclidean spaces".into(),
                )),
            },
        }
    }

    pub fn evaluate(&self, space: &GeodesicSpace, z: &SpacePoint) -> Result<f64> {
        match self {
            TestFunction::SquaredDistance { anchor } => Ok(space.distance(anchor, z)?.powi(2)),
            TestFunction::DistanceToSet { set } => set.distance_to(space, z),
            TestFunction::Affine { gradient, offset } => {
                Ok(gradient.iter().zip(&z.coords).map(|(a, b)| a * b).sum::<f64>() + offset)
            }
        }
    }
}

/// φ(B(μ)) ≤ ∫ φ dμ.
pub fn check_jensen(
    cc: &CurvatureClass,
    mu: &DiscreteMeasure,
    phi: &TestFunction,
    tol: f64,
    fingerprint: String,
) -> Result<CheckReport> {
    let space = &mu.space;
    check_class(space, cc)?;
    phi.certify(space)?;
    let mut pts: Vec<&SpacePoint> = mu.atoms.iter().collect();
    if let TestFunction::SquaredDistance { anchor } = phi {
        pts.push(anchor);
    }
    check_diameter(space, cc, &pts)?;
    let b = barycenter(mu)?;
    let lhs = phi.evaluate(space, &b.point)?;
    let mut rhs = 0.0;
    for (x, w) in mu.iter() {
        rhs += w * phi.evaluate(space, x)?;
    }
    Ok(CheckReport::new("jensen", lhs, rhs, tol, fingerprint))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzOutcome {
    pub report: CheckReport,
    pub w2: f64,
    /// d(B(μ₁), B(μ₂)) / W₂(μ₁, μ₂), None when W₂ = 0.
    pub ratio: Option<f64>,
}

/// d(B(μ₁), B(μ₂)) ≤ Γ_ε W₂(μ₁, μ₂) for κ > 0, ≤ W₁(μ₁, μ₂) for κ ≤ 0.
#[allow(clippy::too_many_arguments)]
pub fn check_barycenter_lipschitz(
    cc: &CurvatureClass,
    center: &SpacePoint,
    radius: f64,
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    tol: f64,
    fingerprint: String,
) -> Result<LipschitzOutcome> {
    let space = &mu1.space;
    if mu2.space != *space {
        return Err(Error::IncompatibleSpace("measures live in different spaces".into()));
    }
    check_class(space, cc)?;
    if let Some(q) = cc.quarter_radius().finite() {
        if radius > q * (1.0 + REGIME_SLACK) {
            return Err(Error::OutOfRegime(format!("radius {radius} exceeds D_(kappa,eps)/4 = {q}")));
        }
    }
    let pts: Vec<&SpacePoint> = mu1.atoms.iter().chain(&mu2.atoms).collect();
    check_in_ball(space, center, radius, &pts)?;
    let b1 = barycenter(mu1)?.point;
    let b2 = barycenter(mu2)?.point;
    let lhs = space.dist(&b1, &b2);
    let w2 = wasserstein(2.0, mu1, mu2)?.cost;
    let rhs = if cc.kappa > 0.0 { cc.constants().gamma * w2 } else { wasserstein(1.0, mu1, mu2)?.cost };
    let ratio = (w2 > 0.0).then(|| lhs / w2);
    Ok(LipschitzOutcome { report: CheckReport::new("lipschitz", lhs, rhs, tol, fingerprint), w2, ratio })
}

/// A barycentric martingale Z₀, …, Z_n on a finite filtered probability space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleInstance {
    pub space: GeodesicSpace,
    pub filtration: Filtration,
    /// maps[i][ω] = Z_i(ω).
    pub maps: Vec<Vec<SpacePoint>>,
    pub center: SpacePoint,
    pub radius: f64,
}

pub const MARTINGALE_TOL: f64 = 1e-8;

/// Random nested partitions: level 0 is {Ω}; each later level splits every
/// atom with at least two points into two nonempty parts with probability 0.7.
pub fn random_filtration<R: Rng + ?Sized>(rng: &mut R, omega: usize, steps: usize) -> Filtration {
    let mut levels = vec![vec![0usize; omega]];
    for _ in 0..steps {
        let prev = levels.last().unwrap().clone();
        let mut next = vec![0usize; omega];
        let mut label = 0;
        let atoms = prev.iter().copied().max().map_or(0, |m| m + 1);
        for atom in 0..atoms {
            let members: Vec<usize> = (0..omega).filter(|&w| prev[w] == atom).collect();
            if members.is_empty() {
                continue;
            }
            if members.len() >= 2 && rng.random::<f64>() < 0.7 {
                // random nonempty proper subset
                let mut side: Vec<bool> = members.iter().map(|_| rng.random()).collect();
                if side.iter().all(|s| *s) || side.iter().all(|s| !*s) {
                    side[0] = !side[0];
                }
                for (w, s) in members.iter().zip(&side) {
                    next[*w] = label + usize::from(*s);
                }
                label += 2;
            } else {
                for w in members {
                    next[w] = label;
                }
                label += 1;
            }
        }
        levels.push(next);
    }
    let base_measure = flat_dirichlet(rng, omega);
    Filtration { levels, base_measure }
}

impl MartingaleInstance {
    /// Draws Z_n in the ball and sets Z_{i-1} = B_μ(Z_i | F_{i-1}).
    pub fn generate<R: Rng + ?Sized>(
        rng: &mut R,
        space: &GeodesicSpace,
        center: &SpacePoint,
        radius: f64,
        omega: usize,
        steps: usize,
    ) -> Result<Self> {
        let filtration = random_filtration(rng, omega, steps);
        let last: Vec<SpacePoint> = (0..omega).map(|_| space.sample_ball_point(center, radius, rng)).collect();
        let mut maps = vec![last];
        for level in (0..steps).rev() {
            let prev = conditional_barycenter(space, maps.last().unwrap(), &filtration, level)?;
            maps.push(prev);
        }
        maps.reverse();
        Ok(Self { space: space.clone(), filtration, maps, center: center.clone(), radius })
    }

    pub fn steps(&self) -> usize {
        self.maps.len().saturating_sub(1)
    }

    /// Images inside the ball and B_μ(Z_i | F_{i-1}) = Z_{i-1} within 1e-8.
    pub fn validate(&self) -> Result<()> {
        self.filtration.validate()?;
        if self.maps.len() != self.filtration.levels.len() || self.maps.is_empty() {
            return Err(Error::InvalidInstance("one map per filtration level is required".into()));
        }
        for m in &self.maps {
            if m.len() != self.filtration.ground_size() {
                return Err(Error::InvalidInstance("map size differs from the ground set".into()));
            }
            let pts: Vec<&SpacePoint> = m.iter().collect();
            check_in_ball(&self.space, &self.center, self.radius, &pts)
                .map_err(|e| Error::InvalidInstance(e.to_string()))?;
        }
        for i in 1..self.maps.len() {
            let cond = conditional_barycenter(&self.space, &self.maps[i], &self.filtration, i - 1)?;
            for (a, b) in cond.iter().zip(&self.maps[i - 1]) {
                let d = self.space.dist(a, b);
                if d > MARTINGALE_TOL {
                    return Err(Error::InvalidInstance(format!(
                        "martingale property fails at level {i} by {d:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// (k/2) Σ ∫ d(Z_i, Z_{i-1})² dμ ≤ ∫ d(Z_n, z)² dμ - ∫ d(Z_0, z)² dμ.
pub fn check_pisier(
    cc: &CurvatureClass,
    instance: &MartingaleInstance,
    z: &SpacePoint,
    tol: f64,
    fingerprint: String,
) -> Result<CheckReport> {
    let space = &instance.space;
    check_class(space, cc)?;
    if let Some(q) = cc.quarter_radius().finite() {
        if instance.radius > q * (1.0 + REGIME_SLACK) {
            return Err(Error::OutOfRegime(format!(
                "martingale ball radius {} exceeds D_(kappa,eps)/4 = {q}",
                instance.radius
            )));
        }
    }
    instance.validate()?;
    check_in_ball(space, &instance.center, instance.radius, &[z])?;
    let k = cc.constants().k;
    let w = &instance.filtration.base_measure;
    let integral = |f: &dyn Fn(usize) -> f64| -> f64 { w.iter().enumerate().map(|(o, m)| m * f(o)).sum() };
    let mut square_fn = 0.0;
    for i in 1..instance.maps.len() {
        square_fn += integral(&|o| space.dist(&instance.maps[i][o], &instance.maps[i - 1][o]).powi(2));
    }
    let n = instance.maps.len() - 1;
    let lhs = 0.5 * k * square_fn;
    let rhs = integral(&|o| space.dist(&instance.maps[n][o], z).powi(2))
        - integral(&|o| space.dist(&instance.maps[0][o], z).powi(2));
    Ok(CheckReport::new("pisier", lhs, rhs, tol, fingerprint))
}

/// Random measure with `n` atoms in the ball and flat Dirichlet weights.
pub fn random_measure<R: Rng + ?Sized>(
    rng: &mut R,
    space: &GeodesicSpace,
    center: &SpacePoint,
    radius: f64,
    n: usize,
) -> Result<DiscreteMeasure> {
    let atoms = (0..n).map(|_| space.sample_ball_point(center, radius, rng)).collect();
    let mut weights = flat_dirichlet(rng, n);
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DiscreteMeasure::new(space.clone(), atoms, weights)
}
