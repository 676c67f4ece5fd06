//! Reversible Markov chains, Markov type 2 ratios and metric Markov
//! cotype 2 witnesses.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::barycenter::barycenter;
use crate::error::{Error, Result};
use crate::lab::CheckReport;
use crate::measure::DiscreteMeasure;
use crate::model_space::CurvatureClass;
use crate::space::{GeodesicSpace, SpacePoint};

pub type Matrix = Vec<Vec<f64>>;

pub const CHAIN_TOL: f64 = 1e-12;

/// Stochastic matrix `a` reversible relative to the probability vector `pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReversibleChain {
    pub pi: Vec<f64>,
    pub a: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    pub valid: bool,
    pub worst_row_sum: f64,
    pub min_entry: f64,
    /// max |π_i a_ij - π_j a_ji| and where it occurs.
    pub worst_reversibility: (usize, usize, f64),
    pub message: String,
}

impl ReversibleChain {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// A = D⁻¹S for a random symmetric nonnegative S; π ∝ row sums of S.
    /// About a third of the off-diagonal entries are zeroed to get sparse
    /// chains; the diagonal is kept positive so no row vanishes.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let mut s = vec![vec![0.0; n]; n];
        for i in 0..n {
            s[i][i] = rng.random::<f64>() * 0.5 + 0.01;
            for j in (i + 1)..n {
                let w = if rng.random::<f64>() < 0.33 { 0.0 } else { rng.random::<f64>() };
                s[i][j] = w;
                s[j][i] = w;
            }
        }
        from_symmetric(&s)
    }
}

fn from_symmetric(s: &Matrix) -> ReversibleChain {
    let rows: Vec<f64> = s.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = rows.iter().sum();
    let pi = rows.iter().map(|r| r / total).collect();
    let a = s.iter().zip(&rows).map(|(r, t)| r.iter().map(|x| x / t).collect()).collect();
    ReversibleChain { pi, a }
}

pub fn validate_chain(chain: &ReversibleChain) -> ChainDiagnostics {
    let n = chain.pi.len();
    let shape_ok = n > 0 && chain.a.len() == n && chain.a.iter().all(|r| r.len() == n);
    if !shape_ok {
        return ChainDiagnostics {
            valid: false,
            worst_row_sum: f64::NAN,
            min_entry: f64::NAN,
            worst_reversibility: (0, 0, f64::NAN),
            message: "pi and a have inconsistent shapes".into(),
        };
    }
    let pi_sum: f64 = chain.pi.iter().sum();
    let pi_ok = (pi_sum - 1.0).abs() <= CHAIN_TOL && chain.pi.iter().all(|p| *p >= 0.0);
    let worst_row_sum = chain
        .a
        .iter()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let min_entry = chain.a.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let mut worst = (0, 0, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let e = (chain.pi[i] * chain.a[i][j] - chain.pi[j] * chain.a[j][i]).abs();
            if e > worst.2 {
                worst = (i, j, e);
            }
        }
    }
    let valid = pi_ok && worst_row_sum <= CHAIN_TOL && min_entry >= 0.0 && worst.2 <= CHAIN_TOL;
    let message = if valid {
        "stochastic and reversible".to_string()
    } else if !pi_ok {
        format!("pi is not a probability vector (sum {pi_sum})")
    } else if worst_row_sum > CHAIN_TOL || min_entry < 0.0 {
        format!("not stochastic: row sum error {worst_row_sum:e}, min entry {min_entry}")
    } else {
        format!(
            "not reversible: pi_{0} a_{0}{1} - pi_{1} a_{1}{0} = {2:e}",
            worst.0, worst.1, worst.2
        )
    };
    ChainDiagnostics { valid, worst_row_sum, min_entry, worst_reversibility: worst, message }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b.first().map_or(0, |r| r.len());
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (k, aik) in a[i].iter().enumerate() {
            if *aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn matrix_power(a: &Matrix, t: usize) -> Matrix {
    let n = a.len();
    let mut p: Matrix = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..t {
        p = matmul(&p, a);
    }
    p
}

/// Ā_t = (1/t) Σ_{s=1}^{t} Aˢ.
pub fn cesaro_average(a: &Matrix, t: usize) -> Result<Matrix> {
    if t < 1 {
        return Err(Error::InvalidParameter("Cesàro average needs t >= 1".into()));
    }
    let n = a.len();
    let mut power = a.clone();
    let mut sum = a.clone();
    for _ in 1..t {
        power = matmul(&power, a);
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += power[i][j];
            }
        }
    }
    Ok(sum.into_iter().map(|r| r.into_iter().map(|x| x / t as f64).collect()).collect())
}

/// Points x₁…x_n inside a declared ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub space: GeodesicSpace,
    pub points: Vec<SpacePoint>,
    pub center: SpacePoint,
    pub radius: f64,
}

impl PointConfiguration {
    pub fn new(space: GeodesicSpace, points: Vec<SpacePoint>, center: SpacePoint, radius: f64) -> Result<Self> {
        space.check_point(&center)?;
        for p in &points {
            space.check_point(p)?;
            let d = space.dist(&center, p);
            if d > radius * (1.0 + 1e-12) {
                return Err(Error::OutOfRegime(format!("point at distance {d} outside the ball of radius {radius}")));
            }
        }
        Ok(Self { space, points, center, radius })
    }

    fn squared_distances(&self) -> Matrix {
        let d = |i: usize, j: usize| self.space.dist(&self.points[i], &self.points[j]).powi(2);
        let n = self.points.len();
        (0..n).map(|i| (0..n).map(|j| d(i, j)).collect()).collect()
    }
}

fn weighted_energy(pi: &[f64], weights: &Matrix, d2: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..pi.len() {
        for j in 0..pi.len() {
            s += pi[i] * weights[i][j] * d2[i][j];
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovTypeRatio {
    pub numerator: f64,
    pub denominator: f64,
    /// +∞ when only the denominator vanishes.
    pub ratio: f64,
    /// Set when both sides vanish and the ratio is 1 by convention.
    pub degenerate: bool,
}

/// R = Σ π_i (Aᵗ)_ij d(x_i,x_j)² / (t Σ π_i a_ij d(x_i,x_j)²).
pub fn markov_type_ratio(config: &PointConfiguration, chain: &ReversibleChain, t: usize) -> Result<MarkovTypeRatio> {
    check_sizes(config, chain, t)?;
    let d2 = config.squared_distances();
    let numerator = weighted_energy(&chain.pi, &matrix_power(&chain.a, t), &d2);
    let denominator = t as f64 * weighted_energy(&chain.pi, &chain.a, &d2);
    let (ratio, degenerate) = if denominator > 0.0 {
        (numerator / denominator, false)
    } else if numerator > 0.0 {
        (f64::INFINITY, false)
    } else {
        (1.0, true)
    };
    Ok(MarkovTypeRatio { numerator, denominator, ratio, degenerate })
}

fn check_sizes(config: &PointConfiguration, chain: &ReversibleChain, t: usize) -> Result<()> {
    if chain.len() != config.points.len() || chain.a.len() != chain.len() {
        return Err(Error::InvalidParameter(format!(
            "chain of size {} for {} points",
            chain.len(),
            config.points.len()
        )));
    }
    if t < 1 {
        return Err(Error::InvalidParameter("t must be >= 1".into()));
    }
    Ok(())
}

/// yᵢ = B(Σ_j Ā_t(i,j) δ_{x_j}).
pub fn cotype_witness(config: &PointConfiguration, chain: &ReversibleChain, t: usize) -> Result<Vec<SpacePoint>> {
    check_sizes(config, chain, t)?;
    let avg = cesaro_average(&chain.a, t)?;
    avg.iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            let weights: Vec<f64> = row.iter().map(|w| w.max(0.0) / total).collect();
            let mu = DiscreteMeasure::new(config.space.clone(), config.points.clone(), weights)?.merged();
            if mu.len() == 1 {
                Ok(mu.atoms[0].clone())
            } else {
                Ok(barycenter(&mu)?.point)
            }
        })
        .collect()
}

/// Sides of the cotype inequality; `rhs_base` is without the N² factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CotypeTerms {
    pub lhs: f64,
    pub rhs_base: f64,
}

impl CotypeTerms {
    /// Smallest N for which this instance satisfies the inequality.
    pub fn minimal_constant(&self) -> f64 {
        if self.lhs <= 0.0 {
            0.0
        } else if self.rhs_base <= 0.0 {
            f64::INFINITY
        } else {
            (self.lhs / self.rhs_base).sqrt()
        }
    }
}

pub fn cotype_terms(
    config: &PointConfiguration,
    chain: &ReversibleChain,
    t: usize,
    witness: &[SpacePoint],
) -> Result<CotypeTerms> {
    check_sizes(config, chain, t)?;
    if witness.len() != config.points.len() {
        return Err(Error::InvalidParameter("witness size differs from configuration".into()));
    }
    let space = &config.space;
    witness.iter().try_for_each(|y| space.check_point(y))?;
    let n = witness.len();
    let mut lhs = 0.0;
    for i in 0..n {
        lhs += chain.pi[i] * space.dist(&config.points[i], &witness[i]).powi(2);
    }
    let mut spread = 0.0;
    for i in 0..n {
        for j in 0..n {
            spread += chain.pi[i] * chain.a[i][j] * space.dist(&witness[i], &witness[j]).powi(2);
        }
    }
    lhs += t as f64 * spread;
    let avg = cesaro_average(&chain.a, t)?;
    let rhs_base = weighted_energy(&chain.pi, &avg, &config.squared_distances());
    Ok(CotypeTerms { lhs, rhs_base })
}

/// Checks the metric Markov cotype 2 inequality at N = 16Γ²(2/k) + 1
/// (N = 17 for κ ≤ 0), with an arbitrary witness.
pub fn cotype_check(
    config: &PointConfiguration,
    chain: &ReversibleChain,
    t: usize,
    witness: &[SpacePoint],
    cc: &CurvatureClass,
    tol: f64,
    fingerprint: String,
) -> Result<CheckReport> {
    let limit = cc.quarter_radius();
    if limit.finite().is_some_and(|r| config.radius > r * (1.0 + 1e-12)) {
        return Err(Error::OutOfRegime(format!(
            "cotype ball radius {} exceeds D_(kappa,eps)/4",
            config.radius
        )));
    }
    let terms = cotype_terms(config, chain, t, witness)?;
    let n = cc.constants().cotype;
    Ok(CheckReport::new("cotype", terms.lhs, n * n * terms.rhs_base, tol, fingerprint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn swap() -> ReversibleChain {
        ReversibleChain { pi: vec![0.5, 0.5], a: vec![vec![0.0, 1.0], vec![1.0, 0.0]] }
    }

    fn line_config(xs: &[f64]) -> PointConfiguration {
        let space = GeodesicSpace::euclidean(1);
        let pts = xs.iter().map(|x| SpacePoint::new(vec![*x])).collect();
        PointConfiguration::new(space, pts, SpacePoint::new(vec![0.0]), 100.0).unwrap()
    }

    #[test]
    fn chain_validation_examples() {
        let id = ReversibleChain { pi: vec![0.2, 0.3, 0.5], a: matrix_power(&vec![vec![0.0; 3]; 3], 0) };
        assert!(validate_chain(&id).valid);
        assert!(validate_chain(&swap()).valid);
        let bad = ReversibleChain { pi: vec![0.5, 0.5], a: vec![vec![0.0, 1.0], vec![0.0, 1.0]] };
        let d = validate_chain(&bad);
        assert!(!d.valid);
        assert_eq!(d.worst_reversibility.2, 0.5);
    }

    #[test]
    fn random_chains_are_reversible() {
        let mut rng = crate::rng::seeded(1, 0);
        for n in 1..9 {
            let c = ReversibleChain::random(&mut rng, n);
            assert!(validate_chain(&c).valid, "{}", validate_chain(&c).message);
        }
    }

    #[test]
    fn cesaro_examples() {
        let a = swap().a;
        assert_eq!(cesaro_average(&a, 1).unwrap(), a);
        assert_eq!(cesaro_average(&a, 2).unwrap(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let id = matrix_power(&a, 0);
        assert_eq!(cesaro_average(&id, 7).unwrap(), id);
        assert!(cesaro_average(&a, 0).is_err());
    }

    #[test]
    fn markov_type_examples() {
        let cfg = line_config(&[0.0, 1.0]);
        let r1 = markov_type_ratio(&cfg, &swap(), 1).unwrap();
        assert_eq!(r1.ratio, 1.0);
        let r2 = markov_type_ratio(&cfg, &swap(), 2).unwrap();
        assert_eq!(r2.numerator, 0.0);
        assert_eq!(r2.ratio, 0.0);
        let same = line_config(&[1.0, 1.0]);
        let r = markov_type_ratio(&same, &swap(), 3).unwrap();
        assert!(r.degenerate && r.ratio == 1.0);
        assert!(markov_type_ratio(&line_config(&[0.0]), &swap(), 1).is_err());
    }

    #[test]
    fn witness_examples() {
        let cfg = line_config(&[0.0, 2.0]);
        let w = cotype_witness(&cfg, &swap(), 2).unwrap();
        assert_eq!(w[0].coords, vec![1.0]);
        assert_eq!(w[1].coords, vec![1.0]);

        let id = ReversibleChain { pi: vec![0.5, 0.5], a: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
        assert_eq!(cotype_witness(&cfg, &id, 4).unwrap(), cfg.points);

        let flat = line_config(&[3.0, 3.0]);
        assert!(cotype_witness(&flat, &swap(), 3).unwrap().iter().all(|y| y.coords == vec![3.0]));
    }

    #[test]
    fn cotype_hand_computation() {
        // d = 2: lhs = d²/4 = 1, rhs base = d²/2 = 2
        let cfg = line_config(&[0.0, 2.0]);
        let w = cotype_witness(&cfg, &swap(), 2).unwrap();
        let terms = cotype_terms(&cfg, &swap(), 2, &w).unwrap();
        assert_relative_eq!(terms.lhs, 1.0);
        assert_relative_eq!(terms.rhs_base, 2.0);
        assert_relative_eq!(terms.minimal_constant(), 0.5f64.sqrt());

        let id = ReversibleChain { pi: vec![0.5, 0.5], a: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
        let t = cotype_terms(&cfg, &id, 3, &cfg.points).unwrap();
        assert_eq!((t.lhs, t.rhs_base), (0.0, 0.0));
        let cc = CurvatureClass::new(0.0, 0.5).unwrap();
        assert!(cotype_check(&cfg, &id, 3, &cfg.points, &cc, 1e-7, "id".into()).unwrap().passed);
    }
}
