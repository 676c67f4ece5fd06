//! Seeded randomized sweeps over the checks.
//!
//! Trial `i` draws everything from `seeded(seed, i)`, so trials are pure and
//! may run in parallel; reports come back in trial order, which is also the
//! lexicographic order of their fingerprints.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::*;
use super::report::CheckReport;
use crate::barycenter::ConvexSet;
use crate::error::{Error, Result};
use crate::markov::{cotype_check, cotype_terms, cotype_witness, markov_type_ratio, PointConfiguration, ReversibleChain};
use crate::measure::DiscreteMeasure;
use crate::model_space::CurvatureClass;
use crate::rng::{seeded, TrialRng};
use crate::space::{GeodesicSpace, SpacePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Convexity,
    Phi,
    Spcalc,
    Variance,
    Jensen,
    Lipschitz,
    Pisier,
    MarkovType,
    Cotype,
}

impl CheckKind {
    pub const ALL: [CheckKind; 9] = [
        CheckKind::Convexity,
        CheckKind::Phi,
        CheckKind::Spcalc,
        CheckKind::Variance,
        CheckKind::Jensen,
        CheckKind::Lipschitz,
        CheckKind::Pisier,
        CheckKind::MarkovType,
        CheckKind::Cotype,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Convexity => "convexity",
            CheckKind::Phi => "phi",
            CheckKind::Spcalc => "spcalc",
            CheckKind::Variance => "variance",
            CheckKind::Jensen => "jensen",
            CheckKind::Lipschitz => "lipschitz",
            CheckKind::Pisier => "pisier",
            CheckKind::MarkovType => "markov-type",
            CheckKind::Cotype => "cotype",
        }
    }

    /// Roughly ten times the solver tolerance that feeds each check.
    pub fn default_tol(self) -> f64 {
        match self {
            CheckKind::Convexity | CheckKind::Phi => 1e-9,
            CheckKind::Spcalc => 1e-4,
            CheckKind::Pisier | CheckKind::Cotype => 1e-7,
            _ => 1e-8,
        }
    }

    /// Name of the per-trial statistic the sweep tracks, if any.
    pub fn tracked(self) -> Option<&'static str> {
        match self {
            CheckKind::Lipschitz => Some("ratio d(B1,B2)/W2"),
            CheckKind::MarkovType => Some("markov type ratio"),
            CheckKind::Cotype => Some("minimal N"),
            _ => None,
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CheckKind::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown check '{s}'")))
    }
}

/// Builds a space from names like `sphere2`, `euclidean3`, `hyperbolic2`,
/// or products joined by `x` (`sphere2xeuclidean1`). Spheres take curvature
/// `kappa`; hyperbolic factors take `kappa` when it is negative and -1 otherwise.
pub fn parse_space(spec: &str, kappa: f64) -> Result<GeodesicSpace> {
    let factor = |name: &str| -> Result<GeodesicSpace> {
        let split = name.find(|c: char| c.is_ascii_digit()).unwrap_or(name.len());
        let (kind, dim) = name.split_at(split);
        let dim: usize = dim
            .parse()
            .map_err(|_| Error::Input(format!("space '{name}' needs a dimension, e.g. sphere2")))?;
        let space = match kind {
            "euclidean" => GeodesicSpace::euclidean(dim),
            "sphere" => {
                if !(kappa > 0.0) {
                    return Err(Error::Input(format!("a sphere needs kappa > 0, got {kappa}")));
                }
                GeodesicSpace::sphere(dim, kappa)
            }
            "hyperbolic" => GeodesicSpace::hyperbolic(dim, if kappa < 0.0 { kappa } else { -1.0 }),
            _ => return Err(Error::Input(format!("unknown space kind '{kind}'"))),
        };
        space.validate().map_err(|e| Error::Input(e.to_string()))?;
        Ok(space)
    };
    let parts: Vec<&str> = spec.split('x').collect();
    if parts.len() == 1 {
        factor(parts[0])
    } else {
        Ok(GeodesicSpace::product(parts.into_iter().map(factor).collect::<Result<_>>()?))
    }
}

fn default_space() -> String {
    "sphere2".into()
}
fn default_kappa() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    0.5
}
fn default_trials() -> usize {
    1000
}
fn default_atoms() -> usize {
    6
}
fn default_states() -> usize {
    8
}
fn default_max_t() -> usize {
    16
}
fn default_omega() -> usize {
    16
}
fn default_steps() -> usize {
    4
}

/// One sweep; also the JSON manifest format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub check: CheckKind,
    #[serde(default = "default_space")]
    pub space: String,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Sampling radius; defaults per check.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Variance check with z at the center of a ball of radius D_{κ,ε}/2.
    #[serde(default)]
    pub z_at_center: bool,
    /// Phi check: draw the convex weight uniformly instead of using 1/2.
    #[serde(default)]
    pub random_weight: bool,
    /// Largest number of atoms per measure.
    #[serde(default = "default_atoms")]
    pub max_atoms: usize,
    /// Largest chain size for markov-type and cotype.
    #[serde(default = "default_states")]
    pub max_states: usize,
    /// Largest time horizon for markov-type and cotype.
    #[serde(default = "default_max_t")]
    pub max_t: usize,
    /// Largest ground set for pisier.
    #[serde(default = "default_omega")]
    pub max_omega: usize,
    /// Largest number of martingale steps for pisier.
    #[serde(default = "default_steps")]
    pub max_steps: usize,
}

impl SweepConfig {
    pub fn new(check: CheckKind, space: &str, kappa: f64, epsilon: f64, trials: usize, seed: u64) -> Self {
        Self {
            check,
            space: space.into(),
            kappa,
            epsilon,
            radius: None,
            trials,
            seed,
            tol: None,
            z_at_center: false,
            random_weight: false,
            max_atoms: default_atoms(),
            max_states: default_states(),
            max_t: default_max_t(),
            max_omega: default_omega(),
            max_steps: default_steps(),
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(self.check.default_tol())
    }
}

/// The cap used by the spcalc check: x₁ > h with h̃ = 1/√2.
pub const SPCALC_H: f64 = std::f64::consts::FRAC_1_SQRT_2 + 0.1;
pub const SPCALC_H_TILDE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Validated sweep parameters shared by all trials.
struct Plan {
    cfg: SweepConfig,
    cc: CurvatureClass,
    space: GeodesicSpace,
    center: SpacePoint,
    radius: f64,
    tol: f64,
}

fn default_radius(check: CheckKind, cc: &CurvatureClass, z_at_center: bool) -> f64 {
    let safe = cc.safe_diameter().finite();
    match (check, safe) {
        (CheckKind::Phi, _) => 0.7 / cc.kappa.sqrt(),
        (CheckKind::Variance, Some(d)) if z_at_center => d / 2.0,
        (_, Some(d)) => d / 4.0,
        (_, None) => 1.0,
    }
}

/// Largest radius each check's hypothesis allows.
fn radius_limit(check: CheckKind, cc: &CurvatureClass, z_at_center: bool) -> Option<(f64, bool)> {
    let safe = cc.safe_diameter().finite()?;
    Some(match check {
        // strict inequality r < D_κ/4
        CheckKind::Phi => (cc.diameter().finite()? / 4.0, true),
        CheckKind::Variance if z_at_center => (safe / 2.0, false),
        CheckKind::MarkovType | CheckKind::Spcalc => return None,
        _ => (safe / 4.0, false),
    })
}

impl Plan {
    fn new(cfg: &SweepConfig) -> Result<Self> {
        let input = |e: Error| Error::Input(e.to_string());
        let cc = CurvatureClass::new(cfg.kappa, cfg.epsilon).map_err(input)?;
        let space = parse_space(&cfg.space, cfg.kappa)?;
        if space.curvature_upper_bound() > cc.kappa {
            return Err(Error::Input(format!(
                "space {} is not CAT(kappa) for kappa = {}",
                cfg.space, cfg.kappa
            )));
        }
        let radius = cfg.radius.unwrap_or_else(|| default_radius(cfg.check, &cc, cfg.z_at_center));
        space.check_ball_radius(radius).map_err(input)?;
        if let Some((limit, strict)) = radius_limit(cfg.check, &cc, cfg.z_at_center) {
            let bad = if strict { radius >= limit } else { radius > limit * (1.0 + 1e-12) };
            if bad {
                return Err(Error::Input(format!(
                    "radius {radius} outside the {} regime (limit {limit})",
                    cfg.check
                )));
            }
        }
        match cfg.check {
            CheckKind::Phi if !matches!(space, GeodesicSpace::Sphere { .. }) => {
                return Err(Error::Input("phi is checked on spheres only".into()));
            }
            CheckKind::MarkovType if !matches!(space, GeodesicSpace::Euclidean { .. }) => {
                return Err(Error::Input(
                    "markov-type is checked on Euclidean spaces, where the constant is 1".into(),
                ));
            }
            _ => {}
        }
        if cfg.max_atoms < 1 || cfg.max_states < 2 || cfg.max_t < 1 || cfg.max_omega < 1 || cfg.max_steps < 1 {
            return Err(Error::Input("size limits must be positive (at least 2 chain states)".into()));
        }
        let center = space.origin();
        Ok(Self { cfg: cfg.clone(), cc, tol: cfg.tol(), space, center, radius })
    }

    fn fingerprint(&self, trial: usize) -> String {
        let c = &self.cfg;
        let mut fp = format!(
            "check={};seed={};trial={:08};space={};kappa={};eps={};radius={}",
            c.check, c.seed, trial, c.space, c.kappa, c.epsilon, self.radius
        );
        if c.z_at_center {
            fp.push_str(";z-at-center");
        }
        if c.random_weight {
            fp.push_str(";random-weight");
        }
        fp
    }

    fn point(&self, rng: &mut TrialRng) -> SpacePoint {
        self.space.sample_ball_point(&self.center, self.radius, rng)
    }

    fn measure(&self, rng: &mut TrialRng) -> Result<DiscreteMeasure> {
        let n = rng.random_range(1..=self.cfg.max_atoms);
        random_measure(rng, &self.space, &self.center, self.radius, n)
    }

    fn chain_instance(&self, rng: &mut TrialRng) -> Result<(PointConfiguration, ReversibleChain, usize)> {
        let n = rng.random_range(2..=self.cfg.max_states);
        let t = rng.random_range(1..=self.cfg.max_t);
        let points = (0..n).map(|_| self.point(rng)).collect();
        let config = PointConfiguration::new(self.space.clone(), points, self.center.clone(), self.radius)?;
        Ok((config, ReversibleChain::random(rng, n), t))
    }

    fn trial(&self, index: usize) -> TrialOutcome {
        let fingerprint = self.fingerprint(index);
        let mut rng = seeded(self.cfg.seed, index as u64);
        let mut tracked = None;
        let mut degenerate = false;
        let report = self.run(index, &mut rng, fingerprint.clone(), &mut tracked, &mut degenerate);
        TrialOutcome { fingerprint, report, tracked, degenerate }
    }

    fn run(
        &self,
        index: usize,
        rng: &mut TrialRng,
        fp: String,
        tracked: &mut Option<f64>,
        degenerate: &mut bool,
    ) -> Result<CheckReport> {
        let (space, cc, tol) = (&self.space, &self.cc, self.tol);
        match self.cfg.check {
            CheckKind::Convexity => {
                let (x, y, z) = (self.point(rng), self.point(rng), self.point(rng));
                let t = rng.random::<f64>();
                check_uniform_convexity(space, cc, &x, &y, &z, t, tol, fp)
            }
            CheckKind::Phi => {
                let p: Vec<SpacePoint> = (0..4).map(|_| self.point(rng)).collect();
                let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
                let a = if self.cfg.random_weight { rng.random::<f64>() } else { 0.5 };
                check_phi_convexity(
                    space,
                    cc.kappa,
                    &self.center,
                    self.radius,
                    (&p[0], &p[1]),
                    (&p[2], &p[3]),
                    s,
                    t,
                    a,
                    tol,
                    fp,
                )
            }
            CheckKind::Spcalc => {
                let quad = random_quadruple(rng, SPCALC_H);
                check_spcalc_psi(SPCALC_H, SPCALC_H_TILDE, &quad, tol, fp)
            }
            CheckKind::Variance => {
                let mu = self.measure(rng)?;
                if self.cfg.z_at_center {
                    check_variance(cc, &mu, &self.center, VarianceRegime::CenteredBall, tol, fp)
                } else {
                    let z = self.point(rng);
                    check_variance(cc, &mu, &z, VarianceRegime::Diameter, tol, fp)
                }
            }
            CheckKind::Jensen => {
                let mu = self.measure(rng)?;
                let phi = self.test_function(index, rng);
                check_jensen(cc, &mu, &phi, tol, fp)
            }
            CheckKind::Lipschitz => {
                let (mu1, mu2) = if index.is_multiple_of(10) {
                    (
                        DiscreteMeasure::dirac(space.clone(), self.point(rng))?,
                        DiscreteMeasure::dirac(space.clone(), self.point(rng))?,
                    )
                } else {
                    (self.measure(rng)?, self.measure(rng)?)
                };
                let out = check_barycenter_lipschitz(cc, &self.center, self.radius, &mu1, &mu2, tol, fp)?;
                *tracked = out.ratio;
                Ok(out.report)
            }
            CheckKind::Pisier => {
                let omega = rng.random_range(1..=self.cfg.max_omega);
                let steps = rng.random_range(1..=self.cfg.max_steps);
                let inst = MartingaleInstance::generate(rng, space, &self.center, self.radius, omega, steps)?;
                let z = self.point(rng);
                check_pisier(cc, &inst, &z, tol, fp)
            }
            CheckKind::MarkovType => {
                let (config, chain, t) = self.chain_instance(rng)?;
                let r = markov_type_ratio(&config, &chain, t)?;
                *tracked = Some(r.ratio);
                *degenerate = r.degenerate;
                // M = 1 in Euclidean space
                Ok(CheckReport::new("markov-type", r.numerator, r.denominator, tol, fp))
            }
            CheckKind::Cotype => {
                let (config, chain, t) = self.chain_instance(rng)?;
                let witness = cotype_witness(&config, &chain, t)?;
                *tracked = Some(cotype_terms(&config, &chain, t, &witness)?.minimal_constant());
                cotype_check(&config, &chain, t, &witness, cc, tol, fp)
            }
        }
    }

    /// Rotates through the registered convex test functions.
    fn test_function(&self, index: usize, rng: &mut TrialRng) -> TestFunction {
        let space = &self.space;
        match index % 3 {
            0 => TestFunction::SquaredDistance { anchor: self.point(rng) },
            1 if !matches!(space, GeodesicSpace::Product { .. }) => TestFunction::DistanceToSet {
                set: ConvexSet::ClosedBall { center: self.point(rng), radius: 0.5 * self.radius * rng.random::<f64>() },
            },
            2 if space.curvature_upper_bound() <= 0.0 && !matches!(space, GeodesicSpace::Product { .. }) => {
                if let GeodesicSpace::Euclidean { dim } = space {
                    if rng.random::<bool>() {
                        let gradient = (0..*dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                        return TestFunction::Affine { gradient, offset: rng.random_range(-1.0..1.0) };
                    }
                }
                TestFunction::DistanceToSet {
                    set: ConvexSet::GeodesicSegment { a: self.point(rng), b: self.point(rng) },
                }
            }
            _ => TestFunction::SquaredDistance { anchor: self.point(rng) },
        }
    }
}

/// Base points in the cap x₁ > h shrunk by a margin, tangent velocities of
/// speed at most 1 shared within each pair.
fn random_quadruple(rng: &mut TrialRng, h: f64) -> GeodesicQuadruple {
    let cap = h.acos() - 1e-3;
    let s2 = GeodesicSpace::sphere(2, 1.0);
    let pole = SpacePoint::new(vec![1.0, 0.0, 0.0]);
    let mut base = || -> [f64; 3] {
        let p = s2.sample_ball_point(&pole, cap, rng);
        [p.coords[0], p.coords[1], p.coords[2]]
    };
    let (x, y) = (base(), base());
    let mut pair = |b: [f64; 3]| -> ([f64; 3], [f64; 3]) {
        let at = SpacePoint::new(b.to_vec());
        let speed = rng.random::<f64>();
        let u = s2.random_unit_tangent(&at, rng);
        let v = s2.random_unit_tangent(&at, rng);
        ([0, 1, 2].map(|i| speed * u[i]), [0, 1, 2].map(|i| speed * v[i]))
    };
    let (lambda_upper, lambda_lower) = pair(x);
    let (mu_upper, mu_lower) = pair(y);
    GeodesicQuadruple { x, y, lambda_upper, lambda_lower, mu_upper, mu_lower }
}

struct TrialOutcome {
    fingerprint: String,
    report: Result<CheckReport>,
    tracked: Option<f64>,
    degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub config: SweepConfig,
    pub radius: f64,
    pub tol: f64,
    /// Successful trials in trial order.
    pub reports: Vec<CheckReport>,
    /// Fingerprints of reports with `passed == false`.
    pub failures: Vec<String>,
    /// (fingerprint, message) for trials that raised an error.
    pub errors: Vec<(String, String)>,
    pub tracked_name: Option<&'static str>,
    pub tracked_min: Option<f64>,
    pub tracked_max: Option<f64>,
    /// Trials whose statistic fell back to a convention (markov-type 0/0).
    pub degenerate: usize,
    pub worst_slack: Option<f64>,
}

impl SweepSummary {
    pub fn all_passed(&self) -> bool {
        self.failures.is_empty() && self.errors.is_empty()
    }
}

/// Runs every trial of the sweep. Configuration problems are returned as
/// `Error::Input`; per-trial errors are collected in the summary.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepSummary> {
    let plan = Plan::new(cfg)?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials).into_par_iter().map(|i| plan.trial(i)).collect();
    let mut summary = SweepSummary {
        config: cfg.clone(),
        radius: plan.radius,
        tol: plan.tol,
        reports: Vec::with_capacity(outcomes.len()),
        failures: Vec::new(),
        errors: Vec::new(),
        tracked_name: cfg.check.tracked(),
        tracked_min: None,
        tracked_max: None,
        degenerate: 0,
        worst_slack: None,
    };
    for o in outcomes {
        if let Some(v) = o.tracked {
            summary.tracked_min = Some(summary.tracked_min.map_or(v, |m| m.min(v)));
            summary.tracked_max = Some(summary.tracked_max.map_or(v, |m| m.max(v)));
        }
        summary.degenerate += usize::from(o.degenerate);
        match o.report {
            Ok(r) => {
                if !r.passed {
                    summary.failures.push(r.fingerprint.clone());
                }
                summary.worst_slack = Some(summary.worst_slack.map_or(r.slack, |w| w.min(r.slack)));
                summary.reports.push(r);
            }
            Err(e) => summary.errors.push((o.fingerprint, e.to_string())),
        }
    }
    Ok(summary)
}
