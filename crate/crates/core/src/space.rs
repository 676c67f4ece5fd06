//! Concrete geodesic spaces: Euclidean spaces, spheres Sⁿ(κ), hyperbolic
//! spaces Hⁿ(κ) and finite ℓ₂-products of these.
//!
//! Points are stored in a fixed chart:
//! - `euclidean(n)`: n coordinates;
//! - `sphere(n, κ)`: the sphere of radius 1/√κ in Rⁿ⁺¹;
//! - `hyperbolic(n, κ)`: the upper sheet of ⟨x, x⟩_L = -1/|κ| in Rⁿ⁺¹ with
//!   ⟨x, y⟩_L = -x₀y₀ + Σ xᵢyᵢ;
//! - `product`: the concatenation of factor coordinates.
//!
//! Tangent vectors live in the same ambient coordinates as points.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_space::{diameter_of_model, Extended};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeodesicSpace {
    Euclidean { dim: usize },
    Sphere { dim: usize, kappa: f64 },
    Hyperbolic { dim: usize, kappa: f64 },
    Product { factors: Vec<GeodesicSpace> },
}

/// A point of a [`GeodesicSpace`] given by its chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpacePoint {
    pub coords: Vec<f64>,
}

impl SpacePoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    /// Max-norm coordinate distance, used for merging coincident atoms.
    pub fn chart_gap(&self, other: &SpacePoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for SpacePoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn lorentz(u: &[f64], v: &[f64]) -> f64 {
    -u[0] * v[0] + dot(&u[1..], &v[1..])
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

impl GeodesicSpace {
    pub fn euclidean(dim: usize) -> Self {
        GeodesicSpace::Euclidean { dim }
    }

    pub fn sphere(dim: usize, kappa: f64) -> Self {
        GeodesicSpace::Sphere { dim, kappa }
    }

    pub fn hyperbolic(dim: usize, kappa: f64) -> Self {
        GeodesicSpace::Hyperbolic { dim, kappa }
    }

    pub fn product(factors: Vec<GeodesicSpace>) -> Self {
        GeodesicSpace::Product { factors }
    }

    /// Checks the descriptor itself (positive dimensions, curvature signs).
    pub fn validate(&self) -> Result<()> {
        match self {
            GeodesicSpace::Euclidean { dim } if *dim == 0 => {
                Err(Error::InvalidParameter("euclidean space needs dim >= 1".into()))
            }
            GeodesicSpace::Euclidean { .. } => Ok(()),
            GeodesicSpace::Sphere { dim, kappa } => {
                if *dim == 0 || !(*kappa > 0.0) || !kappa.is_finite() {
                    Err(Error::InvalidParameter(format!(
                        "sphere needs dim >= 1 and kappa > 0 (dim {dim}, kappa {kappa})"
                    )))
                } else {
                    Ok(())
                }
            }
            GeodesicSpace::Hyperbolic { dim, kappa } => {
                if *dim == 0 || !(*kappa < 0.0) || !kappa.is_finite() {
                    Err(Error::InvalidParameter(format!(
                        "hyperbolic space needs dim >= 1 and kappa < 0 (dim {dim}, kappa {kappa})"
                    )))
                } else {
                    Ok(())
                }
            }
            GeodesicSpace::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidParameter("product needs at least one factor".into()));
                }
                factors.iter().try_for_each(|f| f.validate())
            }
        }
    }

    /// The κ for which the space is CAT(κ) (maximum over product factors).
    pub fn curvature_upper_bound(&self) -> f64 {
        match self {
            GeodesicSpace::Euclidean { .. } => 0.0,
            GeodesicSpace::Sphere { kappa, .. } | GeodesicSpace::Hyperbolic { kappa, .. } => *kappa,
            GeodesicSpace::Product { factors } => factors
                .iter()
                .map(|f| f.curvature_upper_bound())
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn diameter_bound(&self) -> Extended {
        diameter_of_model(self.curvature_upper_bound())
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            GeodesicSpace::Euclidean { dim }
            | GeodesicSpace::Sphere { dim, .. }
            | GeodesicSpace::Hyperbolic { dim, .. } => *dim,
            GeodesicSpace::Product { factors } => factors.iter().map(|f| f.intrinsic_dim()).sum(),
        }
    }

    pub fn coord_len(&self) -> usize {
        match self {
            GeodesicSpace::Euclidean { dim } => *dim,
            GeodesicSpace::Sphere { dim, .. } | GeodesicSpace::Hyperbolic { dim, .. } => dim + 1,
            GeodesicSpace::Product { factors } => factors.iter().map(|f| f.coord_len()).sum(),
        }
    }

    /// Coordinate ranges of the factors (a single range for non-products).
    pub fn factor_ranges(&self) -> Vec<Range<usize>> {
        match self {
            GeodesicSpace::Product { factors } => {
                let mut start = 0;
                factors
                    .iter()
                    .map(|f| {
                        let r = start..start + f.coord_len();
                        start = r.end;
                        r
                    })
                    .collect()
            }
            #[allow(clippy::single_range_in_vec_init)]
            _ => vec![0..self.coord_len()],
        }
    }

    pub fn factors(&self) -> Vec<&GeodesicSpace> {
        match self {
            GeodesicSpace::Product { factors } => factors.iter().collect(),
            _ => vec![self],
        }
    }

    /// Split a point of a product into its factor points.
    pub fn split(&self, x: &SpacePoint) -> Vec<SpacePoint> {
        self.factor_ranges()
            .into_iter()
            .map(|r| SpacePoint::new(x.coords[r].to_vec()))
            .collect()
    }

    pub fn join(parts: &[SpacePoint]) -> SpacePoint {
        SpacePoint::new(parts.iter().flat_map(|p| p.coords.iter().copied()).collect())
    }

    fn radius(&self) -> f64 {
        match self {
            GeodesicSpace::Sphere { kappa, .. } => 1.0 / kappa.sqrt(),
            GeodesicSpace::Hyperbolic { kappa, .. } => 1.0 / (-kappa).sqrt(),
            _ => 1.0,
        }
    }

    /// Base point of the chart: 0, R e₀ on spheres and hyperboloids.
    pub fn origin(&self) -> SpacePoint {
        match self {
            GeodesicSpace::Euclidean { dim } => SpacePoint::new(vec![0.0; *dim]),
            GeodesicSpace::Sphere { dim, .. } | GeodesicSpace::Hyperbolic { dim, .. } => {
                let mut c = vec![0.0; dim + 1];
                c[0] = self.radius();
                SpacePoint::new(c)
            }
            GeodesicSpace::Product { factors } => {
                let parts: Vec<_> = factors.iter().map(|f| f.origin()).collect();
                Self::join(&parts)
            }
        }
    }

    /// Checks that `x` has the right length and satisfies the chart constraint.
    pub fn check_point(&self, x: &SpacePoint) -> Result<()> {
        if x.coords.len() != self.coord_len() {
            return Err(Error::IncompatibleSpace(format!(
                "point has {} coordinates, space expects {}",
                x.coords.len(),
                self.coord_len()
            )));
        }
        if x.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("point has non-finite coordinates".into()));
        }
        match self {
            GeodesicSpace::Euclidean { .. } => Ok(()),
            GeodesicSpace::Sphere { .. } => {
                let r = self.radius();
                let n = norm(&x.coords);
                if (n - r).abs() > 1e-12 * r.max(1.0) {
                    Err(Error::InvalidParameter(format!("sphere point has norm {n}, expected {r}")))
                } else {
                    Ok(())
                }
            }
            GeodesicSpace::Hyperbolic { .. } => {
                let r = self.radius();
                let q = lorentz(&x.coords, &x.coords);
                let scale = x.coords[0].powi(2).max(1.0);
                if x.coords[0] <= 0.0 || (q + r * r).abs() > 1e-12 * scale {
                    Err(Error::InvalidParameter(format!(
                        "point is off the hyperboloid (form {q}, expected {})",
                        -r * r
                    )))
                } else {
                    Ok(())
                }
            }
            GeodesicSpace::Product { factors } => factors
                .iter()
                .zip(self.split(x))
                .try_for_each(|(f, p)| f.check_point(&p)),
        }
    }

    fn same_len(&self, x: &SpacePoint, y: &SpacePoint) -> Result<()> {
        let n = self.coord_len();
        if x.coords.len() != n || y.coords.len() != n {
            return Err(Error::IncompatibleSpace(format!(
                "points with {} and {} coordinates in a space with {n}",
                x.coords.len(),
                y.coords.len()
            )));
        }
        Ok(())
    }

    /// Geodesic distance; errors if the points do not belong to this space.
    pub fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        self.same_len(x, y)?;
        Ok(self.dist(x, y))
    }

    /// Geodesic distance without the dimension check.
    pub fn dist(&self, x: &SpacePoint, y: &SpacePoint) -> f64 {
        self.dist_slice(&x.coords, &y.coords)
    }

    fn dist_slice(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            GeodesicSpace::Euclidean { .. } => {
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            }
            GeodesicSpace::Sphere { .. } => {
                // chord/antichord form; accurate near 0 and near π
                let r = self.radius();
                let mut diff = 0.0;
                let mut sum = 0.0;
                for (a, b) in x.iter().zip(y) {
                    diff += (a - b) * (a - b);
                    sum += (a + b) * (a + b);
                }
                2.0 * r * diff.sqrt().atan2(sum.sqrt())
            }
            GeodesicSpace::Hyperbolic { .. } => {
                let r = self.radius();
                let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                let q = lorentz(&d, &d).max(0.0);
                2.0 * r * (q.sqrt() / (2.0 * r)).asinh()
            }
            GeodesicSpace::Product { factors } => {
                let mut total = 0.0;
                for (f, range) in factors.iter().zip(self.factor_ranges()) {
                    let d = f.dist_slice(&x[range.clone()], &y[range]);
                    total += d * d;
                }
                total.sqrt()
            }
        }
    }

    /// Riemannian inner product of tangent vectors at a point.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            GeodesicSpace::Hyperbolic { .. } => lorentz(u, v),
            GeodesicSpace::Product { factors } => factors
                .iter()
                .zip(self.factor_ranges())
                .map(|(f, r)| f.inner(&u[r.clone()], &v[r]))
                .sum(),
            _ => dot(u, v),
        }
    }

    pub fn tangent_norm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `x`.
    pub fn tangent_project(&self, x: &SpacePoint, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.tangent_project_slice(&x.coords, &mut out);
        out
    }

    fn tangent_project_slice(&self, x: &[f64], v: &mut [f64]) {
        match self {
            GeodesicSpace::Euclidean { .. } => {}
            GeodesicSpace::Sphere { .. } => {
                let r2 = self.radius().powi(2);
                let c = dot(x, v) / r2;
                axpy(-c, x, v);
            }
            GeodesicSpace::Hyperbolic { .. } => {
                let r2 = self.radius().powi(2);
                let c = lorentz(x, v) / r2;
                axpy(c, x, v);
            }
            GeodesicSpace::Product { factors } => {
                for (f, r) in factors.iter().zip(self.factor_ranges()) {
                    f.tangent_project_slice(&x[r.clone()], &mut v[r]);
                }
            }
        }
    }

    /// Unit tangent vector at `x` along ambient axis `i` (sphere and
    /// hyperboloid axes are shifted by one to skip the radial axis). Meant
    /// for chart origins, where these vectors are orthonormal.
    pub fn basis_tangent(&self, x: &SpacePoint, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.coord_len()];
        let axis = match self {
            GeodesicSpace::Sphere { .. } | GeodesicSpace::Hyperbolic { .. } => i + 1,
            _ => i,
        };
        e[axis] = 1.0;
        let mut v = self.tangent_project(x, &e);
        let n = self.tangent_norm(&v);
        v.iter_mut().for_each(|c| *c /= n);
        v
    }

    /// Exponential map: the point at distance |v| from `x` along `v`.
    pub fn exp(&self, x: &SpacePoint, v: &[f64]) -> SpacePoint {
        let mut out = x.coords.clone();
        self.exp_slice(&x.coords, v, &mut out);
        SpacePoint::new(out)
    }

    fn exp_slice(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            GeodesicSpace::Euclidean { .. } => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(v) {
                    *o = a + b;
                }
            }
            GeodesicSpace::Sphere { .. } => {
                let r = self.radius();
                let n = norm(v);
                if n == 0.0 {
                    out.copy_from_slice(x);
                    return;
                }
                let (s, c) = (n / r).sin_cos();
                for ((o, a), b) in out.iter_mut().zip(x).zip(v) {
                    *o = c * a + r * s * b / n;
                }
                let m = norm(out);
                out.iter_mut().for_each(|o| *o *= r / m);
            }
            GeodesicSpace::Hyperbolic { .. } => {
                let r = self.radius();
                let n = lorentz(v, v).max(0.0).sqrt();
                if n == 0.0 {
                    out.copy_from_slice(x);
                    return;
                }
                let (s, c) = ((n / r).sinh(), (n / r).cosh());
                for ((o, a), b) in out.iter_mut().zip(x).zip(v) {
                    *o = c * a + r * s * b / n;
                }
                out[0] = (r * r + dot(&out[1..], &out[1..])).sqrt();
            }
            GeodesicSpace::Product { factors } => {
                for (f, rg) in factors.iter().zip(self.factor_ranges()) {
                    f.exp_slice(&x[rg.clone()], &v[rg.clone()], &mut out[rg]);
                }
            }
        }
    }

    /// Logarithm map: the tangent vector at `x` pointing to `y` with length d(x, y).
    pub fn log(&self, x: &SpacePoint, y: &SpacePoint) -> Vec<f64> {
        let mut out = vec![0.0; x.coords.len()];
        self.log_slice(&x.coords, &y.coords, &mut out);
        out
    }

    fn log_slice(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            GeodesicSpace::Euclidean { .. } => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = b - a;
                }
            }
            GeodesicSpace::Sphere { .. } => {
                let r = self.radius();
                // u = ŷ - ⟨x̂,ŷ⟩x̂ = (ŷ - x̂) + (|ŷ - x̂|²/2) x̂
                let mut chord2 = 0.0;
                for (a, b) in x.iter().zip(y) {
                    chord2 += ((b - a) / r).powi(2);
                }
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = (b - a) / r + 0.5 * chord2 * a / r;
                }
                let n = norm(out);
                let theta = self.dist_slice(x, y);
                if n == 0.0 || theta == 0.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                } else {
                    out.iter_mut().for_each(|o| *o *= theta / n);
                }
            }
            GeodesicSpace::Hyperbolic { .. } => {
                let r = self.radius();
                // u = y + (⟨x,y⟩/R²) x = (y - x) - (q / 2R²) x with q = ⟨y-x, y-x⟩
                let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
                let q = lorentz(&d, &d).max(0.0);
                for ((o, a), di) in out.iter_mut().zip(x).zip(&d) {
                    *o = di - q / (2.0 * r * r) * a;
                }
                let n = lorentz(out, out).max(0.0).sqrt();
                let theta = self.dist_slice(x, y);
                if n == 0.0 || theta == 0.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                } else {
                    out.iter_mut().for_each(|o| *o *= theta / n);
                }
            }
            GeodesicSpace::Product { factors } => {
                for (f, rg) in factors.iter().zip(self.factor_ranges()) {
                    f.log_slice(&x[rg.clone()], &y[rg.clone()], &mut out[rg]);
                }
            }
        }
    }

    fn check_unique_geodesic(&self, x: &[f64], y: &[f64]) -> Result<()> {
        match self {
            GeodesicSpace::Sphere { .. } => {
                let r = self.radius();
                let sum: f64 = x.iter().zip(y).map(|(a, b)| ((a + b) / r).powi(2)).sum();
                if sum.sqrt() < 1e-12 {
                    return Err(Error::NonuniqueGeodesic("antipodal sphere points".into()));
                }
                Ok(())
            }
            GeodesicSpace::Product { factors } => factors
                .iter()
                .zip(self.factor_ranges())
                .try_for_each(|(f, r)| f.check_unique_geodesic(&x[r.clone()], &y[r])),
            _ => Ok(()),
        }
    }

    /// γ(t) on the constant speed geodesic from `x` (t = 0) to `y` (t = 1).
    pub fn geodesic_point(&self, x: &SpacePoint, y: &SpacePoint, t: f64) -> Result<SpacePoint> {
        self.same_len(x, y)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("geodesic parameter {t} outside [0, 1]")));
        }
        self.check_unique_geodesic(&x.coords, &y.coords)?;
        Ok(self.geodesic_unchecked(x, y, t))
    }

    /// Same as [`geodesic_point`](Self::geodesic_point) for any real `t`
    /// (extrapolation along the geodesic line) and without checks.
    pub fn geodesic_unchecked(&self, x: &SpacePoint, y: &SpacePoint, t: f64) -> SpacePoint {
        if t == 0.0 {
            return x.clone();
        }
        if t == 1.0 {
            return y.clone();
        }
        let mut v = self.log(x, y);
        v.iter_mut().for_each(|c| *c *= t);
        self.exp(x, &v)
    }

    /// Angle at `vertex` between the geodesics to `x` and to `y`.
    pub fn angle_at(&self, vertex: &SpacePoint, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        self.same_len(vertex, x)?;
        self.same_len(vertex, y)?;
        self.check_unique_geodesic(&vertex.coords, &x.coords)?;
        self.check_unique_geodesic(&vertex.coords, &y.coords)?;
        let u = self.log(vertex, x);
        let v = self.log(vertex, y);
        let (nu, nv) = (self.tangent_norm(&u), self.tangent_norm(&v));
        if nu == 0.0 || nv == 0.0 {
            return Err(Error::UndefinedAngle("vertex coincides with an endpoint".into()));
        }
        Ok((self.inner(&u, &v) / (nu * nv)).clamp(-1.0, 1.0).acos())
    }

    /// Reproject an ambient vector onto the space (used for extrinsic means).
    pub fn reproject(&self, coords: &[f64]) -> Result<SpacePoint> {
        let mut out = coords.to_vec();
        self.reproject_slice(&mut out)?;
        Ok(SpacePoint::new(out))
    }

    fn reproject_slice(&self, x: &mut [f64]) -> Result<()> {
        match self {
            GeodesicSpace::Euclidean { .. } => Ok(()),
            GeodesicSpace::Sphere { .. } => {
                let n = norm(x);
                if n < 1e-12 {
                    return Err(Error::OutOfRegime("extrinsic mean vanishes on the sphere".into()));
                }
                let r = self.radius();
                x.iter_mut().for_each(|c| *c *= r / n);
                Ok(())
            }
            GeodesicSpace::Hyperbolic { .. } => {
                let r = self.radius();
                x[0] = (r * r + dot(&x[1..], &x[1..])).sqrt();
                Ok(())
            }
            GeodesicSpace::Product { factors } => {
                for (f, rg) in factors.iter().zip(self.factor_ranges()) {
                    f.reproject_slice(&mut x[rg])?;
                }
                Ok(())
            }
        }
    }

    /// Uniformly distributed unit tangent vector at `x`.
    pub fn random_unit_tangent<R: Rng + ?Sized>(&self, x: &SpacePoint, rng: &mut R) -> Vec<f64> {
        loop {
            let g: Vec<f64> = (0..self.coord_len()).map(|_| rng.sample(StandardNormal)).collect();
            let v = self.tangent_project(x, &g);
            let n = self.tangent_norm(&v);
            if n > 1e-9 {
                return v.into_iter().map(|c| c / n).collect();
            }
        }
    }

    /// Radial distance of a ball sample for the uniform variate `u`.
    ///
    /// The density of the distance ρ from the center is proportional to the
    /// area of the geodesic sphere of radius ρ in the model space:
    /// ρⁿ⁻¹, sinⁿ⁻¹(ρ/R) or sinhⁿ⁻¹(ρ/R). Products use ρᴰ⁻¹ with D the total
    /// intrinsic dimension.
    fn radial_inverse(&self, radius: f64, u: f64) -> f64 {
        let n = self.intrinsic_dim();
        let r = self.radius();
        match self {
            GeodesicSpace::Sphere { .. } | GeodesicSpace::Hyperbolic { .. } if n >= 2 => {
                let spherical = matches!(self, GeodesicSpace::Sphere { .. });
                if n == 2 {
                    return if spherical {
                        r * (1.0 - u * (1.0 - (radius / r).cos())).acos()
                    } else {
                        r * (1.0 + u * ((radius / r).cosh() - 1.0)).acosh()
                    };
                }
                let density = |rho: f64| {
                    let s = if spherical { (rho / r).sin() } else { (rho / r).sinh() };
                    s.powi(n as i32 - 1)
                };
                let cdf = |rho: f64| simpson(&density, 0.0, rho, 256);
                let target = u * cdf(radius);
                let (mut lo, mut hi) = (0.0, radius);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
            GeodesicSpace::Sphere { .. } | GeodesicSpace::Hyperbolic { .. } => radius * u,
            _ => radius * u.powf(1.0 / n as f64),
        }
    }

    /// One random point in the closed ball of given radius around `center`.
    pub fn sample_ball_point<R: Rng + ?Sized>(
        &self,
        center: &SpacePoint,
        radius: f64,
        rng: &mut R,
    ) -> SpacePoint {
        let dir = self.random_unit_tangent(center, rng);
        let u: f64 = rng.random();
        let rho = self.radial_inverse(radius, u).min(radius);
        let v: Vec<f64> = dir.iter().map(|c| c * rho).collect();
        let p = self.exp(center, &v);
        // guard against roundoff pushing the point a hair outside
        let d = self.dist(center, &p);
        if d > radius {
            self.geodesic_unchecked(center, &p, radius / d * (1.0 - 1e-15))
        } else {
            p
        }
    }

    pub fn check_ball_radius(&self, radius: f64) -> Result<()> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Infeasible(format!("ball radius {radius} must be finite and >= 0")));
        }
        if let Some(d) = self.diameter_bound().finite() {
            if radius >= d / 2.0 {
                return Err(Error::Infeasible(format!(
                    "ball radius {radius} must be below D_kappa / 2 = {}",
                    d / 2.0
                )));
            }
        }
        Ok(())
    }

    /// `count` deterministic pseudo-random points of the closed ball B̄_radius(center).
    pub fn sample_ball(
        &self,
        center: &SpacePoint,
        radius: f64,
        seed: u64,
        count: usize,
    ) -> Result<Vec<SpacePoint>> {
        self.check_point(center)?;
        self.check_ball_radius(radius)?;
        let mut rng = crate::rng::seeded(seed, 0);
        Ok((0..count).map(|_| self.sample_ball_point(center, radius, &mut rng)).collect())
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// A constant speed geodesic γ: [0, 1] → X between two points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment {
    pub start: SpacePoint,
    pub end: SpacePoint,
    pub speed: f64,
}

impl GeodesicSegment {
    pub fn new(space: &GeodesicSpace, start: SpacePoint, end: SpacePoint) -> Result<Self> {
        space.check_unique_geodesic_pub(&start, &end)?;
        let speed = space.distance(&start, &end)?;
        Ok(Self { start, end, speed })
    }

    pub fn at(&self, space: &GeodesicSpace, t: f64) -> SpacePoint {
        space.geodesic_unchecked(&self.start, &self.end, t)
    }
}

impl GeodesicSpace {
    fn check_unique_geodesic_pub(&self, x: &SpacePoint, y: &SpacePoint) -> Result<()> {
        self.same_len(x, y)?;
        self.check_unique_geodesic(&x.coords, &y.coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn s2() -> GeodesicSpace {
        GeodesicSpace::sphere(2, 1.0)
    }

    #[test]
    fn distance_examples() {
        let s = s2();
        let n = SpacePoint::new(vec![0.0, 0.0, 1.0]);
        let e = SpacePoint::new(vec![1.0, 0.0, 0.0]);
        assert_relative_eq!(s.distance(&n, &e).unwrap(), FRAC_PI_2, epsilon = 1e-15);

        let r3 = GeodesicSpace::euclidean(3);
        let d = r3
            .distance(&vec![0.0, 0.0, 0.0].into(), &vec![3.0, 4.0, 0.0].into())
            .unwrap();
        assert_relative_eq!(d, 5.0);

        let p = GeodesicSpace::product(vec![GeodesicSpace::euclidean(1), GeodesicSpace::euclidean(1)]);
        let d = p.distance(&vec![0.0, 0.0].into(), &vec![3.0, 4.0].into()).unwrap();
        assert_relative_eq!(d, 5.0);
    }

    #[test]
    fn mismatched_points_rejected() {
        let s = s2();
        let r = s.distance(&vec![1.0, 0.0, 0.0].into(), &vec![1.0, 0.0].into());
        assert!(matches!(r, Err(Error::IncompatibleSpace(_))));
    }

    #[test]
    fn geodesic_examples() {
        let r2 = GeodesicSpace::euclidean(2);
        let a = SpacePoint::new(vec![0.0, 0.0]);
        let b = SpacePoint::new(vec![2.0, 0.0]);
        assert_eq!(r2.geodesic_point(&a, &b, 0.0).unwrap(), a);
        assert_eq!(r2.geodesic_point(&a, &b, 1.0).unwrap(), b);
        assert_eq!(r2.geodesic_point(&a, &b, 0.5).unwrap().coords, vec![1.0, 0.0]);

        let s = s2();
        let m = s
            .geodesic_point(&vec![1.0, 0.0, 0.0].into(), &vec![0.0, 1.0, 0.0].into(), 0.5)
            .unwrap();
        let h = 0.5f64.sqrt();
        for (got, want) in m.coords.iter().zip([h, h, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }

        let anti = s.geodesic_point(&vec![1.0, 0.0, 0.0].into(), &vec![-1.0, 0.0, 0.0].into(), 0.5);
        assert!(matches!(anti, Err(Error::NonuniqueGeodesic(_))));
    }

    #[test]
    fn angle_examples() {
        let r2 = GeodesicSpace::euclidean(2);
        let ang = r2
            .angle_at(&vec![0.0, 0.0].into(), &vec![1.0, 0.0].into(), &vec![0.0, 1.0].into())
            .unwrap();
        assert_relative_eq!(ang, FRAC_PI_2);
        let ang = r2
            .angle_at(&vec![0.0, 0.0].into(), &vec![-1.0, 0.0].into(), &vec![2.0, 0.0].into())
            .unwrap();
        assert_relative_eq!(ang, PI);
        let s = s2();
        let ang = s
            .angle_at(&vec![1.0, 0.0, 0.0].into(), &vec![0.0, 1.0, 0.0].into(), &vec![0.0, 0.0, 1.0].into())
            .unwrap();
        assert_relative_eq!(ang, FRAC_PI_2, epsilon = 1e-15);
        let err = r2.angle_at(&vec![0.0, 0.0].into(), &vec![0.0, 0.0].into(), &vec![1.0, 0.0].into());
        assert!(matches!(err, Err(Error::UndefinedAngle(_))));
    }

    #[test]
    fn sampling_contract() {
        let s = s2();
        let c = s.origin();
        assert!(s.sample_ball(&c, 0.5, 3, 0).unwrap().is_empty());
        let a = s.sample_ball(&c, 0.5, 3, 200).unwrap();
        let b = s.sample_ball(&c, 0.5, 3, 200).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| s.dist(&c, p) <= 0.5));
        assert!(a.iter().all(|p| s.check_point(p).is_ok()));
        assert!(matches!(s.sample_ball(&c, 1.6, 3, 1), Err(Error::Infeasible(_))));
    }

    #[test]
    fn hyperbolic_exp_log_roundtrip() {
        let h = GeodesicSpace::hyperbolic(3, -0.5);
        let c = h.origin();
        let pts = h.sample_ball(&c, 2.0, 11, 20).unwrap();
        for w in pts.windows(2) {
            let v = h.log(&w[0], &w[1]);
            assert_relative_eq!(h.tangent_norm(&v), h.dist(&w[0], &w[1]), epsilon = 1e-12);
            let back = h.exp(&w[0], &v);
            assert!(h.dist(&back, &w[1]) < 1e-11);
            assert!(h.check_point(&back).is_ok());
        }
    }

    #[test]
    fn higher_dimensional_sampling_stays_in_ball() {
        for space in [GeodesicSpace::sphere(4, 2.0), GeodesicSpace::hyperbolic(3, -1.0)] {
            let c = space.origin();
            let pts = space.sample_ball(&c, 0.6, 5, 100).unwrap();
            assert!(pts.iter().all(|p| space.dist(&c, p) <= 0.6 && space.check_point(p).is_ok()));
        }
    }

    #[test]
    fn space_json_schema() {
        let s: GeodesicSpace = serde_json::from_str(
            r#"{"kind":"product","factors":[{"kind":"sphere","dim":2,"kappa":1.0},{"kind":"euclidean","dim":1}]}"#,
        )
        .unwrap();
        assert_eq!(s.coord_len(), 4);
        assert_eq!(s.curvature_upper_bound(), 1.0);
        let back: GeodesicSpace = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
