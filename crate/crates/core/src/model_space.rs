//! Constants and two-dimensional model surfaces M²(κ).
//!
//! The model surface of curvature κ is charted as the sphere of radius
//! 1/√κ in R³ for κ > 0, the plane R² for κ = 0 and the upper sheet of the
//! hyperboloid ⟨x, x⟩ = -1/|κ| (Lorentz form) in R³ for κ < 0.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{GeodesicSpace, SpacePoint};

/// A real number or +∞. The unbounded case never takes part in arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    /// Strict comparison `x < self`.
    pub fn exceeds(self, x: f64) -> bool {
        match self {
            Extended::Finite(v) => x < v,
            Extended::Infinite => x.is_finite(),
        }
    }

    /// Multiply a finite value; +∞ stays +∞ for positive factors.
    pub fn scale(self, factor: f64) -> Extended {
        match self {
            Extended::Finite(v) => Extended::Finite(v * factor),
            Extended::Infinite => Extended::Infinite,
        }
    }
}

/// Diameter D_κ of the model surface.
pub fn diameter_of_model(kappa: f64) -> Extended {
    if kappa > 0.0 {
        Extended::Finite(PI / kappa.sqrt())
    } else {
        Extended::Infinite
    }
}

/// cos_κ(t) = cos(√κ t), only defined for κ > 0.
pub fn cos_kappa(kappa: f64, t: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cos_kappa needs kappa > 0, got {kappa}"
        )));
    }
    Ok((kappa.sqrt() * t).cos())
}

/// Curvature bound κ together with the margin ε of D_{κ,ε} = (1 - ε) D_κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureClass {
    pub kappa: f64,
    pub epsilon: f64,
}

impl CurvatureClass {
    pub fn new(kappa: f64, epsilon: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be finite, got {kappa}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie strictly inside (0, 1), got {epsilon}"
            )));
        }
        Ok(Self { kappa, epsilon })
    }

    pub fn diameter(&self) -> Extended {
        diameter_of_model(self.kappa)
    }

    /// D_{κ,ε} = (1 - ε) D_κ.
    pub fn safe_diameter(&self) -> Extended {
        self.diameter().scale(1.0 - self.epsilon)
    }

    /// Radius of the balls on which cotype, barycenter Lipschitz bounds and
    /// extensions are certified: D_{κ,ε} / 4.
    pub fn quarter_radius(&self) -> Extended {
        self.safe_diameter().scale(0.25)
    }

    pub fn constants(&self) -> EffectiveConstants {
        effective_constants(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConstants {
    /// Modulus of uniform convexity.
    pub k: f64,
    /// Lipschitz constant of the barycenter map on W₂.
    pub gamma: f64,
    /// Metric Markov cotype 2 bound N = 16 Γ² (2/k) + 1.
    pub cotype: f64,
    /// Extension constant Γ N.
    pub c_ext: f64,
}

pub fn convexity_modulus(epsilon: f64) -> f64 {
    (PI - epsilon * PI) * (epsilon * FRAC_PI_2).tan()
}

pub fn barycenter_lipschitz(epsilon: f64) -> f64 {
    PI / (2.0 * 2f64.sqrt() * ((1.0 - epsilon) * FRAC_PI_2).cos().powf(0.25))
}

pub fn effective_constants(cc: &CurvatureClass) -> EffectiveConstants {
    let (k, gamma) = if cc.kappa <= 0.0 {
        (2.0, 1.0)
    } else {
        (convexity_modulus(cc.epsilon), barycenter_lipschitz(cc.epsilon))
    };
    let cotype = 16.0 * gamma * gamma * (2.0 / k) + 1.0;
    EffectiveConstants { k, gamma, cotype, c_ext: gamma * cotype }
}

/// The 2-dimensional model surface as a [`GeodesicSpace`].
pub fn model_surface(kappa: f64) -> GeodesicSpace {
    if kappa > 0.0 {
        GeodesicSpace::Sphere { dim: 2, kappa }
    } else if kappa < 0.0 {
        GeodesicSpace::Hyperbolic { dim: 2, kappa }
    } else {
        GeodesicSpace::Euclidean { dim: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTriangle {
    /// (d(x,y), d(y,z), d(z,x)).
    pub side_lengths: [f64; 3],
    pub vertices: [SpacePoint; 3],
    pub kappa: f64,
}

fn check_lengths(sides: [f64; 3], kappa: f64) -> Result<()> {
    let [a, b, c] = sides;
    if sides.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::Infeasible(format!("side lengths {sides:?} must be finite and >= 0")));
    }
    let scale = a.max(b).max(c).max(1.0);
    let slack = 1e-12 * scale;
    if a > b + c + slack || b > a + c + slack || c > a + b + slack {
        return Err(Error::Infeasible(format!("side lengths {sides:?} violate the triangle inequality")));
    }
    let perimeter = a + b + c;
    if let Some(d) = diameter_of_model(kappa).finite() {
        if perimeter >= 2.0 * d {
            return Err(Error::Infeasible(format!(
                "perimeter {perimeter} must be below 2 D_kappa = {}",
                2.0 * d
            )));
        }
    }
    Ok(())
}

/// Angle at the vertex between sides `a` and `b`, opposite side `opposite`,
/// by the law of cosines of M²(κ).
pub fn comparison_angle(a: f64, b: f64, opposite: f64, kappa: f64) -> Result<f64> {
    check_lengths([a, b, opposite], kappa)?;
    if a == 0.0 || b == 0.0 {
        return Err(Error::UndefinedAngle(format!("degenerate side ({a}, {b})")));
    }
    let cos = if kappa > 0.0 {
        let s = kappa.sqrt();
        let (a, b, c) = (a * s, b * s, opposite * s);
        (c.cos() - a.cos() * b.cos()) / (a.sin() * b.sin())
    } else if kappa < 0.0 {
        let s = (-kappa).sqrt();
        let (a, b, c) = (a * s, b * s, opposite * s);
        (a.cosh() * b.cosh() - c.cosh()) / (a.sinh() * b.sinh())
    } else {
        (a * a + b * b - opposite * opposite) / (2.0 * a * b)
    };
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// Comparison triangle for side lengths a = d(x,y), b = d(y,z), c = d(z,x).
///
/// x̄ sits at the chart origin, ȳ on the first tangent axis, z̄ in the
/// half-plane of positive second tangent coordinate.
pub fn comparison_triangle(a: f64, b: f64, c: f64, kappa: f64) -> Result<ComparisonTriangle> {
    check_lengths([a, b, c], kappa)?;
    let surface = model_surface(kappa);
    let origin = surface.origin();
    let e1 = surface.basis_tangent(&origin, 0);
    let e2 = surface.basis_tangent(&origin, 1);
    let y = surface.exp(&origin, &scaled(&e1, a));
    let angle = if a == 0.0 || c == 0.0 { 0.0 } else { comparison_angle(a, c, b, kappa)? };
    let dir: Vec<f64> = e1
        .iter()
        .zip(&e2)
        .map(|(u, v)| angle.cos() * u + angle.sin() * v)
        .collect();
    let z = surface.exp(&origin, &scaled(&dir, c));
    Ok(ComparisonTriangle { side_lengths: [a, b, c], vertices: [origin, y, z], kappa })
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}
