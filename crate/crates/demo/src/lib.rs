//! Browser bindings for three small catlab computations on the unit sphere.
//!
//! Points on the sphere are exchanged with the page in the geodesic polar
//! chart at the base point (1, 0, 0): a pair (u, v) is the point reached by
//! walking distance √(u² + v²) in the direction (u, v).

use catlab::barycenter::barycenter;
use catlab::lab::check_uniform_convexity;
use catlab::measure::DiscreteMeasure;
use catlab::model_space::{effective_constants, CurvatureClass};
use catlab::rng::seeded;
use catlab::space::{GeodesicSpace, SpacePoint};
use rand::Rng;
use wasm_bindgen::prelude::*;

fn unit_sphere() -> GeodesicSpace {
    GeodesicSpace::sphere(2, 1.0)
}

fn from_chart(space: &GeodesicSpace, u: f64, v: f64) -> SpacePoint {
    space.exp(&space.origin(), &[0.0, u, v])
}

fn to_chart(space: &GeodesicSpace, p: &SpacePoint) -> (f64, f64) {
    let w = space.log(&space.origin(), p);
    (w[1], w[2])
}

/// Rows (ε, k, Γ, C) for `samples` values of ε spread over (0, 1).
pub fn constants_table(kappa: f64, samples: usize) -> catlab::Result<Vec<f64>> {
    let mut rows = Vec::with_capacity(4 * samples);
    for i in 0..samples {
        let eps = (i as f64 + 0.5) / samples as f64;
        let c = effective_constants(&CurvatureClass::new(kappa, eps)?);
        rows.extend([eps, c.k, c.gamma, c.c_ext]);
    }
    Ok(rows)
}

/// Chart coordinates of the barycenter of the uniform measure on `chart`
/// (flattened (u, v) pairs), then its objective, then the chart mean.
pub fn cap_barycenter(chart: &[f64]) -> catlab::Result<Vec<f64>> {
    let space = unit_sphere();
    let atoms: Vec<SpacePoint> = chart.chunks_exact(2).map(|c| from_chart(&space, c[0], c[1])).collect();
    let n = atoms.len() as f64;
    let b = barycenter(&DiscreteMeasure::uniform(space.clone(), atoms)?)?;
    let (u, v) = to_chart(&space, &b.point);
    let mean_u = chart.iter().step_by(2).sum::<f64>() / n;
    let mean_v = chart.iter().skip(1).step_by(2).sum::<f64>() / n;
    Ok(vec![u, v, b.objective, mean_u, mean_v])
}

/// Slacks of the uniform convexity inequality on random triples in the ball
/// of radius D_{1,ε}/4, with k = k_ε.
pub fn convexity_slacks(epsilon: f64, trials: usize, seed: u64) -> catlab::Result<Vec<f64>> {
    let cc = CurvatureClass::new(1.0, epsilon)?;
    let space = unit_sphere();
    let center = space.origin();
    let radius = cc.quarter_radius().finite().expect("positive curvature has a finite diameter");
    (0..trials)
        .map(|i| {
            let mut rng = seeded(seed, i as u64);
            let [x, y, z] = [(); 3].map(|_| space.sample_ball_point(&center, radius, &mut rng));
            let t = rng.random::<f64>();
            Ok(check_uniform_convexity(&space, &cc, &x, &y, &z, t, 0.0, String::new())?.slack)
        })
        .collect()
}

fn js(e: catlab::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = constantsTable)]
pub fn constants_table_js(kappa: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    constants_table(kappa, samples).map_err(js)
}

#[wasm_bindgen(js_name = capBarycenter)]
pub fn cap_barycenter_js(chart: &[f64]) -> Result<Vec<f64>, JsError> {
    cap_barycenter(chart).map_err(js)
}

#[wasm_bindgen(js_name = convexitySlacks)]
pub fn convexity_slacks_js(epsilon: f64, trials: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    convexity_slacks(epsilon, trials, u64::from(seed)).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_round_trip() {
        let s = unit_sphere();
        let (u, v) = to_chart(&s, &from_chart(&s, 0.3, -0.2));
        assert!((u - 0.3).abs() < 1e-14 && (v + 0.2).abs() < 1e-14);
    }

    #[test]
    fn symmetric_pair_has_the_midpoint_as_barycenter() {
        let r = cap_barycenter(&[0.4, 0.0, -0.4, 0.0]).unwrap();
        assert!(r[0].abs() < 1e-10 && r[1].abs() < 1e-10);
        assert!((r[2] - 0.16).abs() < 1e-10);
    }

    #[test]
    fn constants_rows() {
        let t = constants_table(1.0, 4).unwrap();
        assert_eq!(t.len(), 16);
        assert!(t.chunks(4).all(|r| r[2] >= 1.0 && r[3] >= r[2]));
    }

    #[test]
    fn slacks_are_nonnegative_in_regime() {
        let s = convexity_slacks(0.5, 200, 1).unwrap();
        assert!(s.iter().all(|&x| x >= -1e-9));
        assert!(convexity_slacks(1.5, 1, 1).is_err());
    }
}
