#![allow(clippy::needless_range_loop)]

use catlab::barycenter::{barycenter, frechet_gradient, frechet_objective, orthogonal_project, ConvexSet};
use catlab::markov::{cesaro_average, validate_chain, ReversibleChain};
use catlab::measure::DiscreteMeasure;
use catlab::model_space::{comparison_triangle, model_surface};
use catlab::rng::{flat_dirichlet, seeded, TrialRng};
use catlab::space::{GeodesicSpace, SpacePoint};
use catlab::transport::wasserstein;
use proptest::prelude::*;
use rand::Rng;

fn spaces() -> Vec<GeodesicSpace> {
    vec![
        GeodesicSpace::sphere(2, 1.0),
        GeodesicSpace::sphere(3, 4.0),
        GeodesicSpace::hyperbolic(2, -1.0),
        GeodesicSpace::hyperbolic(3, -0.25),
        GeodesicSpace::euclidean(3),
        GeodesicSpace::product(vec![GeodesicSpace::sphere(2, 1.0), GeodesicSpace::euclidean(1)]),
    ]
}

/// A ball radius comfortably inside every regime of `space`.
fn small_radius(space: &GeodesicSpace) -> f64 {
    space.diameter_bound().finite().map_or(1.5, |d| d / 8.0)
}

fn points(space: &GeodesicSpace, rng: &mut TrialRng, n: usize) -> Vec<SpacePoint> {
    let r = small_radius(space);
    (0..n).map(|_| space.sample_ball_point(&space.origin(), r, rng)).collect()
}

fn measure(space: &GeodesicSpace, rng: &mut TrialRng, max_atoms: usize) -> DiscreteMeasure {
    let n = rng.random_range(1..=max_atoms);
    let atoms = points(space, rng, n);
    DiscreteMeasure::new(space.clone(), atoms, flat_dirichlet(rng, n)).unwrap()
}

fn setup(which: usize, seed: u64) -> (GeodesicSpace, TrialRng) {
    let all = spaces();
    (all[which % all.len()].clone(), seeded(seed, 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn metric_axioms(which in 0usize..6, seed in any::<u64>()) {
        let (space, mut rng) = setup(which, seed);
        let p = points(&space, &mut rng, 3);
        prop_assert_eq!(space.dist(&p[0], &p[0]), 0.0);
        prop_assert!((space.dist(&p[0], &p[1]) - space.dist(&p[1], &p[0])).abs() <= 1e-15);
        prop_assert!(space.dist(&p[0], &p[2]) <= space.dist(&p[0], &p[1]) + space.dist(&p[1], &p[2]) + 1e-12);
    }

    #[test]
    fn geodesics_have_constant_speed(which in 0usize..6, seed in any::<u64>(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let (space, mut rng) = setup(which, seed);
        let p = points(&space, &mut rng, 2);
        let d = space.dist(&p[0], &p[1]);
        let a = space.geodesic_point(&p[0], &p[1], s).unwrap();
        let b = space.geodesic_point(&p[0], &p[1], t).unwrap();
        prop_assert!((space.dist(&a, &b) - (s - t).abs() * d).abs() <= 1e-9);
        prop_assert_eq!(space.geodesic_point(&p[0], &p[1], 0.0).unwrap(), p[0].clone());
        prop_assert_eq!(space.geodesic_point(&p[0], &p[1], 1.0).unwrap(), p[1].clone());
    }

    #[test]
    fn exp_inverts_log(which in 0usize..6, seed in any::<u64>()) {
        let (space, mut rng) = setup(which, seed);
        let p = points(&space, &mut rng, 2);
        let back = space.exp(&p[0], &space.log(&p[0], &p[1]));
        prop_assert!(space.dist(&back, &p[1]) <= 1e-12);
    }

    #[test]
    fn triangles_are_thinner_than_comparison(which in 0usize..6, seed in any::<u64>(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let (space, mut rng) = setup(which, seed);
        let kappa = space.curvature_upper_bound();
        let p = points(&space, &mut rng, 3);
        let sides = [space.dist(&p[0], &p[1]), space.dist(&p[1], &p[2]), space.dist(&p[2], &p[0])];
        prop_assume!(sides.iter().all(|d| *d > 1e-9));
        let tri = comparison_triangle(sides[0], sides[1], sides[2], kappa).unwrap();
        let model = model_surface(kappa);
        let u = space.geodesic_point(&p[0], &p[1], s).unwrap();
        let v = space.geodesic_point(&p[0], &p[2], t).unwrap();
        let ub = model.geodesic_point(&tri.vertices[0], &tri.vertices[1], s).unwrap();
        let vb = model.geodesic_point(&tri.vertices[0], &tri.vertices[2], t).unwrap();
        prop_assert!(space.dist(&u, &v) <= model.dist(&ub, &vb) + 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences(which in 0usize..6, seed in any::<u64>()) {
        let (space, mut rng) = setup(which, seed);
        let mu = measure(&space, &mut rng, 5);
        let z = points(&space, &mut rng, 1).remove(0);
        let g = frechet_gradient(&z, &mu);
        let dir = space.random_unit_tangent(&z, &mut rng);
        let h = 1e-6;
        let step = |c: f64| space.exp(&z, &dir.iter().map(|x| c * x).collect::<Vec<_>>());
        let fd = (frechet_objective(&step(h), &mu).unwrap() - frechet_objective(&step(-h), &mu).unwrap()) / (2.0 * h);
        let analytic = space.inner(&g, &dir);
        prop_assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0), "fd {} vs {}", fd, analytic);
    }

    #[test]
    fn barycenter_splits_over_products(seed in any::<u64>()) {
        let factors = vec![GeodesicSpace::sphere(2, 1.0), GeodesicSpace::hyperbolic(2, -1.0)];
        let space = GeodesicSpace::product(factors);
        let mut rng = seeded(seed, 0);
        let mu = measure(&space, &mut rng, 5);
        let joint = barycenter(&mu).unwrap();
        prop_assert!(joint.gradient_norm <= 1e-10);
        let parts: Vec<SpacePoint> = mu.marginals().iter().map(|m| barycenter(m).unwrap().point).collect();
        prop_assert!(space.dist(&joint.point, &GeodesicSpace::join(&parts)) <= 1e-8);
    }

    #[test]
    fn projections_make_obtuse_angles(which in 0usize..6, seed in any::<u64>(), use_ball in any::<bool>()) {
        let (space, mut rng) = setup(which, seed);
        let p = points(&space, &mut rng, 4);
        let set = if use_ball || space.curvature_upper_bound() > 0.0 && matches!(space, GeodesicSpace::Product { .. }) {
            ConvexSet::ClosedBall { center: p[0].clone(), radius: 0.3 * small_radius(&space) }
        } else {
            ConvexSet::GeodesicSegment { a: p[0].clone(), b: p[1].clone() }
        };
        let x = &p[2];
        let proj = orthogonal_project(&space, &set, x).unwrap();
        prop_assume!(space.dist(x, &proj) > 1e-6);
        // a point of the set other than the projection
        let y = match &set {
            ConvexSet::ClosedBall { center, .. } => space.geodesic_point(center, &proj, 0.3).unwrap(),
            ConvexSet::GeodesicSegment { a, b } => space.geodesic_point(a, b, rng.random()).unwrap(),
            _ => unreachable!(),
        };
        prop_assume!(space.dist(&y, &proj) > 1e-6);
        let angle = space.angle_at(&proj, x, &y).unwrap();
        prop_assert!(angle >= std::f64::consts::FRAC_PI_2 - 1e-6, "angle {}", angle);
    }

    #[test]
    fn barycenter_stays_in_convex_hull(which in 0usize..6, seed in any::<u64>()) {
        let (space, mut rng) = setup(which, seed);
        let p = points(&space, &mut rng, 2);
        // supported on a segment
        let n = rng.random_range(1..=5);
        let atoms = (0..n).map(|_| space.geodesic_point(&p[0], &p[1], rng.random()).unwrap()).collect();
        let mu = DiscreteMeasure::new(space.clone(), atoms, flat_dirichlet(&mut rng, n)).unwrap();
        let b = barycenter(&mu).unwrap().point;
        let seg = ConvexSet::GeodesicSegment { a: p[0].clone(), b: p[1].clone() };
        prop_assert!(seg.distance_to(&space, &b).unwrap() <= 1e-8);
        // supported in a ball
        let mu = measure(&space, &mut rng, 6);
        let c = points(&space, &mut rng, 1).remove(0);
        let r = mu.atoms.iter().map(|a| space.dist(&c, a)).fold(0.0, f64::max);
        let b = barycenter(&mu).unwrap().point;
        prop_assert!(space.dist(&c, &b) <= r + 1e-10);
    }

    #[test]
    fn halfway_pushforward_keeps_the_barycenter(which in 0usize..6, seed in any::<u64>()) {
        let (space, mut rng) = setup(which, seed);
        let mu = measure(&space, &mut rng, 6);
        let b = barycenter(&mu).unwrap().point;
        let pushed = mu.pushforward(|x| space.geodesic_point(x, &b, 0.5)).unwrap();
        let b2 = barycenter(&pushed).unwrap().point;
        prop_assert!(space.dist(&b, &b2) <= 1e-7);
    }

    #[test]
    fn wasserstein_is_a_metric(which in 0usize..6, seed in any::<u64>()) {
        let (space, mut rng) = setup(which, seed);
        let m: Vec<DiscreteMeasure> = (0..3).map(|_| measure(&space, &mut rng, 5)).collect();
        for p in [1.0, 2.0] {
            let w = |a: &DiscreteMeasure, b: &DiscreteMeasure| wasserstein(p, a, b).unwrap().cost;
            prop_assert!(w(&m[0], &m[0]) <= 1e-12);
            prop_assert!((w(&m[0], &m[1]) - w(&m[1], &m[0])).abs() <= 1e-10);
            prop_assert!(w(&m[0], &m[2]) <= w(&m[0], &m[1]) + w(&m[1], &m[2]) + 1e-9);
        }
        prop_assert!(wasserstein(1.0, &m[0], &m[1]).unwrap().cost <= wasserstein(2.0, &m[0], &m[1]).unwrap().cost + 1e-10);
    }

    #[test]
    fn cesaro_averages_stay_reversible(seed in any::<u64>(), n in 1usize..9, t in 1usize..17) {
        let mut rng = seeded(seed, 0);
        let chain = ReversibleChain::random(&mut rng, n);
        prop_assert!(validate_chain(&chain).valid);
        let avg = cesaro_average(&chain.a, t).unwrap();
        for i in 0..n {
            prop_assert!((avg[i].iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            for j in 0..n {
                prop_assert!((chain.pi[i] * avg[i][j] - chain.pi[j] * avg[j][i]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn ball_retraction_is_one_lipschitz(which in 0usize..6, seed in any::<u64>()) {
        let (space, mut rng) = setup(which, seed);
        let r = small_radius(&space);
        let ball = ConvexSet::ClosedBall { center: space.origin(), radius: 0.5 * r };
        let x = space.sample_ball_point(&space.origin(), 2.0 * r, &mut rng);
        let y = space.sample_ball_point(&space.origin(), 2.0 * r, &mut rng);
        let (px, py) = (orthogonal_project(&space, &ball, &x).unwrap(), orthogonal_project(&space, &ball, &y).unwrap());
        prop_assert!(space.dist(&px, &py) <= space.dist(&x, &y) + 1e-12);
    }
}
