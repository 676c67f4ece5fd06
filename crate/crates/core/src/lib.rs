//! Numerical laboratory for small CAT(κ) spaces.
//!
//! The crate computes Fréchet barycenters, exact Wasserstein distances,
//! orthogonal projections and finite Lipschitz extensions on spheres,
//! hyperbolic spaces, Euclidean spaces and their products, and checks the
//! quantitative convexity inequalities these spaces satisfy (uniform
//! convexity, variance inequality, Jensen, Pisier, barycenter Lipschitz
//! bounds, Markov type and metric Markov cotype) on seeded random sweeps.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod barycenter;
pub mod cli;
pub mod error;
pub mod extension;
pub mod io;
pub mod lab;
pub mod markov;
pub mod measure;
pub mod model_space;
pub mod rng;
pub mod space;
pub mod transport;

pub use barycenter::{barycenter, conditional_barycenter, frechet_objective, orthogonal_project, BarycenterResult, ConvexSet, Filtration};
pub use error::{Error, Result};
pub use measure::{Coupling, DiscreteMeasure};
pub use model_space::{effective_constants, CurvatureClass, EffectiveConstants, Extended};
pub use space::{GeodesicSpace, SpacePoint};
pub use transport::wasserstein;
