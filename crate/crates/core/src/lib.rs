//! Numerical laboratory for parabolic nonlinear potential theory.
//!
//! Space-time points are `(x, t)` with `x` in `R^d`; the homogeneous
//! dimension is `n = d + 2` and everything scales under `(x, t) -> (λx, λ²t)`.
//!
//! The crate is organised bottom-up: [`geometry`] and [`kernels`] hold the
//! pointwise objects, [`measure`] and [`lattice`] the discrete surrogates for
//! measures, sets and the dyadic tiling, [`wolff`] the potentials and energies,
//! [`capacity`] the convex solvers and [`thinness`] the Wiener-type series.

pub mod capacity;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod lattice;
pub mod measure;
pub mod rng;
pub mod special;
pub mod suite;
pub mod thinness;
pub mod tolerances;
pub mod wolff;

pub use error::{Error, Result};
pub use geometry::{
    BackwardBall, HeatBall, ParabolicParams, ParabolicRectangle, RectKind, SpaceTimePoint,
};
pub use lattice::{DyadicRectangle, ParabolicLattice};
pub use measure::{DiscreteMeasure, RegionSet, Shape};
