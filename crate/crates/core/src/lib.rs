//! Optimal transport with non-convex radial costs, studied through its
//! Lagrangian (path-space) reformulations on discrete measures.
//!
//! The crate is organised bottom-up:
//!
//! - [`measures`]: finitely supported probability measures and couplings.
//! - [`costs`]: radial costs `ℓ`, sampled assumption checks and the
//!   asymptotic slope `C_ℓ`.
//! - [`mk_solver`]: exact discrete Monge–Kantorovich solver plus a
//!   permutation brute-force oracle.
//! - [`paths`]: piecewise-constant-velocity paths, their norms, the
//!   `N₁`/`N₂` functionals, modified Lagrangians and explicit constructions.
//! - [`ensembles`]: weighted path families realizing couplings, the
//!   evaluators for every path-space functional and the optimal builders.
//! - [`duality`]: infimal convolution `f^ℓ` and the terminal-cost identity.
//! - [`harness`]: seeded verification suites, reports and plot data.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to sequential iteration
//! otherwise. Every reduction is performed in a fixed order so results are
//! bit-identical across modes.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costs;
pub mod duality;
pub mod ensembles;
pub mod exec;
pub mod harness;
pub mod measures;
pub mod mk_solver;
pub mod paths;

pub use costs::{Assumption, CostFunction, CostSpec};
pub use ensembles::{BoundedCouplingTriple, TransportEnsemble};
pub use exec::ExecMode;
pub use measures::{Coupling, DiscreteMeasure};
pub use mk_solver::MkSolution;
pub use paths::{IntervalSet, SteppedPath};

/// Euclidean norm.
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two points of equal length.
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
