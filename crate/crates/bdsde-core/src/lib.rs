//! Simulation toolkit for backward doubly stochastic differential equations
//! (BDSDEs)
//!
//! A BDSDE couples a terminal condition `xi` with a pair of coefficients
//! `(f, g)` through two independent Brownian drivers: a forward Itô integral
//! against `W` and a backward Itô integral against `B`,
//!
//! ```text
//! Y_t = xi + ∫_t^T f(s, Y_s, Z_s) ds + ∫_t^T g(s, Y_s, Z_s) d̄B_s − ∫_t^T Z_s dW_s .
//! ```
//!
//! The crate provides, in simulation form, everything needed to study such
//! equations with merely p-integrable data and monotone (one-sided Lipschitz)
//! drift coefficients:
//!
//! - [`grid`] / [`brownian`]: uniform time grids and bit-reproducible,
//!   counter-seeded ensembles of the two drivers, with an optional refinement
//!   coupling used by convergence studies.
//! - [`calculus`]: discrete forward/backward Itô integrals, the smoothed norm
//!   `u_ε(x) = (|x|² + ε²)^{1/2}`, and Monte Carlo checkers for the
//!   generalized Itô–Tanaka identity of `|x|^p` and its BDSDE corollary.
//! - [`generator`] / [`truncation`] / [`catalog`]: the data triple
//!   `(xi, f, g)`, sampling-based validators for the structural assumptions,
//!   and the radial truncations used to reduce p-integrable data to the
//!   bounded case.
//! - [`solver`]: backward-induction least-squares Monte Carlo solver
//!   conditioned on a frozen backward-driver path, together with a nested
//!   Monte Carlo oracle for tiny instances.
//! - [`estimates`]: empirical a priori estimate ratios, truncation
//!   boundedness probes, Cauchy studies in n, uniqueness probes and
//!   convergence tables.
//!
//! Everything in this crate is `no_std`-compatible (with `alloc`); all
//! randomness is a pure function of `(seed, path, step, tag)` so results do
//! not depend on evaluation order.
//!
//! ```
//! use bdsde_core::brownian::sample_brownian;
//! use bdsde_core::catalog;
//! use bdsde_core::grid::make_grid;
//! use bdsde_core::solver::{lp_norms, solve_bdsde, SolverConfig};
//!
//! # fn main() -> bdsde_core::Result<()> {
//! let grid = make_grid(1.0, 16)?;
//! let problem = catalog::build("monotone_cubic", None, None)?;
//! let bundle = sample_brownian(&grid, 512, 1, 1, 42)?;
//! let config = SolverConfig { paths: 512, basis_degree: 2, ..SolverConfig::default() };
//! let solution = solve_bdsde(&problem.gen, &grid, &bundle, &config)?;
//! let norms = lp_norms(&solution, 1.5)?;
//! assert!(norms.s_p.is_finite() && norms.m_p.is_finite());
//! # Ok(())
//! # }
//! ```

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("bdsde-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod brownian;
pub mod calculus;
pub mod catalog;
pub mod error;
pub mod estimates;
pub mod generator;
pub mod grid;
pub mod linalg;
mod math;
pub mod rng;
pub mod series;
pub mod solver;
pub mod truncation;

pub use brownian::BrownianBundle;
pub use error::{Error, Result};
pub use generator::GeneratorSpec;
pub use grid::TimeGrid;
pub use series::PathArray;
pub use solver::{SolutionEnsemble, SolverConfig};
