//! Numerical joint holomorphic functional calculus for commuting tuples of
//! sectorial matrices on finite-dimensional normed models.
//!
//! The crate computes `f(A_1, ..., A_d)` for functions holomorphic on products
//! of sectors by quadrature of the resolvent contour integral, cross-checks the
//! result against an exact spectral oracle, and ships verification suites for
//! the surrounding machinery: sectoriality profiles, R-bounds, gamma-norms and
//! square functions, semigroup dilations into commuting shift groups, and
//! Fourier-multiplier bounds for group generators.
//!
//! Entry points by theme:
//!
//! * [`linalg`] — complex matrices, decompositions, `expm`, principal square
//!   roots.
//! * [`space`] — Euclidean / `l^p` / Schatten models and operator norms.
//! * [`operator`] — commuting tuples, resolvents, sectoriality profiles,
//!   joint diagonalization, ergodic splittings.
//! * [`sector`] — expression trees for holomorphic functions on sectors,
//!   decay certificates, sup-norm estimation, unit decompositions.
//! * [`contour`] — the contour functional calculus, the spectral oracle and
//!   calculus-constant estimators.
//! * [`stochastic`] — Rademacher/Gaussian averages, R-bounds, gamma-norms.
//! * [`sqfn`] — discretized square functions and the reproducing formula.
//! * [`dilation`] — grid dilations of analytic semigroups, shift groups and
//!   multiplier norms.
//! * [`report`] — problem files, verification suites and report emission.
//!
//! The `examples/` directory contains one runnable example per capability;
//! the thin `hfc` binary drives the same suites from problem files.

pub mod config;
pub mod contour;
pub mod dilation;
pub mod error;
pub mod linalg;
pub mod operator;
pub mod report;
pub mod sector;
pub mod space;
pub mod sqfn;
pub mod stochastic;

pub use error::{HfcError, Result};
pub use linalg::{CMatrix, CVector, C64};
pub use space::{SpaceKind, SpaceModel};
