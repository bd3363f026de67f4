//! Weighted Bergman kernels and radial balanced metrics on the unit disk.
//!
//! The crate computes moment tables of radial weights (exactly, or at a fixed
//! binary precision), assembles the diagonal kernel series `sum x^j / I_j`,
//! checks the balanced identity `2 lambda^2 / f^3 = sum x^j / I_j` and its
//! simplex generalisation, runs a damped balancing iteration whose analytic
//! fixed point is the hyperbolic weight `lambda (1 - x)`, and reports the
//! boundary diagnostics (derivatives at `x = 1`, the `a_j` sequence, the
//! remainder `z(x)`).

pub mod asymptotics;
pub mod balancing;
pub mod error;
pub mod geometry;
pub mod moments;
pub mod scalar;
pub mod series;
pub mod weight;

pub use asymptotics::{AsymptoticsReport, BoundaryProfile, LemmaOResult};
pub use balancing::{IterateOptions, IterationTrace, ResidualReport};
pub use error::{Error, Result};
pub use geometry::{KernelDiagnostic, PotentialProfile};
pub use moments::MomentTable;
pub use scalar::{parse_rational, Backend, Scalar, DEFAULT_PRECISION_BITS};
pub use series::{ArithOp, Evaluation, MultiIndex, SeriesJson, TailBound, TruncatedSeries};
pub use weight::{GridPoint, RadialWeight};

pub use rug;
