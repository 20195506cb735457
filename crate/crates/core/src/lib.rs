//! Cell-centred finite volume solver for the one-dimensional problem
//!
//! ```text
//! d/dt h(v) = d/dx (dv/dx + b(v) p)    on (0, T) x (0, 1)
//! dv/dx + b(v) p = 0                   at x = 0 and x = 1
//! v(0, x) = v0(x)
//! ```
//!
//! together with the tooling needed to check its behaviour empirically:
//! nested-grid error measurement, observed-order fitting, uniform-bound
//! monitors, randomized checks of two Gagliardo–Nirenberg type
//! inequalities, and a weak-form residual.
//!
//! Module map:
//!
//! - [`grid`]: uniform grids, cell fields, projections and the discrete
//!   difference / midpoint / reconstruction operators.
//! - [`problem`]: coefficient families for `h`, `b`, `p`, `v0` and the
//!   runtime check of their declared bounds.
//! - [`scheme`]: face fluxes, the semi-discrete right-hand side, its
//!   tridiagonal Jacobian and the conserved mass.
//! - [`stepper`]: conservative implicit Euler with Newton, and an
//!   adaptive Dormand–Prince 5(4) pair.
//! - [`analysis`]: norms, error tables, monitors, inequality checkers.
//! - [`cli`]: configuration-driven experiment commands.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod problem;
pub mod quadrature;
pub mod scheme;
pub mod stepper;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::{CellField, DerivedField, DerivedKind, Grid};
pub use problem::ProblemSpec;
pub use stepper::{Method, StepControl, Trajectory};
