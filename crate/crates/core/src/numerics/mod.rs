//! Shared numerical kernel: small dense linear algebra, Runge–Kutta
//! integration with constraint projection, and trapezoid quadrature.

mod constraint;
mod eigen;
mod matrix;
mod ode;
mod quadrature;

pub use constraint::{project_in_place, project_to_constraints, Constraint, FnConstraint};
pub use eigen::{eigenvalues, sym_eigen, sym_sqrt_psd, EigenDecomposition, PD_EPSILON};
pub use matrix::{dot, norm, solve_dense, SkewMatrix, SquareMatrix, SymMatrix};
pub use ode::{integrate, integrate_sampled, FnSystem, IntegratorConfig, Method, OdeSystem, Trajectory};
pub use quadrature::cumulative_quadrature;
