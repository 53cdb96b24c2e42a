//! Integrable systems toolkit: integrable modulations of the harmonic
//! oscillator and the N-dimensional Euler top, smooth integrals of the
//! cotangent-lifted cat map, the exact Bachet duplication map with its
//! commuting family, and Knörrer's map from quadric geodesics to the Neumann
//! system together with the geodesically equivalent metric.

pub mod bachet;
pub mod catmap;
pub mod error;
pub mod euler_top;
pub mod modulation;
pub mod numerics;
pub mod quadrics;

pub use error::{Error, Result};
pub use numerics::{IntegratorConfig, SkewMatrix, SquareMatrix, SymMatrix, Trajectory};
