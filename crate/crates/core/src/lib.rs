//! Numerical toolkit for rational self-maps of the complex projective plane
//! with an invariant elliptic curve: Lyapunov exponents of the curve's
//! canonical measure, the transverse-contraction criterion, and Monte Carlo
//! measurement of the curve's basin of attraction.

pub mod basin;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod lyapunov;
pub mod poly;
pub mod projective;
pub mod ratmap;
pub mod rng;
pub mod stats;
pub mod systems;

pub use error::{Error, Result};
pub use poly::HomPoly;
pub use projective::{ProjPoint, C64};
pub use ratmap::RationalMap;
