//! Momentum maps, complexified gradient flows, orbital convexity, equivariant
//! extension, Kähler-potential gluing and the binary-cubics slice
//! counterexample, on linear models.

pub mod cubics;
pub mod error;
pub mod extend;
pub mod flow;
pub mod glue;
pub mod linalg;
pub mod moment;
pub mod ode;
pub mod sampling;

pub use error::{Error, Result};
pub use linalg::{c, CVec, ComplexMatrix, LieAlgebraElement, C64};
