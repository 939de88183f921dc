//! Complex-valued zero-sum games with deterministic and chance-constrained
//! strategy sets, solved as real second-order cone programs.

pub mod complex;
pub mod conic;
pub mod error;
pub mod games;
pub mod instances;
mod linalg;
pub mod moments;
pub mod montecarlo;
pub mod reformulate;
pub mod rng;

pub use complex::{CMat, CVec, C64};
pub use error::{Error, Player, Result};
