//! Monte Carlo asset-liability engine for a defined-benefit pension plan.
//!
//! The minimal initial capital that makes terminal wealth acceptable under
//! an entropic (or risk-neutral) criterion is computed over scenarios of
//! mortality, interest rates, equities and inflation, with survivor counts
//! either sampled binomially (finite pools) or taken at their expectation
//! (systematic risk only).

pub mod calibration;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mortality;
pub mod plan;
pub mod rng;
pub mod scenario;
pub mod sum;
pub mod valuation;

pub use error::{Error, Result};
