//! Monte Carlo simulator of linear-optical teleportation and entanglement
//! swapping, with two interchangeable physics engines: the standard quantum
//! state-vector engine and a contextual hidden-variable ("elementary state")
//! engine.
//!
//! ```
//! use telesim::experiments::{run_teleport_ideal, Runner};
//! use telesim::engine::EngineKind;
//! use telesim::qcore::C64;
//!
//! let s = 0.5f64.sqrt();
//! let stats = run_teleport_ideal(C64::new(s, 0.0), C64::new(0.0, s), 1000, EngineKind::StandardQm, &Runner::new(1)).unwrap();
//! assert!((stats.post_correction_fidelity() - 1.0).abs() < 1e-12);
//! ```

pub mod cli;
pub mod detection;
pub mod elementary;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod optics;
pub mod qcore;
pub mod sources;

pub use error::{Error, Result};

// The guide's listings, compiled and run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/optics.md")]
    mod optics {}
    #[doc = include_str!("../../../book/src/elementary.md")]
    mod elementary {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
