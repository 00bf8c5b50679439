//! Quantum state engineering with click-counting detectors.
//!
//! A click-counting detector splits a light mode over `N` on-off diodes of
//! efficiency `η` and reports how many of them fired. This crate provides
//!
//! * [`dsymbol`] — the combinatorial kernel `D^{τ,σ}_{k,m}` behind every
//!   click probability, with a stable recursion, a double-double direct sum
//!   and an exact rational oracle;
//! * [`povm`] — click POVM elements, click statistics and the comparison
//!   with photoelectric counting;
//! * [`pfunc`] — P functions as Gaussian/delta mixtures, closed under loss,
//!   amplifier noise and click conditioning;
//! * [`processes`] — heralding, photon subtraction, photon addition and
//!   their `(k₁, k₂)` composition, with closed-form probabilities;
//! * [`fock`] — a truncated Fock-space oracle used to validate all of the
//!   above by brute force.
//!
//! The numerics are generic over the scalar type (`f32`, `f64`, and exact
//! rationals for the D-symbol); the aliases below fix `f64`.
//!
//! ```
//! use clickcraft_core::{AdditionSpec64, DetectorConfig64, PhaseSpaceMixture64};
//! use clickcraft_core::fock::SqueezerConfig;
//! use clickcraft_core::processes::add;
//!
//! let det = DetectorConfig64::new(16, 0.8)?;
//! let spec = AdditionSpec64::new(SqueezerConfig::from_mu(1.4)?, det, 1)?;
//! let out = add(&PhaseSpaceMixture64::thermal(0.5)?, &spec)?;
//! assert!(out.probability > 0.0 && out.probability < 1.0);
//! # Ok::<(), clickcraft_core::Error>(())
//! ```

pub mod dsymbol;
pub mod error;
pub mod fock;
pub mod outcome;
pub mod pfunc;
pub mod povm;
pub mod processes;
pub mod scalar;

pub use error::{Error, Result};
pub use outcome::ProcessOutcome;

/// Library version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type DSymbolParams64 = dsymbol::DSymbolParams<f64>;
pub type DSymbolTable64 = dsymbol::DSymbolTable<f64>;
pub type DSymbolTableExact = dsymbol::DSymbolTable<num_rational::BigRational>;
pub type DetectorConfig64 = povm::DetectorConfig<f64>;
pub type DetectorConfig32 = povm::DetectorConfig<f32>;
pub type ClickDistribution64 = povm::ClickDistribution<f64>;
pub type PhaseSpaceMixture64 = pfunc::PhaseSpaceMixture<f64>;
pub type PhaseSpaceMixture32 = pfunc::PhaseSpaceMixture<f32>;
pub type SubtractionSpec64 = processes::SubtractionSpec<f64>;
pub type AdditionSpec64 = processes::AdditionSpec<f64>;
pub type AmplifySpec64 = processes::AmplifySpec<f64>;
pub type Complex64 = num_complex::Complex64;
