//! Finite-temperature dynamics of the quantum Rabi model
//!
//! ```text
//! H = (ε/2) σz + V σx + ħω a†a + (λ/2) σz (a + a†)
//! ```
//!
//! with the spin starting in `|+⟩` and the oscillator in a thermal state.
//! Six routes to the population difference `P_z(t) = ⟨σz⟩` are provided:
//!
//! - [`exact`]: spectral propagation in a truncated Fock basis (reference);
//! - [`d1`]: the zero-temperature Davydov D1 trial state;
//! - [`boltzmann`]: one D1 trajectory per oscillator level, weighted
//!   afterwards, and the thermally averaged equations derived from it;
//! - [`stochastic`]: D1 dynamics on random-sign thermal superpositions;
//! - [`pfunction`]: D1 dynamics from coherent states drawn from the
//!   Glauber P-function.
//!
//! Every method returns an [`ObservableSeries`]; [`compare_series`] measures
//! the distance between two of them.
//!
//! ```
//! use rabi_thermal::{exact, ode, ModelParams, ThermalConfig};
//!
//! let params = ModelParams::default();
//! let grid = ode::uniform_grid(10.0, 1.0).unwrap();
//! let run = exact::population_difference_qm(1.0, &params, &ThermalConfig::default(), &grid).unwrap();
//! assert_eq!(run.series.pz[0], 1.0);
//! ```

pub mod boltzmann;
pub mod d1;
mod ensemble;
pub mod error;
pub mod exact;
pub mod io;
pub mod model;
pub mod observables;
pub mod ode;
pub mod pfunction;
pub mod special;
pub mod stochastic;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/davydov.md")]
    mod davydov {}
    #[doc = include_str!("../../../book/src/boltzmann.md")]
    mod boltzmann {}
    #[doc = include_str!("../../../book/src/stochastic.md")]
    mod stochastic {}
    #[doc = include_str!("../../../book/src/pfunction.md")]
    mod pfunction {}
    #[doc = include_str!("../../../book/src/observables.md")]
    mod observables {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

pub use d1::{D1State, Trajectory};
pub use error::{Error, Result};
pub use model::{ModelParams, ThermalConfig};
pub use observables::{compare_series, Comparison, Fingerprint, Method, ObservableSeries};
pub use ode::{IntegratorConfig, Mode};
pub use stochastic::SignRealization;
