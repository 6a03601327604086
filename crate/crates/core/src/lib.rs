//! Truncated Fock-space simulator for a Kerr parametric oscillator (KPO).
//!
//! The rotating-frame Hamiltonian is
//!
//! ```text
//! H = (χ/2) a†a†aa + Δ a†a + p (a² + a†²)
//! ```
//!
//! with single-photon loss at rate κ = κ_e + κ_i. The crate covers exact
//! spectra and multiphoton degeneracies ([`spectral`]), closed and open time
//! evolution ([`dynamics`]), Liouvillian steady states ([`steadystate`]) and
//! detuning × drive maps ([`sweep`]).
//!
//! All rates are angular frequencies in rad/µs and times are in µs. Values
//! quoted as "X/2π in MHz" convert through [`units`].
//!
//! ```
//! use kpo_core::spectral::{degeneracy_detuning, energy_splitting, pair_at};
//! use kpo_core::steadystate::{solve_steady_state, steady_photon_number};
//! use kpo_core::units::{mhz, to_mhz};
//! use kpo_core::{FockSpace, KpoParams};
//!
//! let space = FockSpace::new(20)?;
//! let delta = degeneracy_detuning(18.0, 4)?;
//! let params = KpoParams::from_mhz(18.0, delta, 0.5);
//! let split = to_mhz(energy_splitting(&pair_at(space, &params, 4)?).abs());
//! assert!((split - 0.0679).abs() < 1e-3);
//!
//! let lossy = params.with_dissipation(mhz(0.47), mhz(0.26));
//! let n = steady_photon_number(&solve_steady_state(space, &lossy)?.state)?;
//! assert!(n > 0.0);
//! # Ok::<(), kpo_core::KpoError>(())
//! ```

pub mod dynamics;
pub mod error;
pub mod fock;
mod integrator;
pub mod io;
pub mod spectral;
pub mod steadystate;
mod superop;
pub mod sweep;
pub mod units;
pub mod verify;

pub use error::{KpoError, Result};
pub use fock::{FockSpace, KpoParams, MatrixOperator, QuantumState, Sign};

/// Complex scalar used for every operator and state.
pub type C64 = num_complex::Complex64;

/// Crate version stamped into emitted metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
