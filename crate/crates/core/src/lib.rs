//! Monte Carlo and exact-computation toolkit for the one-dimensional continuum
//! Ising model that arises from the spin boson model.
//!
//! The crate covers
//!
//! * [`kernel`]: the interaction kernel `g(t) = ∫|v(k)|² e^{-|t|ω(k)} dk` and
//!   its antiderivatives,
//! * [`ising_continuum`]: path-space Metropolis sampling of the continuum
//!   Ising measure and the vacuum-overlap / susceptibility estimators built
//!   on it,
//! * [`ising_discrete`]: the lattice discretization, exact enumeration and the
//!   Edwards–Sokal (FK) coupling,
//! * [`percolation`]: the continuum percolation and the derived site-bond
//!   models used to lower-bound spin correlations,
//! * [`fock`]: an exact finite-mode spin boson Hamiltonian used as an oracle,
//! * [`experiment`] and [`acceptance`]: config-driven runs and the bundled
//!   verification battery.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod ising_continuum;
pub mod ising_discrete;
pub mod kernel;
pub mod output;
pub mod percolation;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod union_find;

pub use error::{Error, Result};
pub use kernel::{Kernel, SpectralData};
pub use stats::Estimate;
