//! Fourier-Galerkin laboratory for the 3D vorticity equation on the unit
//! torus driven by divergence-free transport noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: the nonzero integer lattice, its sign partition, the
//!   polarization frames `a_{k,1}, a_{k,2}` and radially symmetric noise
//!   weights `theta`.
//! * [`spectral`]: divergence-free vector fields stored as Fourier
//!   coefficients, Leray projections, curl / Biot-Savart, Sobolev norms,
//!   advection by a single noise mode and the Lie derivative.
//! * [`corrector`]: the Stratonovich-to-Ito corrector `S_theta`, its gradient
//!   part, the lattice sums governing its high-mode limit and the
//!   advection-noise diagnostics.
//! * [`sde`]: complex Brownian drivers, the cut-off function and the Galerkin
//!   time integrator.
//! * [`experiments`]: deterministic reference solver, decay envelopes and the
//!   scaling-limit / long-horizon Monte-Carlo experiments.
//! * [`config`] and [`output`]: run configuration and reproducible CSV/JSON
//!   artifacts shared with the command line front end.

pub mod config;
pub mod corrector;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod output;
pub mod quadrature;
pub mod sde;
pub mod spectral;
pub mod sum;
pub mod vec3;

pub use error::{Error, Result};
pub use lattice::{Frame, SignClass, ThetaNorms, ThetaWeights, WaveVector};
pub use spectral::{ModeSet, SpectralField};
