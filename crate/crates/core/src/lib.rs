//! Numerical laboratory for the Steklov eigenvalue problem with frequency
//! on compact surfaces with boundary.
//!
//! The crate has two independent solution paths that cross-validate each
//! other:
//!
//! * a 2D piecewise-linear finite-element pipeline ([`mesh`] → [`assembly`]
//!   → [`dtn`]) realizing the Dirichlet-to-Neumann operator at frequency
//!   `alpha` by Schur complement, and
//! * a 1D separated-variables pipeline ([`radial`]) for rotationally
//!   symmetric metrics (spherical caps and rotational annuli), solved by
//!   shooting to high precision.
//!
//! On top of these sit the [`family`] module, which constructs the
//! rotational free-boundary minimal annuli in spherical caps, and the
//! [`theta`] module, which evaluates and maximizes the spectral functional
//! `theta = (sigma0 cos^2 r + sigma1 sin^2 r) |bd| + 2 |area|` over
//! conformal metrics.

pub mod assembly;
pub mod dtn;
pub mod error;
pub mod family;
pub mod io;
pub mod mesh;
pub mod radial;
pub mod theta;

mod band;
mod ode;
mod quad;
mod sparse;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
