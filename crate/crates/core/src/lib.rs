//! Cramér-Rao bounds and transmit beamforming for joint bistatic positioning (BP,
//! the UE locating itself from downlink pilots) and monostatic sensing (MS, the BS
//! locating the UE and passive targets from echoes) in a MIMO-OFDM downlink.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: configuration, geometry, and the geometry → channel-parameter maps.
//! - [`array`]: ULA steering vectors and their angle derivatives.
//! - [`channel`]: per-subcarrier channel matrices and their analytic partials.
//! - [`fim`]: channel/position-domain Fisher information, Jacobians, EFIM, CRBs.
//! - [`optimize`]: weighted-sum CRB SDPs, mismatch schemes, codebook baselines.
//! - [`conic`]: the conic-solver boundary used by every SDP in [`optimize`].
//! - [`sweep`]: tradeoff sweeps, beampatterns, CSV artifacts and run manifests.
//! - [`config`]: TOML run configuration.
//! - [`hermitian`]: real coordinates for Hermitian matrices.
//! - [`par`]: rayon-backed execution with a sequential fallback.

// Links the system BLAS/LAPACK used by the PSD cones.
extern crate openblas_src as _;

pub mod array;
pub mod channel;
pub mod conic;
pub mod config;
pub mod error;
pub mod fim;
pub mod hermitian;
pub mod optimize;
pub mod par;
pub mod scenario;
pub mod sweep;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
