//! Moving dielectric slabs: guided modes across frames, coupling between
//! counter-moving slabs, a discretized non-Hermitian spectral problem and a
//! truncated two-mode quantum model.

pub mod error;
pub mod exec;
pub mod media;
pub mod profile;
pub mod slabmodes;
pub mod coupling;
pub mod ode;
pub mod quantum;
pub mod linalg;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::ExecMode;
