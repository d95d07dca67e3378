//! Passive direction-of-arrival estimation through a reconfigurable
//! intelligent surface (RIS) observed by a single-antenna sensor.

pub mod anm;
pub mod baselines;
pub mod crlb;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod measmat;
pub mod scene;
pub mod sdp;
pub mod signal;
pub mod subspace;

pub use error::{Error, Result};
