//! Numerical tools for block D-stability of partitioned matrices and for
//! decentralized low-gain integral control of stable LTI plants.

pub mod blockmat;
pub mod dstab;
pub mod error;
pub mod intctl;
pub mod lyap;
pub mod scalingseq;
pub mod sim;

pub use error::{Error, Result};
