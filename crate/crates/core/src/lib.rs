//! Near-field integrated sensing and communication for extremely large
//! arrays: array responses, trade-off precoding, 2-D MUSIC, Cramér-Rao
//! bounds, QoS power minimization and a reproducible Monte-Carlo harness.

pub mod error;
pub mod experiments;
pub mod beamform;
pub mod channel;
pub mod cli;
pub mod crb;
pub mod geometry;
pub mod numkernel;
pub mod powermin;
pub mod sensing;

pub use error::{Error, Result};
