//! Multi-cell 3D (UAV) network simulator and the reinforcement-learning stack
//! that tunes per-cell transmit power and analog beams for sum-rate.

pub mod agents;
pub mod baselines;
pub mod channel;
pub mod environment;
pub mod error;
pub mod harness;
pub mod neural;
pub mod radio;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
