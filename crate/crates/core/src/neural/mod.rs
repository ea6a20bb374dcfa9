//! A small dense-network toolkit: rectifier MLPs with hand-written
//! backpropagation, Adam, experience replay and a finite-difference checker.

mod adam;
mod gradcheck;
mod mlp;
mod replay;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub(crate) use mlp::read_u32;
pub use mlp::{Mlp, Trace, MLP_MAGIC};
pub use replay::{ReplayBuffer, SharedReplayBuffer, Transition};

/// Huber loss with unit threshold and its derivative with respect to `err`.
pub fn huber(err: f64) -> (f64, f64) {
    if err.abs() <= 1.0 {
        (0.5 * err * err, err)
    } else {
        (err.abs() - 0.5, err.signum())
    }
}
