//! Adaptive linear-quadratic self-tuning regulation for uncertain LTI
//! systems: matrix kernels, ground-truth LQ design, the scalar-regressor
//! identification pipeline, the gain-scheduled adaptive law, and a
//! fixed-step closed-loop simulator.

mod dd;
pub mod error;
pub mod mat;
pub mod expm;
pub mod eig;
pub mod lq;
pub mod drem;
pub mod adapt;
pub mod sim;

pub use error::{Error, Result};
pub use mat::Mat;
pub use eig::{eigenvalues, Spectrum};
