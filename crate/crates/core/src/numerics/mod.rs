//! Numeric substrate: dense matrices, parameter registry, seeded RNG, Adam,
//! a Jacobi eigensolver and a finite-difference gradient checker.

mod adam;
mod eigen;
mod gradcheck;
mod matrix;
mod param;
mod rng;

pub use adam::{adam_step, Adam, AdamConfig};
pub use eigen::jacobi_eigen_symmetric;
pub use gradcheck::{finite_diff_check, GradCheckReport, ABS_FLOOR};
pub use matrix::{dot, matmul, sigmoid, softmax_row, squared_distance, Matrix};
pub use param::{GradBuffer, Param, ParamId, ParamSet};
pub use rng::Rng;
