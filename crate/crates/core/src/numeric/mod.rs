//! Dense numeric substrate: vectors as `f64` slices, row-major matrices,
//! named parameter stores, Adam and a finite-difference gradient checker.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod matrix;
mod ops;
mod store;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use matrix::Matrix;
pub use ops::{
    add_assign, affine, axpy, dot, log_sum_exp, mean_pool, scale, sigmoid, softmax_over_subset,
    softmax_slice, softmax_with_lse,
};
pub use store::{GradientStore, ParameterStore, Slot};
