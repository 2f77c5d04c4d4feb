pub mod atomic;
pub mod bessel;
pub mod constants;
pub mod error;
pub mod fiber;
pub mod quadrature;
pub mod spectroscopy;
pub mod trap;

pub use error::{Boundary, Error, Result};
pub use fiber::{effective_mode_area, he11_eigenvalue_fn, solve_he11, CoreIndex, FiberSpec, FieldSample, GuidedMode};
