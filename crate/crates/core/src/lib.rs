pub mod bounds;
pub mod cli;
pub mod dense;
pub mod driver;
pub mod error;
pub mod experiments;
pub mod frechet;
pub mod io;
pub mod kernels;
pub mod krylov;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
