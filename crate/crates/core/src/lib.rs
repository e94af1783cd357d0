pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod normalform;
pub mod spectral;
pub mod state;


pub use error::{Result, WaveError};
pub use rustfft::num_complex::Complex64;
