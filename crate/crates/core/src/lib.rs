//! Distribution-of-relaxation-times (DRT) deconvolution of impedance
//! spectra and LSTM-based state-of-health estimation built on it.

pub mod drt;
pub mod eis;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod linalg;
pub mod soh;
pub mod synthetic;

pub use error::{Error, Result};
