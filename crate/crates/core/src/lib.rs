//! Two-mode Dicke-lattice toolkit: truncated-space Hamiltonians, ground-state
//! staircases, mean-field and perturbative Mott-lobe boundaries, effective XX
//! spin-model extraction and circuit-QED parameter mapping.

pub mod circuitmap;
pub mod error;
pub mod io;
pub mod linalg;
pub mod meanfield;
pub mod model;
pub mod perturbation;
pub mod phasescan;
pub mod spectra;
pub mod spinmap;

pub use error::{Error, ErrorKind, Result};
pub use model::ModelParams;
