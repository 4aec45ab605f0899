//! Pseudo-spectral solver for the inertial Qian-Sheng model of nematic liquid
//! crystals, with energy diagnostics and a radial twist-wave solver.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod params;
pub mod spectral;
pub mod tensor;
pub mod twistwave;

pub use dynamics::{Engine, Integrator, Mode, SimState, SpectralState, Tendencies};
pub use error::{QshError, Result};
pub use params::{preset_mbba, validate, validate_coercivity, Coefficients, Regime, ValidationReport};
pub use spectral::{Field, Grid, Rank, SpectralField};
pub use tensor::{Mat, QTensor};
pub use twistwave::{RadialGrid, RadialState};
