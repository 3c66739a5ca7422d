//! The scaled two-variable flow-reactor model: parameters, vector field,
//! heat-rate diagrams, rate-prefactor calibration and presets.

mod calibrate;
mod field;
mod params;
pub mod presets;
mod rates;

pub use calibrate::{calibrate_sigma, Calibration, CalibrationTargets, STEADY_TARGET_BAND};
pub use field::{jacobian, vector_field, PlanarField, Tensor2, Tensor3};
pub use params::{
    dimensionalize, nondimensionalize, DimensionalParams, ModelParams, Parameter, State,
    TemperatureScale, GAS_CONSTANT,
};
pub use presets::{preset, Preset, PRESET_NAMES};
pub use rates::{heat_balance_roots, rate_diagram, RateDiagram};

#[cfg(test)]
mod tests;
