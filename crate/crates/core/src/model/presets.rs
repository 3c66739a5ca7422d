//! Named parameter sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::calibrate::{calibrate_sigma, Calibration, CalibrationTargets};
use crate::model::{nondimensionalize, DimensionalParams, ModelParams, GAS_CONSTANT};
use crate::scalar::Real;

pub const MIC_TANK: &str = "mic-tank610";
pub const CUMENE_HYDROPEROXIDE: &str = "cumene-hydroperoxide";
pub const PRESET_NAMES: [&str; 2] = [MIC_TANK, CUMENE_HYDROPEROXIDE];

/// Methyl isocyanate hydrolysis data (SI).
pub mod mic {
    /// Normal boiling point used as the runaway threshold, K.
    pub const BOILING_POINT: f64 = 312.0;
    /// Liquid density at 20 °C, kg/m³.
    pub const DENSITY: f64 = 959.9;
    /// Specific heat capacity, J/(K·kg).
    pub const SPECIFIC_HEAT: f64 = 1188.0;
    pub const REACTION_ENTHALPY: f64 = -65_100.0;
    pub const FREQUENCY_FACTOR: f64 = 3.9e12;
    pub const ACTIVATION_ENERGY: f64 = 64_000.0;
    /// Ambient temperature of the heat-rate diagram, K.
    pub const AMBIENT: f64 = 292.0;
    /// Ambient temperature at which the tank had been held, K.
    pub const STORAGE_AMBIENT: f64 = 286.0;
    pub const INVERSE_RESIDENCE_TIME: f64 = 1.7;
    pub const HEAT_LOSS: f64 = 700.0;
    pub const HEAT_CAPACITY_RATIO: f64 = 10.0;
    /// Reported steady reaction temperature at 292 K ambient, K.
    pub const STEADY_TARGET: f64 = 305.0;
    /// Reported Hopf ambient temperature, K.
    pub const HOPF_TARGET: f64 = 290.15;
}

/// Placeholder kinetics for the cumene hydroperoxide preset; the thermal
/// constants must be supplied by the user.
pub mod cumene {
    pub const INVERSE_RESIDENCE_TIME: f64 = 3.0;
    pub const HEAT_LOSS: f64 = 700.0;
    pub const HEAT_CAPACITY_RATIO: f64 = 20.0;
    pub const AMBIENT: f64 = 290.0;
    pub const BOILING_POINT: f64 = 400.0;
    pub const LOG_RATE_PREFACTOR: f64 = 26.8;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset<T> {
    pub name: String,
    pub dimensional: DimensionalParams<T>,
    pub model: ModelParams<T>,
    /// Runaway threshold in kelvin.
    pub boiling_kelvin: T,
    pub calibration: Option<Calibration<T>>,
    /// Fields holding placeholders the user is expected to replace.
    pub user_supplied: Vec<String>,
    pub notes: Vec<String>,
}

/// Inflow concentration giving heat-capacity ratio `eps` for the given
/// thermochemistry.
pub fn feed_concentration_for<T: Real>(heat_capacity: T, activation_energy: T, enthalpy: T, eps: T) -> T {
    heat_capacity * activation_energy / (eps * (-enthalpy) * T::lit(GAS_CONSTANT))
}

fn back_solved<T: Real>(
    heat_capacity: T,
    enthalpy: T,
    frequency: T,
    activation: T,
    ambient: T,
    f: T,
    ell: T,
    eps: T,
) -> DimensionalParams<T> {
    let volume = T::one();
    let c_f = feed_concentration_for(heat_capacity, activation, enthalpy, eps);
    DimensionalParams {
        volume,
        flow_rate: f * volume * frequency,
        feed_concentration: c_f,
        heat_capacity,
        reaction_enthalpy: enthalpy,
        heat_transfer: ell * c_f * volume * frequency * (-enthalpy) * T::lit(GAS_CONSTANT) / activation,
        ambient_temperature: ambient,
        frequency_factor: frequency,
        activation_energy: activation,
    }
}

fn mic_tank<T: Real>() -> Result<Preset<T>> {
    use mic::*;
    let l = T::lit;
    let dimensional = back_solved(
        l(SPECIFIC_HEAT * DENSITY),
        l(REACTION_ENTHALPY),
        l(FREQUENCY_FACTOR),
        l(ACTIVATION_ENERGY),
        l(AMBIENT),
        l(INVERSE_RESIDENCE_TIME),
        l(HEAT_LOSS),
        l(HEAT_CAPACITY_RATIO),
    );
    let scaled = nondimensionalize(&dimensional, l(BOILING_POINT))?;
    let template = ModelParams {
        inverse_residence_time: l(INVERSE_RESIDENCE_TIME),
        heat_loss: l(HEAT_LOSS),
        heat_capacity: l(HEAT_CAPACITY_RATIO),
        ..scaled
    };
    let calibration = calibrate_sigma(
        &template,
        &dimensional.temperature_scale(),
        &CalibrationTargets {
            steady_temperature: l(STEADY_TARGET),
            hopf_temperature: l(HOPF_TARGET),
        },
    )?;
    Ok(Preset {
        name: MIC_TANK.into(),
        dimensional,
        model: template.with_rate_prefactor(calibration.rate_prefactor),
        boiling_kelvin: l(BOILING_POINT),
        calibration: Some(calibration),
        user_supplied: vec!["volume".into()],
        notes: vec![
            "feed_concentration backed out of heat_capacity ratio 10 with the MIC heat capacity, density and reaction enthalpy".into(),
            "flow_rate and heat_transfer back-solved from f = 1.7 and ell = 700 for a 1 m3 reacting volume".into(),
            "rate_prefactor calibrated to a 305 K steady state at 292 K ambient and a Hopf point at 290.15 K".into(),
        ],
    })
}

fn cumene_hydroperoxide<T: Real>() -> Result<Preset<T>> {
    use cumene::*;
    let l = T::lit;
    let dimensional = back_solved(
        l(mic::SPECIFIC_HEAT * mic::DENSITY),
        l(mic::REACTION_ENTHALPY),
        l(mic::FREQUENCY_FACTOR),
        l(mic::ACTIVATION_ENERGY),
        l(AMBIENT),
        l(INVERSE_RESIDENCE_TIME),
        l(HEAT_LOSS),
        l(HEAT_CAPACITY_RATIO),
    );
    let scaled = nondimensionalize(&dimensional, l(BOILING_POINT))?;
    let model = ModelParams {
        inverse_residence_time: l(INVERSE_RESIDENCE_TIME),
        heat_loss: l(HEAT_LOSS),
        heat_capacity: l(HEAT_CAPACITY_RATIO),
        rate_prefactor: l(LOG_RATE_PREFACTOR).exp(),
        ..scaled
    };
    Ok(Preset {
        name: CUMENE_HYDROPEROXIDE.into(),
        dimensional,
        model,
        boiling_kelvin: l(BOILING_POINT),
        calibration: None,
        user_supplied: [
            "frequency_factor",
            "activation_energy",
            "reaction_enthalpy",
            "heat_capacity",
            "feed_concentration",
            "rate_prefactor",
            "inverse_residence_time",
            "ambient_temperature",
            "boiling_temperature",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        notes: vec![
            "only heat_loss = 700 and heat_capacity ratio = 20 are known; every kinetic constant is a placeholder".into(),
        ],
    })
}

/// Looks up a named preset.
pub fn preset<T: Real>(name: &str) -> Result<Preset<T>> {
    match name {
        MIC_TANK => mic_tank(),
        CUMENE_HYDROPEROXIDE => cumene_hydroperoxide(),
        other => Err(Error::UnknownPreset {
            name: other.to_string(),
            valid: PRESET_NAMES.join(", "),
        }),
    }
}
