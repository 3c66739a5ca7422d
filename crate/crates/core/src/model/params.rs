use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Universal gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314;

/// Physical description of the reacting volume and its kinetics (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams<T> {
    /// Reacting volume, m³.
    pub volume: T,
    /// Volumetric flow rate through the reacting volume, m³/s.
    pub flow_rate: T,
    /// Reactant concentration in the inflow, mol/m³.
    pub feed_concentration: T,
    /// Averaged volumetric heat capacity, J/(K·m³).
    pub heat_capacity: T,
    /// Reaction enthalpy, J/mol (negative for an exothermic reaction).
    pub reaction_enthalpy: T,
    /// Linear heat-transfer coefficient to the surroundings, W/K.
    pub heat_transfer: T,
    /// Ambient temperature, K.
    pub ambient_temperature: T,
    /// Arrhenius frequency factor, 1/s.
    pub frequency_factor: T,
    /// Activation energy, J/mol.
    pub activation_energy: T,
}

fn check<T: Real>(ok: bool, field: &'static str, reason: &str, value: T) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("{reason} (got {value})"),
        })
    }
}

impl<T: Real> DimensionalParams<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        check(self.volume > z, "volume", "must be positive", self.volume)?;
        check(self.flow_rate >= z, "flow_rate", "must be non-negative", self.flow_rate)?;
        check(
            self.feed_concentration > z,
            "feed_concentration",
            "must be positive",
            self.feed_concentration,
        )?;
        check(self.heat_capacity > z, "heat_capacity", "must be positive", self.heat_capacity)?;
        check(
            self.reaction_enthalpy < z,
            "reaction_enthalpy",
            "must be negative (exothermic)",
            self.reaction_enthalpy,
        )?;
        check(self.heat_transfer >= z, "heat_transfer", "must be non-negative", self.heat_transfer)?;
        check(
            self.ambient_temperature > z,
            "ambient_temperature",
            "must be positive",
            self.ambient_temperature,
        )?;
        check(
            self.frequency_factor > z,
            "frequency_factor",
            "must be positive",
            self.frequency_factor,
        )?;
        check(
            self.activation_energy > z,
            "activation_energy",
            "must be positive",
            self.activation_energy,
        )?;
        Ok(())
    }

    pub fn temperature_scale(&self) -> TemperatureScale<T> {
        TemperatureScale {
            activation_energy: self.activation_energy,
        }
    }
}

/// Linear map between kelvin and the dimensionless temperature `u = R T / E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureScale<T> {
    pub activation_energy: T,
}

impl<T: Real> TemperatureScale<T> {
    pub fn new(activation_energy: T) -> Self {
        Self { activation_energy }
    }

    pub fn to_dimensionless(&self, kelvin: T) -> T {
        T::lit(GAS_CONSTANT) * kelvin / self.activation_energy
    }

    pub fn to_kelvin(&self, u: T) -> T {
        u * self.activation_energy / T::lit(GAS_CONSTANT)
    }
}

/// Dimensionless parameter set of the scaled mass and enthalpy balances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Inverse residence time `F/(V A)`.
    pub inverse_residence_time: T,
    /// Heat-loss coefficient.
    pub heat_loss: T,
    /// Heat-capacity ratio multiplying the temperature derivative.
    pub heat_capacity: T,
    /// Ambient temperature, `R T_a / E`.
    pub ambient_temperature: T,
    /// Prefactor multiplying `exp(-1/u)` in the reaction rate.
    pub rate_prefactor: T,
    /// Runaway threshold temperature (may be `+inf` to disable).
    pub boiling_temperature: T,
}

impl<T: Real> ModelParams<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        check(
            self.inverse_residence_time > z,
            "inverse_residence_time",
            "must be positive",
            self.inverse_residence_time,
        )?;
        check(self.heat_loss >= z, "heat_loss", "must be non-negative", self.heat_loss)?;
        check(self.heat_capacity > z, "heat_capacity", "must be positive", self.heat_capacity)?;
        check(
            self.ambient_temperature > z,
            "ambient_temperature",
            "must be positive",
            self.ambient_temperature,
        )?;
        // Zero switches the reaction off, which is a useful limiting case.
        check(
            self.rate_prefactor >= z,
            "rate_prefactor",
            "must be non-negative",
            self.rate_prefactor,
        )?;
        if !(self.boiling_temperature > self.ambient_temperature) {
            return Err(Error::InvalidParameter {
                field: "boiling_temperature",
                reason: format!(
                    "must exceed the ambient temperature (got {} <= {})",
                    self.boiling_temperature, self.ambient_temperature
                ),
            });
        }
        Ok(())
    }

    /// Combined linear cooling coefficient `eps*f + ell`.
    #[inline]
    pub fn cooling(&self) -> T {
        self.heat_capacity * self.inverse_residence_time + self.heat_loss
    }

    /// Reaction rate constant `sigma * exp(-1/u)`.
    #[inline]
    pub fn rate(&self, u: T) -> T {
        self.rate_prefactor * (-u.recip()).exp()
    }

    /// Rate constant and its first three derivatives with respect to `u`.
    pub fn rate_derivatives(&self, u: T) -> [T; 4] {
        let r = self.rate(u);
        let iu = u.recip();
        let iu2 = iu * iu;
        let iu3 = iu2 * iu;
        let iu4 = iu2 * iu2;
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        [
            r,
            r * iu2,
            r * (iu4 - two * iu3),
            r * (iu4 * iu2 - six * iu4 * iu + six * iu4),
        ]
    }

    /// Conversion `x = f/(f + rho)` at which the mass balance is stationary.
    #[inline]
    pub fn quasi_steady_conversion(&self, u: T) -> T {
        let f = self.inverse_residence_time;
        f / (f + self.rate(u))
    }

    /// Stationary heat generation `f rho / (f + rho)`.
    #[inline]
    pub fn generation(&self, u: T) -> T {
        let r = self.rate(u);
        if r == T::zero() {
            return T::zero();
        }
        let f = self.inverse_residence_time;
        f / (T::one() + f / r)
    }

    /// Linear heat loss `(eps f + ell)(u - u_a)`.
    #[inline]
    pub fn loss(&self, u: T) -> T {
        self.cooling() * (u - self.ambient_temperature)
    }

    /// Reduced steady-state heat balance; its roots are the steady temperatures.
    #[inline]
    pub fn heat_balance(&self, u: T) -> T {
        self.generation(u) - self.loss(u)
    }

    /// Upper bound on any steady temperature: `u_a + min(f, sigma)/(eps f + ell)`.
    pub fn steady_temperature_bound(&self) -> T {
        self.ambient_temperature
            + self.inverse_residence_time.min(self.rate_prefactor) / self.cooling()
    }

    pub fn get(&self, p: Parameter) -> T {
        match p {
            Parameter::AmbientTemperature => self.ambient_temperature,
            Parameter::InverseResidenceTime => self.inverse_residence_time,
            Parameter::HeatLoss => self.heat_loss,
            Parameter::HeatCapacity => self.heat_capacity,
        }
    }

    pub fn set(&mut self, p: Parameter, value: T) {
        match p {
            Parameter::AmbientTemperature => self.ambient_temperature = value,
            Parameter::InverseResidenceTime => self.inverse_residence_time = value,
            Parameter::HeatLoss => self.heat_loss = value,
            Parameter::HeatCapacity => self.heat_capacity = value,
        }
    }

    pub fn with(mut self, p: Parameter, value: T) -> Self {
        self.set(p, value);
        self
    }

    pub fn with_rate_prefactor(mut self, sigma: T) -> Self {
        self.rate_prefactor = sigma;
        self
    }
}

/// A parameter that continuation routines may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameter {
    #[serde(rename = "ua")]
    AmbientTemperature,
    #[serde(rename = "f")]
    InverseResidenceTime,
    #[serde(rename = "ell")]
    HeatLoss,
    #[serde(rename = "eps")]
    HeatCapacity,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [
        Parameter::AmbientTemperature,
        Parameter::InverseResidenceTime,
        Parameter::HeatLoss,
        Parameter::HeatCapacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::AmbientTemperature => "ua",
            Parameter::InverseResidenceTime => "f",
            Parameter::HeatLoss => "ell",
            Parameter::HeatCapacity => "eps",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter `{s}` (use ua, f, ell or eps)")))
    }
}

/// Dimensionless state: scaled concentration `x = c/c_f` and temperature `u = R T/E`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State<T> {
    pub x: T,
    pub u: T,
}

impl<T: Real> State<T> {
    pub fn new(x: T, u: T) -> Self {
        Self { x, u }
    }

    #[inline]
    pub fn to_array(self) -> [T; 2] {
        [self.x, self.u]
    }

    #[inline]
    pub fn from_array(a: [T; 2]) -> Self {
        Self { x: a[0], u: a[1] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u > T::zero()) || !self.u.is_finite() {
            return Err(Error::Domain(format!("temperature must be positive (u = {})", self.u)));
        }
        if !(self.x >= T::zero() && self.x <= T::one()) {
            return Err(Error::Domain(format!("conversion must lie in [0, 1] (x = {})", self.x)));
        }
        Ok(())
    }
}

/// Scales the physical balances into the dimensionless form. The rate
/// prefactor is set to one; `boiling_temperature` is in kelvin.
pub fn nondimensionalize<T: Real>(
    dim: &DimensionalParams<T>,
    boiling_temperature: T,
) -> Result<ModelParams<T>> {
    dim.validate()?;
    let r = T::lit(GAS_CONSTANT);
    let drive = dim.feed_concentration * (-dim.reaction_enthalpy) * r;
    let scale = dim.temperature_scale();
    let p = ModelParams {
        inverse_residence_time: dim.flow_rate / (dim.volume * dim.frequency_factor),
        heat_loss: dim.heat_transfer * dim.activation_energy
            / (drive * dim.volume * dim.frequency_factor),
        heat_capacity: dim.heat_capacity * dim.activation_energy / drive,
        ambient_temperature: scale.to_dimensionless(dim.ambient_temperature),
        rate_prefactor: T::one(),
        boiling_temperature: scale.to_dimensionless(boiling_temperature),
    };
    p.validate()?;
    Ok(p)
}

/// Concentration (mol/m³) and temperature (K) of a dimensionless state.
pub fn dimensionalize<T: Real>(state: &State<T>, dim: &DimensionalParams<T>) -> Result<(T, T)> {
    dim.validate()?;
    Ok((
        state.x * dim.feed_concentration,
        dim.temperature_scale().to_kelvin(state.u),
    ))
}
