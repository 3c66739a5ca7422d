//! JSON run configuration.
//!
//! A configuration names either a `preset` or an explicit `parameters` block,
//! never both. Scalar `overrides` are applied on top of the chosen source and
//! command-line flags are applied last. Temperatures are Kelvin throughout.
//!
//! ```json
//! {
//!   "preset": "mic-tank610",
//!   "overrides": { "ambient_kelvin": 292.0, "log_rate_prefactor": 26.8 },
//!   "output_dir": "out",
//!   "rates": { "t_range": [280.0, 330.0], "points": 501 },
//!   "steady_branch": { "t_range": [282.0, 296.0] }
//! }
//! ```
//!
//! Explicit blocks are tagged by `kind`:
//!
//! ```json
//! { "parameters": { "kind": "dimensionless", "activation_energy": 64000.0,
//!                   "model": { "inverse_residence_time": 1.7, "heat_loss": 700.0,
//!                              "heat_capacity": 10.0, "ambient_temperature": 0.0379,
//!                              "rate_prefactor": 4.4e11, "boiling_temperature": 0.0405 } } }
//! ```
//!
//! A `dimensional` block carries `dimensional` (SI quantities),
//! `boiling_kelvin` and optionally `log_rate_prefactor` (the scaled rate
//! prefactor is 1 otherwise).

use std::fs;
use std::path::{Path, PathBuf};

use exotherm_core::model::{nondimensionalize, preset};
use exotherm_core::{DimensionalParams, ModelParams, TemperatureScale};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ParameterBlock>,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub rates: RatesOptions,
    #[serde(default)]
    pub steady_branch: SteadyOptions,
    #[serde(default)]
    pub cycle_branch: CycleOptions,
    #[serde(default)]
    pub loci: LociOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub calibrate: CalibrateOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ParameterBlock {
    Dimensionless {
        model: ModelParams,
        activation_energy: f64,
    },
    Dimensional {
        dimensional: DimensionalParams,
        boiling_kelvin: f64,
        #[serde(default)]
        log_rate_prefactor: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_rate_prefactor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_prefactor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_kelvin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boiling_kelvin: Option<f64>,
}

impl Overrides {
    /// Fields set in `other` win. The two forms of the rate prefactor
    /// replace each other.
    pub fn merged(&self, other: &Overrides) -> Overrides {
        let sigma_set = other.log_rate_prefactor.is_some() || other.rate_prefactor.is_some();
        let (log_rate_prefactor, rate_prefactor) = if sigma_set {
            (other.log_rate_prefactor, other.rate_prefactor)
        } else {
            (self.log_rate_prefactor, self.rate_prefactor)
        };
        Overrides {
            f: other.f.or(self.f),
            ell: other.ell.or(self.ell),
            eps: other.eps.or(self.eps),
            log_rate_prefactor,
            rate_prefactor,
            ambient_kelvin: other.ambient_kelvin.or(self.ambient_kelvin),
            boiling_kelvin: other.boiling_kelvin.or(self.boiling_kelvin),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    /// Which Hopf point to start from, counted from the coldest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hopf_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_orbits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LociOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_range: Option<[f64; 2]>,
    /// Region-map cells along `T_a` and along `f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Initial temperature; the ambient temperature when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0_kelvin: Option<f64>,
    /// Evenly spaced output samples; every accepted step when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_kelvin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hopf_kelvin: Option<f64>,
}

/// Reads a configuration file. A run manifest is accepted too; its
/// `resolved` section is used.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value = match value.get("resolved") {
        Some(inner) if value.get("schema_version").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Model parameters after merging source and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub source: String,
    pub model: ModelParams,
    pub scale: TemperatureScale<f64>,
    pub boiling_kelvin: f64,
}

impl Resolved {
    pub fn u(&self, kelvin: f64) -> f64 {
        self.scale.to_dimensionless(kelvin)
    }

    pub fn kelvin(&self, u: f64) -> f64 {
        self.scale.to_kelvin(u)
    }

    pub fn ambient_kelvin(&self) -> f64 {
        self.kelvin(self.model.ambient_temperature)
    }

    /// Self-contained parameter block reproducing this model.
    pub fn block(&self) -> ParameterBlock {
        ParameterBlock::Dimensionless {
            model: self.model,
            activation_energy: self.scale.activation_energy,
        }
    }
}

/// `preset` and `parameters` are mutually exclusive; a preset given on the
/// command line replaces whatever source the file names.
pub fn resolve(cfg: &RunConfig, flag_preset: Option<&str>, flags: &Overrides) -> Result<Resolved, CliError> {
    let (source, mut model, scale, mut boiling_kelvin) = match (flag_preset, &cfg.preset, &cfg.parameters) {
        (Some(name), _, _) => from_preset(name)?,
        (None, Some(_), Some(_)) => {
            return Err(CliError::Config("config sets both `preset` and `parameters`".into()));
        }
        (None, Some(name), None) => from_preset(name)?,
        (None, None, Some(block)) => from_block(block)?,
        (None, None, None) => {
            return Err(CliError::Config("no model given: use --preset, `preset` or `parameters`".into()));
        }
    };
    let o = cfg.overrides.merged(flags);
    if let Some(f) = o.f {
        model.inverse_residence_time = f;
    }
    if let Some(ell) = o.ell {
        model.heat_loss = ell;
    }
    if let Some(eps) = o.eps {
        model.heat_capacity = eps;
    }
    match (o.log_rate_prefactor, o.rate_prefactor) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("set either log_rate_prefactor or rate_prefactor, not both".into()));
        }
        (Some(ls), None) => model.rate_prefactor = ls.exp(),
        (None, Some(sigma)) => model.rate_prefactor = sigma,
        (None, None) => {}
    }
    if let Some(t) = o.ambient_kelvin {
        positive_kelvin("ambient_kelvin", t)?;
        model.ambient_temperature = scale.to_dimensionless(t);
    }
    if let Some(t) = o.boiling_kelvin {
        positive_kelvin("boiling_kelvin", t)?;
        model.boiling_temperature = scale.to_dimensionless(t);
        boiling_kelvin = t;
    }
    model.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Resolved { source, model, scale, boiling_kelvin })
}

fn positive_kelvin(name: &str, t: f64) -> Result<(), CliError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be a positive temperature (got {t})")))
    }
}

fn from_preset(name: &str) -> Result<(String, ModelParams, TemperatureScale<f64>, f64), CliError> {
    let p = preset::<f64>(name).map_err(|e| CliError::Config(e.to_string()))?;
    let scale = p.dimensional.temperature_scale();
    Ok((format!("preset:{name}"), p.model, scale, p.boiling_kelvin))
}

fn from_block(block: &ParameterBlock) -> Result<(String, ModelParams, TemperatureScale<f64>, f64), CliError> {
    match block {
        ParameterBlock::Dimensionless { model, activation_energy } => {
            if !(activation_energy.is_finite() && *activation_energy > 0.0) {
                return Err(CliError::Config(format!("activation_energy must be positive (got {activation_energy})")));
            }
            let scale = TemperatureScale::new(*activation_energy);
            let boiling = if model.boiling_temperature.is_finite() {
                scale.to_kelvin(model.boiling_temperature)
            } else {
                f64::INFINITY
            };
            Ok(("explicit:dimensionless".into(), *model, scale, boiling))
        }
        ParameterBlock::Dimensional { dimensional, boiling_kelvin, log_rate_prefactor } => {
            let mut model = nondimensionalize(dimensional, *boiling_kelvin).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(ls) = log_rate_prefactor {
                model.rate_prefactor = ls.exp();
            }
            Ok(("explicit:dimensional".into(), model, dimensional.temperature_scale(), *boiling_kelvin))
        }
    }
}

/// Parses `a` or `a:b` (Kelvin).
pub fn parse_kelvin_spec(s: &str) -> Result<KelvinSpec, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    match s.split_once(':') {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b)?);
            if !(a > 0.0 && a < b && b.is_finite()) {
                return Err(format!("range `{s}` must satisfy 0 < lo < hi"));
            }
            Ok(KelvinSpec::Range([a, b]))
        }
        None => {
            let t = num(s)?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("temperature `{s}` must be positive"));
            }
            Ok(KelvinSpec::Single(t))
        }
    }
}

/// Parses `lo:hi`.
pub fn parse_range(s: &str) -> Result<[f64; 2], String> {
    match parse_kelvin_spec(s)? {
        KelvinSpec::Range(r) => Ok(r),
        KelvinSpec::Single(_) => Err(format!("`{s}` is not a range lo:hi")),
    }
}

/// Parses `NxM`.
pub fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once('x').ok_or_else(|| format!("`{s}` is not of the form NxM"))?;
    let a = a.trim().parse().map_err(|_| format!("`{a}` is not a count"))?;
    let b = b.trim().parse().map_err(|_| format!("`{b}` is not a count"))?;
    Ok([a, b])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KelvinSpec {
    Single(f64),
    Range([f64; 2]),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kelvin_specs() {
        assert_eq!(parse_kelvin_spec("292").unwrap(), KelvinSpec::Single(292.0));
        assert_eq!(parse_kelvin_spec("282:296").unwrap(), KelvinSpec::Range([282.0, 296.0]));
        assert!(parse_kelvin_spec("296:282").is_err());
        assert!(parse_kelvin_spec("-3").is_err());
        assert!(parse_kelvin_spec("warm").is_err());
        assert_eq!(parse_grid("40x30").unwrap(), [40, 30]);
        assert!(parse_range("300").is_err());
    }

    #[test]
    fn flags_override_config_override_preset() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{ "preset": "mic-tank610", "overrides": { "f": 2.0, "ell": 650.0 } }"#,
        )
        .unwrap();
        let flags = Overrides { f: Some(3.0), ..Default::default() };
        let r = resolve(&cfg, None, &flags).unwrap();
        let base = preset::<f64>("mic-tank610").unwrap().model;
        assert_eq!(r.model.inverse_residence_time, 3.0);
        assert_eq!(r.model.heat_loss, 650.0);
        assert_eq!(r.model.heat_capacity, base.heat_capacity);
        assert_eq!(r.model.rate_prefactor, base.rate_prefactor);
    }

    #[test]
    fn source_must_be_unique() {
        let both: RunConfig = serde_json::from_str(
            r#"{ "preset": "mic-tank610",
                 "parameters": { "kind": "dimensionless", "activation_energy": 64000.0,
                   "model": { "inverse_residence_time": 1.7, "heat_loss": 700.0, "heat_capacity": 10.0,
                              "ambient_temperature": 0.0379, "rate_prefactor": 1e11,
                              "boiling_temperature": 0.0405 } } }"#,
        )
        .unwrap();
        assert!(resolve(&both, None, &Overrides::default()).is_err());
        assert!(resolve(&RunConfig::default(), None, &Overrides::default()).is_err());
        assert!(resolve(&RunConfig::default(), Some("mic-tank610"), &Overrides::default()).is_ok());
    }

    #[test]
    fn resolved_block_round_trips() {
        let r = resolve(&RunConfig::default(), Some("mic-tank610"), &Overrides::default()).unwrap();
        let cfg = RunConfig { parameters: Some(r.block()), ..Default::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        let again = resolve(&back, None, &Overrides::default()).unwrap();
        assert_eq!(again.model, r.model);
        assert!((again.boiling_kelvin - r.boiling_kelvin).abs() < 1e-9);
    }

    #[test]
    fn invalid_merged_model_is_rejected() {
        let cfg: RunConfig = serde_json::from_str(r#"{ "preset": "mic-tank610", "overrides": { "f": -1.0 } }"#).unwrap();
        assert!(resolve(&cfg, None, &Overrides::default()).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{ "preset": "mic-tank610", "flow": 2 }"#).is_err());
    }
}
