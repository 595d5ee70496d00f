//! Parameter, gain and coefficient files.
//!
//! Parameter files are TOML with one `{ value, provenance }` table per entry:
//!
//! ```toml
//! [vehicle]
//! mass = { value = 0.7, provenance = "experimental" }
//! inertia_xx = { value = 4e-3, provenance = "custom" }
//!
//! [coefficients]
//! c_lv = { value = 0.29, provenance = "experimental" }
//! ```
//!
//! Vehicle keys: `mass inertia_xx inertia_yy inertia_zz inertia_xy inertia_xz
//! inertia_yz l_ty l_dy l_dx alpha0 alpha_t c_t c_mu throttle_c0 throttle_c1
//! throttle_c2 delta_max` (angles in rad, off-diagonal inertia optional).
//! Coefficient keys: `c_dv c_lv c_dt c_lt c_dlv c_dlt c_mu_t`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aero::{AeroCoeffs, Provenance, ThrottleCurve, VehicleParams};
use crate::Mat3;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("missing entry `{section}.{key}`")]
    Missing { section: &'static str, key: String },
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub value: f64,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ParamEntry {
    fn new(value: f64, provenance: Provenance) -> Self {
        Self { value, provenance }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterFile {
    #[serde(default)]
    pub vehicle: BTreeMap<String, ParamEntry>,
    #[serde(default)]
    pub coefficients: BTreeMap<String, ParamEntry>,
}

fn get(map: &BTreeMap<String, ParamEntry>, section: &'static str, key: &str) -> Result<f64, ConfigError> {
    map.get(key).map(|e| e.value).ok_or(ConfigError::Missing {
        section,
        key: key.to_string(),
    })
}

impl ParameterFile {
    pub fn from_model(params: &VehicleParams, coeffs: &AeroCoeffs) -> Self {
        use Provenance::*;
        let j = &params.inertia;
        let mut vehicle = BTreeMap::new();
        let mut put = |k: &str, v: f64, p: Provenance| {
            vehicle.insert(k.to_string(), ParamEntry::new(v, p));
        };
        put("mass", params.mass, Experimental);
        put("inertia_xx", j[(0, 0)], Custom);
        put("inertia_yy", j[(1, 1)], Custom);
        put("inertia_zz", j[(2, 2)], Custom);
        put("inertia_xy", j[(0, 1)], Custom);
        put("inertia_xz", j[(0, 2)], Custom);
        put("inertia_yz", j[(1, 2)], Custom);
        put("l_ty", params.l_ty, Custom);
        put("l_dy", params.l_dy, Custom);
        put("l_dx", params.l_dx, Experimental);
        put("alpha0", params.alpha0, Custom);
        put("alpha_t", params.alpha_t, Experimental);
        put("c_t", params.c_t, Custom);
        put("c_mu", params.c_mu, Custom);
        put("throttle_c0", params.throttle.c0, Custom);
        put("throttle_c1", params.throttle.c1, Custom);
        put("throttle_c2", params.throttle.c2, Custom);
        put("delta_max", params.delta_max, Custom);

        let p = coeffs.provenance;
        let coefficients = [
            ("c_dv", coeffs.c_dv),
            ("c_lv", coeffs.c_lv),
            ("c_dt", coeffs.c_dt),
            ("c_lt", coeffs.c_lt),
            ("c_dlv", coeffs.c_dlv),
            ("c_dlt", coeffs.c_dlt),
            ("c_mu_t", coeffs.c_mu_t),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), ParamEntry::new(v, p)))
        .collect();
        Self { vehicle, coefficients }
    }

    pub fn vehicle_params(&self) -> Result<VehicleParams, ConfigError> {
        let v = &self.vehicle;
        let g = |k| get(v, "vehicle", k);
        let opt = |k: &str| v.get(k).map(|e| e.value).unwrap_or(0.0);
        let (jxy, jxz, jyz) = (opt("inertia_xy"), opt("inertia_xz"), opt("inertia_yz"));
        let params = VehicleParams {
            mass: g("mass")?,
            inertia: Mat3::new(
                g("inertia_xx")?,
                jxy,
                jxz,
                jxy,
                g("inertia_yy")?,
                jyz,
                jxz,
                jyz,
                g("inertia_zz")?,
            ),
            l_ty: g("l_ty")?,
            l_dy: g("l_dy")?,
            l_dx: g("l_dx")?,
            alpha0: g("alpha0")?,
            alpha_t: g("alpha_t")?,
            c_t: g("c_t")?,
            c_mu: g("c_mu")?,
            throttle: ThrottleCurve {
                c0: g("throttle_c0")?,
                c1: g("throttle_c1")?,
                c2: g("throttle_c2")?,
            },
            delta_max: g("delta_max")?,
        };
        params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(params)
    }

    pub fn aero_coeffs(&self) -> Result<AeroCoeffs, ConfigError> {
        let c = &self.coefficients;
        let g = |k| get(c, "coefficients", k);
        // the set is as trustworthy as its least trustworthy entry
        let provenance = if c.values().any(|e| e.provenance == Provenance::Custom) {
            Provenance::Custom
        } else if c.values().any(|e| e.provenance == Provenance::Analytical) {
            Provenance::Analytical
        } else {
            Provenance::Experimental
        };
        let coeffs = AeroCoeffs {
            c_dv: g("c_dv")?,
            c_lv: g("c_lv")?,
            c_dt: g("c_dt")?,
            c_lt: g("c_lt")?,
            c_dlv: g("c_dlv")?,
            c_dlt: g("c_dlt")?,
            c_mu_t: g("c_mu_t")?,
            provenance,
        };
        coeffs.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(coeffs)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("parameter file serializes")
    }

    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        parse_toml(text, path)
    }
}

/// Reads and parses a TOML file into `T`.
pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_toml(&text, &path.display().to_string())
}

/// Parses TOML text; `origin` names the source in errors.
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })
}

pub fn load_parameters(path: &Path) -> Result<(VehicleParams, AeroCoeffs), ConfigError> {
    let file: ParameterFile = load_toml(path)?;
    Ok((file.vehicle_params()?, file.aero_coeffs()?))
}

/// Built-in parameter sets.
pub mod defaults {
    use super::*;
    use crate::controller::ControllerGains;
    use crate::Vec3;

    /// Hover motor speed used to size `c_T` (≈ 200 rev/s).
    pub const HOVER_OMEGA: f64 = 1257.0;

    pub fn vehicle_params() -> VehicleParams {
        let c_t = 2.17e-6;
        VehicleParams {
            mass: 0.7,
            inertia: Mat3::from_diagonal(&Vec3::new(4.0e-3, 1.5e-3, 5.5e-3)),
            l_ty: 0.14,
            l_dy: 0.14,
            l_dx: 0.075,
            alpha0: 0.0,
            alpha_t: -5.0_f64.to_radians(),
            c_t,
            c_mu: 0.014 * c_t,
            throttle: ThrottleCurve {
                c0: 0.0,
                c1: 4.0e-4,
                c2: 3.0e-8,
            },
            delta_max: 50.0_f64.to_radians(),
        }
    }

    /// Least-squares fit from flight data.
    pub fn experimental_coeffs() -> AeroCoeffs {
        AeroCoeffs {
            c_dv: 0.0,
            c_lv: 0.29,
            c_dt: 0.0,
            c_lt: 2.23,
            c_dlv: 0.18,
            c_dlt: 1.25,
            c_mu_t: -0.025,
            provenance: Provenance::Experimental,
        }
    }

    /// Lifting-line seed values (see [`crate::sysid::analytical_coeffs`]),
    /// rounded as tabulated, with the trim-derived pitch coefficient.
    pub fn analytical_coeffs() -> AeroCoeffs {
        AeroCoeffs {
            c_dv: 0.0,
            c_lv: 0.17,
            c_dt: 0.0,
            c_lt: 3.4,
            c_dlv: 0.041,
            c_dlt: 1.7,
            c_mu_t: -0.025,
            provenance: Provenance::Analytical,
        }
    }

    pub fn gains() -> ControllerGains {
        ControllerGains::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_file_roundtrip() {
        let p = defaults::vehicle_params();
        let c = defaults::experimental_coeffs();
        let file = ParameterFile::from_model(&p, &c);
        let text = file.to_toml();
        let back = ParameterFile::from_toml(&text, "mem").unwrap();
        assert_eq!(back.vehicle_params().unwrap(), p);
        assert_eq!(back.aero_coeffs().unwrap(), c);
        assert!(text.contains("provenance = \"custom\""));
    }

    #[test]
    fn missing_key_is_named() {
        let mut file = ParameterFile::from_model(&defaults::vehicle_params(), &defaults::analytical_coeffs());
        file.coefficients.remove("c_lt");
        let err = file.aero_coeffs().unwrap_err().to_string();
        assert!(err.contains("coefficients.c_lt"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        let mut file = ParameterFile::from_model(&defaults::vehicle_params(), &defaults::analytical_coeffs());
        file.vehicle.get_mut("mass").unwrap().value = -1.0;
        assert!(file.vehicle_params().is_err());
    }
}
