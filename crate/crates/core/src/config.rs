//! Hyperparameters for the full enhancement pipeline.
//!
//! Serialized as one flat JSON object (the denoiser is the only nested
//! value). Unknown keys are rejected; missing keys take their defaults.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::denoise::{DenoiseError, DenoiserKind, DenoiserSpec, ParamValue};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("unknown profile `{0}` (expected set12 or lol)")]
    UnknownProfile(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Denoiser(#[from] DenoiseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// `S' = R · L^(1/γ₂)`
    Single,
    /// `S' = R^(1/γ₁) · L^(1/γ₂)`
    Dual,
}

/// Initial illumination estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IlluminationInit {
    MeanRgb,
    MaxRgb,
}

/// Named gamma presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// γ₁ = 1, γ₂ = 2.2
    Set12,
    /// γ₁ = 1.5, γ₂ = 4
    Lol,
}

impl Profile {
    pub fn gammas(self) -> (f64, f64) {
        match self {
            Profile::Set12 => (1.0, 2.2),
            Profile::Lol => (1.5, 4.0),
        }
    }
}

impl FromStr for Profile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "set12" => Ok(Profile::Set12),
            "lol" => Ok(Profile::Lol),
            _ => Err(ConfigError::UnknownProfile(s.to_string())),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Set12 => "set12",
            Profile::Lol => "lol",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhanceConfig {
    /// Weight of the ℓ₁ smoothness term on the illumination gradient.
    pub alpha: f64,
    /// Weight of the gradient-fidelity term `‖∇R − G‖²`.
    pub beta: f64,
    /// HQS penalty coupling `R` and `z`.
    pub mu: f64,
    /// Initial ADMM penalty.
    pub theta0: f64,
    /// ADMM penalty growth factor, `> 1`.
    pub rho: f64,
    /// Relative tolerance of the ADMM stopping rule.
    pub iota: f64,
    /// Gradient threshold, 8-bit units.
    pub eps: f64,
    /// Gradient amplification gain.
    pub kappa: f64,
    /// Gradient amplification decay, 8-bit units.
    pub sigma: f64,
    /// Denoiser noise level `√λ` in `[0, 1]` units.
    pub noise_level: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_mode: GammaMode,
    pub max_iter_l: usize,
    pub max_iter_r: usize,
    /// Relative-change tolerance of the reflectance loop.
    pub r_tol: f64,
    /// Lower clamp on the returned illumination.
    pub l_floor: f64,
    /// Upper clamp on the returned reflectance.
    pub r_ceil: f64,
    pub init: IlluminationInit,
    pub denoiser: DenoiserSpec,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        let (gamma1, gamma2) = Profile::Set12.gammas();
        Self {
            alpha: 0.1,
            beta: 0.001,
            mu: 0.001,
            theta0: 0.0045,
            rho: 1.08,
            iota: 1e-5,
            eps: 1.0,
            kappa: 2.5,
            sigma: 10.0,
            noise_level: 25.0 / 255.0,
            gamma1,
            gamma2,
            gamma_mode: GammaMode::Dual,
            max_iter_l: 100,
            max_iter_r: 10,
            r_tol: 1e-3,
            l_floor: 1e-4,
            r_ceil: 3.0,
            init: IlluminationInit::MeanRgb,
            denoiser: DenoiserSpec::default(),
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl EnhanceConfig {
    pub fn with_profile(profile: Profile) -> Self {
        let mut cfg = Self::default();
        cfg.apply_profile(profile);
        cfg
    }

    pub fn apply_profile(&mut self, profile: Profile) {
        let (g1, g2) = profile.gammas();
        self.gamma1 = g1;
        self.gamma2 = g2;
        self.gamma_mode = GammaMode::Dual;
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mu", self.mu),
            ("theta0", self.theta0),
            ("rho", self.rho),
            ("iota", self.iota),
            ("eps", self.eps),
            ("kappa", self.kappa),
            ("sigma", self.sigma),
            ("noise_level", self.noise_level),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("r_tol", self.r_tol),
            ("l_floor", self.l_floor),
            ("r_ceil", self.r_ceil),
        ];
        if let Some((name, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(name, format!("must be finite, got {v}")));
        }
        let positive = [
            ("mu", self.mu),
            ("theta0", self.theta0),
            ("iota", self.iota),
            ("eps", self.eps),
            ("sigma", self.sigma),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("r_tol", self.r_tol),
            ("l_floor", self.l_floor),
            ("r_ceil", self.r_ceil),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| *v <= 0.0) {
            return Err(invalid(name, format!("must be positive, got {v}")));
        }
        let non_negative = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("noise_level", self.noise_level),
        ];
        if let Some((name, v)) = non_negative.iter().find(|(_, v)| *v < 0.0) {
            return Err(invalid(name, format!("must be non-negative, got {v}")));
        }
        if self.rho <= 1.0 {
            return Err(invalid("rho", format!("must exceed 1, got {}", self.rho)));
        }
        if self.l_floor > 1.0 {
            return Err(invalid(
                "l_floor",
                format!("must not exceed 1, got {}", self.l_floor),
            ));
        }
        if self.max_iter_l == 0 {
            return Err(invalid("max_iter_l", "must be at least 1"));
        }
        if self.max_iter_r == 0 {
            return Err(invalid("max_iter_r", "must be at least 1"));
        }
        self.denoiser.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config is always serializable");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Applies a `key=value` override.
    ///
    /// `key` is any config field name, `profile`, `denoiser` (sets the kind
    /// and clears its parameters) or `denoiser.<param>`. Values are parsed as
    /// JSON when possible and as a bare string otherwise.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        if key == "profile" {
            self.apply_profile(value.parse()?);
            return Ok(());
        }
        if key == "denoiser" {
            let kind: DenoiserKind = value.parse()?;
            self.denoiser = match kind {
                DenoiserKind::WaveletShrinkage => DenoiserSpec::default(),
                other => DenoiserSpec::new(other),
            };
            return Ok(());
        }
        if let Some(param) = key.strip_prefix("denoiser.") {
            let parsed = value
                .parse::<f64>()
                .map(ParamValue::Number)
                .unwrap_or_else(|_| ParamValue::Text(value.to_string()));
            self.denoiser.params.insert(param.to_string(), parsed);
            return Ok(());
        }

        let mut obj = match serde_json::to_value(&*self)? {
            serde_json::Value::Object(map) => map,
            _ => unreachable!("config serializes to an object"),
        };
        if !obj.contains_key(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        let parsed = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        obj.insert(key.to_string(), parsed);
        *self = serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| {
            ConfigError::BadValue {
                key: key.to_string(),
                reason: e.to_string(),
            }
        })?;
        Ok(())
    }

    /// Reads a numeric field by name (used by parameter sweeps).
    pub fn get_number(&self, key: &str) -> Option<f64> {
        serde_json::to_value(self).ok()?.get(key)?.as_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = EnhanceConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.theta0, 0.0045);
        assert_eq!(cfg.rho, 1.08);
        assert_eq!((cfg.eps, cfg.kappa, cfg.sigma), (1.0, 2.5, 10.0));
        assert_eq!((cfg.mu, cfg.beta), (0.001, 0.001));
        assert_eq!((cfg.gamma1, cfg.gamma2), (1.0, 2.2));
    }

    #[test]
    fn profiles() {
        let lol = EnhanceConfig::with_profile(Profile::Lol);
        assert_eq!((lol.gamma1, lol.gamma2), (1.5, 4.0));
        let s = EnhanceConfig::with_profile(Profile::Set12);
        assert_eq!((s.gamma1, s.gamma2), (1.0, 2.2));
        assert!("bsd".parse::<Profile>().is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = |f: fn(&mut EnhanceConfig)| {
            let mut c = EnhanceConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.rho = 1.0));
        assert!(bad(|c| c.theta0 = 0.0));
        assert!(bad(|c| c.mu = 0.0));
        assert!(bad(|c| c.gamma2 = -1.0));
        assert!(bad(|c| c.iota = 0.0));
        assert!(bad(|c| c.alpha = f64::NAN));
        assert!(bad(|c| c.max_iter_l = 0));
        assert!(bad(
            |c| c.denoiser = DenoiserSpec::new(DenoiserKind::External)
        ));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let cfg = EnhanceConfig::with_profile(Profile::Lol);
        let back = EnhanceConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(cfg, back);
        assert!(EnhanceConfig::from_json(r#"{"alpha":0.2,"lambda":1}"#).is_err());
        let partial = EnhanceConfig::from_json(r#"{"alpha":0.2}"#).unwrap();
        assert_eq!(partial.alpha, 0.2);
        assert_eq!(partial.rho, 1.08);
    }

    #[test]
    fn overrides() {
        let mut cfg = EnhanceConfig::default();
        cfg.set("alpha", "0").unwrap();
        cfg.set("gamma_mode", "single").unwrap();
        cfg.set("profile", "lol").unwrap();
        cfg.set("denoiser", "tv").unwrap();
        cfg.set("denoiser.iters", "12").unwrap();
        assert_eq!(cfg.alpha, 0.0);
        assert_eq!(cfg.gamma2, 4.0);
        assert_eq!(cfg.denoiser.kind, DenoiserKind::TotalVariation);
        assert_eq!(cfg.denoiser.params["iters"], ParamValue::Number(12.0));
        assert!(matches!(
            cfg.set("lambda", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.set("alpha", "abc"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = EnhanceConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.alpha = 0.2;
        assert_ne!(a.hash(), b.hash());
    }
}
