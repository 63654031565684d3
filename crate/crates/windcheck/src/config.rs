//! Mission config files (TOML) and model selection.
//!
//! Keys mirror `MissionConfig`; battery constants live in a `[battery]`
//! table and action minutes in `[durations]`. Unknown keys are errors.
//!
//! ```toml
//! safe_t = 0.3
//! p_wsp_c = 0.1
//! variant = "advanced"
//!
//! [battery]
//! c_new = 12.8
//!
//! [durations]
//! recharge = 90.0
//! ```

use std::path::{Path, PathBuf};

use windcheck_core::battery::BatteryVariant;
use windcheck_core::mission::{scenario_preset, MissionConfig, MissionError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Mission(#[from] MissionError),
}

pub fn parse_config(text: &str) -> Result<MissionConfig, toml::de::Error> {
    toml::from_str(text)
}

pub fn load_config(path: &Path) -> Result<MissionConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    parse_config(&text).map_err(|source| ConfigError::Toml {
        path: path.into(),
        source,
    })
}

/// Starts from the config file (or the defaults), then applies the scenario's
/// `safe_t` and `p_wsp_c` and the variant override.
pub fn resolve(
    scenario: Option<u32>,
    config: Option<&Path>,
    variant: Option<BatteryVariant>,
) -> Result<MissionConfig, ConfigError> {
    let mut c = match config {
        Some(p) => load_config(p)?,
        None => MissionConfig::default(),
    };
    if let Some(id) = scenario {
        let preset = scenario_preset(id)?;
        c.safe_t = preset.safe_t;
        c.p_wsp_c = preset.p_wsp_c;
    }
    if let Some(v) = variant {
        c.variant = v;
    }
    c.validate()?;
    Ok(c)
}

/// Serializes a config back to TOML.
pub fn to_toml(c: &MissionConfig) -> String {
    toml::to_string(c).expect("mission config is always representable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_defaults() {
        let c = parse_config("safe_t = 0.25\n[battery]\nc_new = 12.8\n").unwrap();
        assert_eq!(
            (c.safe_t, c.battery.c_new, c.battery.e_spec),
            (0.25, 12.8, 180.0)
        );
        assert_eq!(c.p_wsp_c, MissionConfig::default().p_wsp_c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("safe_threshold = 0.3\n").is_err());
        assert!(parse_config("[battery]\nc_nwe = 12\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = MissionConfig::default();
        assert_eq!(parse_config(&to_toml(&c)).unwrap(), c);
    }

    #[test]
    fn scenario_overrides_file_values() {
        let c = resolve(Some(4), None, Some(BatteryVariant::BasicLow)).unwrap();
        assert_eq!(
            (c.safe_t, c.p_wsp_c, c.variant),
            (0.25, 0.3, BatteryVariant::BasicLow)
        );
        assert!(matches!(
            resolve(Some(5), None, None),
            Err(ConfigError::Mission(_))
        ));
    }
}
