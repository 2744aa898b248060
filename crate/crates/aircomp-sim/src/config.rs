//! JSON experiment configuration: flat schema, dotted-path overrides, and
//! resolution into a fully validated [`ExperimentSpec`].
//!
//! An empty file `{}` resolves to the default scenario (L=144 single-antenna
//! APs on a grid, K=20 devices, τ_p=20, 20 dBm power budget).

use std::fmt;
use std::fs;
use std::path::Path;

use aircomp_core::channel::{ApPlacement, SystemConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Configuration failure with the offending key path where known.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "config error: {}", self.reason)
        } else {
            write!(f, "config error at `{}`: {}", self.key, self.reason)
        }
    }
}

impl std::error::Error for ConfigError {}

/// AP-cooperation level tags, including the cellular baseline variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "3-noTCO")]
    ThreeNoTco,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "cellular")]
    Cellular,
    #[serde(rename = "cellular-noTCO")]
    CellularNoTco,
}

impl Level {
    pub const ALL: [Level; 6] = [
        Level::Three,
        Level::ThreeNoTco,
        Level::Two,
        Level::One,
        Level::Cellular,
        Level::CellularNoTco,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Level::Three => "3",
            Level::ThreeNoTco => "3-noTCO",
            Level::Two => "2",
            Level::One => "1",
            Level::Cellular => "cellular",
            Level::CellularNoTco => "cellular-noTCO",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Level {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Level::ALL
            .into_iter()
            .find(|l| l.tag() == s)
            .ok_or_else(|| ConfigError::new("levels", format!("unknown level tag `{s}`")))
    }
}

/// Fully resolved experiment description; hashing this (serialized) yields
/// the `config_hash` column of every output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    /// Sorted, non-empty sweep grid for the per-device power budget.
    pub power_grid_dbm: Vec<f64>,
    pub levels: Vec<Level>,
    pub snapshots: usize,
    pub trials_per_snapshot: usize,
    /// Monte Carlo draws behind the Level-2 channel statistics.
    pub lsfd_samples: usize,
    /// Skip estimation and hand the designs the true channels (C = 0).
    pub perfect_csi: bool,
    pub seed: u64,
}

impl ExperimentSpec {
    /// First 16 hex digits of the SHA-256 of the serialized spec.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in &digest[..8] {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.base
            .validate()
            .map_err(|e| ConfigError::new("", e.to_string()))?;
        if self.power_grid_dbm.is_empty() {
            return Err(ConfigError::new("power_grid_dbm", "grid must be non-empty"));
        }
        if self.power_grid_dbm.windows(2).any(|w| w[0] > w[1]) {
            return Err(ConfigError::new("power_grid_dbm", "grid must be sorted"));
        }
        if self.snapshots == 0 {
            return Err(ConfigError::new("snapshots", "must be >= 1"));
        }
        if self.trials_per_snapshot == 0 {
            return Err(ConfigError::new("trials_per_snapshot", "must be >= 1"));
        }
        if self.lsfd_samples == 0 {
            return Err(ConfigError::new("lsfd_samples", "must be >= 1"));
        }
        if self.levels.is_empty() {
            return Err(ConfigError::new("levels", "must request at least one level"));
        }
        Ok(())
    }
}

/// Scalar, explicit list, or `"start:step:stop"` range of dBm values.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PowerField {
    Scalar(f64),
    List(Vec<f64>),
    Range(String),
}

impl PowerField {
    fn expand(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            PowerField::Scalar(x) => Ok(vec![*x]),
            PowerField::List(xs) => Ok(xs.clone()),
            PowerField::Range(s) => expand_range(s).ok_or_else(|| {
                ConfigError::new(key, format!("expected number, array, or `start:step:stop`, got `{s}`"))
            }),
        }
    }
}

/// Inclusive `start:step:stop` grid, e.g. `-10:5:30` → 9 points.
fn expand_range(s: &str) -> Option<Vec<f64>> {
    let mut parts = s.splitn(3, ':');
    let start: f64 = parts.next()?.trim().parse().ok()?;
    let step: f64 = parts.next()?.trim().parse().ok()?;
    let stop: f64 = parts.next()?.trim().parse().ok()?;
    if !(step > 0.0) || stop < start {
        return None;
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Some((0..count).map(|i| start + step * i as f64).collect())
}

/// Scalar (applied to every device) or per-device list of pilot powers.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PilotPowerField {
    Scalar(f64),
    List(Vec<f64>),
}

/// The on-disk schema: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    ap_count: Option<usize>,
    antennas_per_ap: Option<usize>,
    device_count: Option<usize>,
    tau_p: Option<usize>,
    tau_c: Option<usize>,
    pilot_power_dbm: Option<PilotPowerField>,
    max_power_dbm: Option<PowerField>,
    noise_power_dbm: Option<f64>,
    area_m: Option<f64>,
    pathloss_beta0_db: Option<f64>,
    pathloss_alpha: Option<f64>,
    ref_dist_m: Option<f64>,
    shadow_std_db: Option<f64>,
    shadow_decorr_m: Option<f64>,
    asd_deg: Option<f64>,
    ap_placement: Option<ApPlacement>,
    power_grid_dbm: Option<PowerField>,
    levels: Option<Vec<Level>>,
    snapshots: Option<usize>,
    trials_per_snapshot: Option<usize>,
    lsfd_samples: Option<usize>,
    perfect_csi: Option<bool>,
    seed: Option<u64>,
}

/// Reads the JSON file and applies `key=value` overrides; dotted keys
/// descend into nested objects. Values parse as JSON first, then as
/// strings (so `max_power_dbm=-10:5:30` works unquoted).
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentSpec, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| ConfigError::new("", format!("invalid JSON in {}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(ConfigError::new("", "top-level JSON value must be an object"));
    }
    apply_overrides(&mut value, overrides)?;
    resolve(value)
}

pub fn apply_overrides(value: &mut Value, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::new(item.clone(), "override must be key=value"))?;
        let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
        let parts: Vec<&str> = key.split('.').collect();
        let (last, inner) = parts.split_last().expect("split_once yields nonempty key");
        let mut cursor = &mut *value;
        for part in inner {
            let obj = cursor
                .as_object_mut()
                .ok_or_else(|| ConfigError::new(key, "path traverses a non-object"))?;
            cursor = obj
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
        cursor
            .as_object_mut()
            .ok_or_else(|| ConfigError::new(key, "path traverses a non-object"))?
            .insert(last.to_string(), parsed);
    }
    Ok(())
}

pub fn resolve(value: Value) -> Result<ExperimentSpec, ConfigError> {
    let raw: RawConfig = serde_json::from_value(value)
        .map_err(|e| ConfigError::new("", e.to_string()))?;
    let defaults = SystemConfig::default();
    let device_count = raw.device_count.unwrap_or(defaults.device_count);
    let pilot_power_dbm = match raw.pilot_power_dbm {
        None => vec![20.0; device_count],
        Some(PilotPowerField::Scalar(x)) => vec![x; device_count],
        Some(PilotPowerField::List(xs)) => {
            if xs.len() != device_count {
                return Err(ConfigError::new(
                    "pilot_power_dbm",
                    format!("expected {device_count} entries, got {}", xs.len()),
                ));
            }
            xs
        }
    };
    let mut power_grid_dbm = match (&raw.power_grid_dbm, &raw.max_power_dbm) {
        (Some(grid), _) => grid.expand("power_grid_dbm")?,
        (None, Some(p)) => p.expand("max_power_dbm")?,
        (None, None) => vec![defaults.max_power_dbm],
    };
    if power_grid_dbm.is_empty() {
        return Err(ConfigError::new("power_grid_dbm", "grid must be non-empty"));
    }
    if power_grid_dbm.iter().any(|p| !p.is_finite()) {
        return Err(ConfigError::new("power_grid_dbm", "powers must be finite"));
    }
    power_grid_dbm.sort_by(|a, b| a.partial_cmp(b).expect("finite powers"));
    let base = SystemConfig {
        ap_count: raw.ap_count.unwrap_or(defaults.ap_count),
        antennas_per_ap: raw.antennas_per_ap.unwrap_or(defaults.antennas_per_ap),
        device_count,
        tau_p: raw.tau_p.unwrap_or(defaults.tau_p),
        tau_c: raw.tau_c.unwrap_or(defaults.tau_c),
        pilot_power_dbm,
        max_power_dbm: power_grid_dbm[0],
        noise_power_dbm: raw.noise_power_dbm.unwrap_or(defaults.noise_power_dbm),
        area_m: raw.area_m.unwrap_or(defaults.area_m),
        pathloss_beta0_db: raw.pathloss_beta0_db.unwrap_or(defaults.pathloss_beta0_db),
        pathloss_alpha: raw.pathloss_alpha.unwrap_or(defaults.pathloss_alpha),
        ref_dist_m: raw.ref_dist_m.unwrap_or(defaults.ref_dist_m),
        shadow_std_db: raw.shadow_std_db.unwrap_or(defaults.shadow_std_db),
        shadow_decorr_m: raw.shadow_decorr_m.unwrap_or(defaults.shadow_decorr_m),
        asd_deg: raw.asd_deg.unwrap_or(defaults.asd_deg),
        ap_placement: raw.ap_placement.unwrap_or(defaults.ap_placement),
        seed: raw.seed.unwrap_or(defaults.seed),
    };
    let spec = ExperimentSpec {
        base,
        power_grid_dbm,
        levels: raw.levels.unwrap_or_else(|| {
            vec![Level::Three, Level::ThreeNoTco, Level::Two, Level::One]
        }),
        snapshots: raw.snapshots.unwrap_or(200),
        trials_per_snapshot: raw.trials_per_snapshot.unwrap_or(50),
        lsfd_samples: raw.lsfd_samples.unwrap_or(500),
        perfect_csi: raw.perfect_csi.unwrap_or(false),
        seed: raw.seed.unwrap_or(defaults.seed),
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_json(text: &str, overrides: &[&str]) -> Result<ExperimentSpec, ConfigError> {
        let mut value: Value = serde_json::from_str(text).unwrap();
        let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        apply_overrides(&mut value, &overrides)?;
        resolve(value)
    }

    #[test]
    fn empty_object_gives_defaults() {
        let spec = from_json("{}", &[]).unwrap();
        assert_eq!(spec.base.ap_count, 144);
        assert_eq!(spec.base.antennas_per_ap, 1);
        assert_eq!(spec.base.device_count, 20);
        assert_eq!(spec.base.tau_p, 20);
        assert_eq!(spec.base.noise_power_dbm, -96.0);
        assert_eq!(spec.power_grid_dbm, vec![20.0]);
        assert_eq!(spec.snapshots, 200);
        assert_eq!(spec.trials_per_snapshot, 50);
        assert_eq!(spec.lsfd_samples, 500);
        assert!(!spec.perfect_csi);
        assert_eq!(spec.seed, 1);
    }

    #[test]
    fn range_override_expands() {
        let spec = from_json("{}", &["max_power_dbm=-10:5:30"]).unwrap();
        assert_eq!(spec.power_grid_dbm.len(), 9);
        assert_eq!(spec.power_grid_dbm[0], -10.0);
        assert_eq!(spec.power_grid_dbm[8], 30.0);
    }

    #[test]
    fn unknown_key_named_in_error() {
        let err = from_json(r#"{"fooo": 1}"#, &[]).unwrap_err();
        assert!(err.to_string().contains("fooo"), "{err}");
    }

    #[test]
    fn levels_parse_all_tags() {
        let spec = from_json(
            r#"{"levels": ["3", "3-noTCO", "2", "1", "cellular", "cellular-noTCO"]}"#,
            &[],
        )
        .unwrap();
        assert_eq!(spec.levels, Level::ALL.to_vec());
    }

    #[test]
    fn grid_is_sorted_and_scalar_pilot_broadcasts() {
        let spec = from_json(
            r#"{"power_grid_dbm": [30, -10, 20], "pilot_power_dbm": 10, "device_count": 4}"#,
            &[],
        )
        .unwrap();
        assert_eq!(spec.power_grid_dbm, vec![-10.0, 20.0, 30.0]);
        assert_eq!(spec.base.pilot_power_dbm, vec![10.0; 4]);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(from_json(r#"{"snapshots": 0}"#, &[]).is_err());
        assert!(from_json(r#"{"power_grid_dbm": []}"#, &[]).is_err());
        assert!(from_json(r#"{"ap_count": 7}"#, &[]).is_ok());
        // non-square grids surface when the snapshot is built, not here
    }

    #[test]
    fn hash_tracks_content() {
        let a = from_json("{}", &[]).unwrap();
        let b = from_json(r#"{"seed": 2}"#, &[]).unwrap();
        assert_eq!(a.config_hash().len(), 16);
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash(), from_json("{}", &[]).unwrap().config_hash());
    }
}
