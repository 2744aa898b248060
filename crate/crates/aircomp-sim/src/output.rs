//! Result emission: CSV and JSON with locale-independent numeric
//! formatting (10 significant digits, `.` decimal separator).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentSpec;
use crate::harness::MseRecord;

pub const CSV_HEADER: &str =
    "level,power_dbm,mse_mean,mse_db,mse_stderr,snapshots,seed,config_hash";

/// 10 significant digits, plain decimal where reasonable, scientific for
/// extreme magnitudes. Never locale-dependent.
pub fn sig10(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.9e}")
    }
}

pub fn csv_rows(records: &[MseRecord], spec: &ExperimentSpec, partial: bool) -> String {
    let hash = spec.config_hash();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.level,
            sig10(r.power_dbm),
            sig10(r.mse_mean),
            sig10(r.mse_db()),
            sig10(r.mse_stderr),
            r.snapshots_used,
            spec.seed,
            hash
        ));
    }
    if partial {
        out.push_str("# partial=true\n");
    }
    out
}

/// JSON mirror of the CSV fields plus the fully resolved spec and notes on
/// defaulted modeling constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonReport {
    pub spec: ExperimentSpec,
    pub config_hash: String,
    pub metadata: Metadata,
    pub records: Vec<JsonRecord>,
    pub partial: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    /// The coherence block length only enters the fronthaul counts; its
    /// value is a modeling default, not a measured quantity.
    pub tau_c_note: String,
    pub tau_c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRecord {
    pub level: crate::config::Level,
    pub power_dbm: f64,
    pub mse_mean: f64,
    pub mse_db: f64,
    pub mse_stderr: f64,
    pub snapshots: usize,
    pub seed: u64,
    pub config_hash: String,
}

pub fn json_report(records: &[MseRecord], spec: &ExperimentSpec, partial: bool) -> JsonReport {
    let hash = spec.config_hash();
    JsonReport {
        spec: spec.clone(),
        config_hash: hash.clone(),
        metadata: Metadata {
            tau_c_note: format!(
                "tau_c = {} samples is a defaulted coherence block length; it affects only fronthaul counts",
                spec.base.tau_c
            ),
            tau_c: spec.base.tau_c,
        },
        records: records
            .iter()
            .map(|r| JsonRecord {
                level: r.level,
                power_dbm: r.power_dbm,
                mse_mean: r.mse_mean,
                mse_db: r.mse_db(),
                mse_stderr: r.mse_stderr,
                snapshots: r.snapshots_used,
                seed: spec.seed,
                config_hash: hash.clone(),
            })
            .collect(),
        partial,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn render(records: &[MseRecord], spec: &ExperimentSpec, format: Format, partial: bool) -> String {
    match format {
        Format::Csv => csv_rows(records, spec, partial),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json_report(records, spec, partial))
                .expect("report serializes");
            s.push('\n');
            s
        }
    }
}

pub fn emit(
    records: &[MseRecord],
    spec: &ExperimentSpec,
    format: Format,
    path: Option<&Path>,
    partial: bool,
) -> io::Result<()> {
    let text = render(records, spec, format, partial);
    match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{self, Level};
    use serde_json::json;

    fn spec() -> ExperimentSpec {
        config::resolve(json!({"levels": ["3"], "snapshots": 1})).unwrap()
    }

    fn record() -> MseRecord {
        MseRecord {
            level: Level::Three,
            power_dbm: 20.0,
            mse_mean: 0.1,
            mse_stderr: 0.01,
            snapshots_used: 1,
            wall_time_s: 0.5,
        }
    }

    #[test]
    fn sig10_formats() {
        assert_eq!(sig10(0.0), "0");
        assert_eq!(sig10(0.1), "0.1000000000");
        assert_eq!(sig10(-10.0), "-10.00000000");
        assert_eq!(sig10(123456789.0), "123456789.0");
        assert_eq!(sig10(1e-7), "1.000000000e-7");
        assert!(sig10(1.5).parse::<f64>().unwrap() == 1.5);
    }

    #[test]
    fn one_record_is_two_lines() {
        let text = csv_rows(&[record()], &spec(), false);
        let lines: Vec<&str> = text.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("3,20.00000000,0.1000000000,-10.00000000,"));
    }

    #[test]
    fn partial_footer_present() {
        let text = csv_rows(&[record()], &spec(), true);
        assert!(text.trim_end().ends_with("# partial=true"));
    }

    #[test]
    fn json_round_trip() {
        let s = spec();
        let report = json_report(&[record()], &s, false);
        let text = serde_json::to_string(&report).unwrap();
        let back: JsonReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.records, report.records);
        assert_eq!(back.spec, s);
        assert!(!back.partial);
    }

    #[test]
    fn db_column_matches_log() {
        let text = csv_rows(&[record()], &spec(), false);
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        let db: f64 = row[3].parse().unwrap();
        assert!((db + 10.0).abs() < 1e-9);
    }
}
