use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csa::ChannelMap;
use crate::error::{Error, Result};
use crate::phy::{ChannelIndex, PhyMode};

pub const CSV_HEADER: &str =
    "scenario,phy,snr_db,sir_db,frames,detected,valid,per,wilson_lo,wilson_hi";

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerResult {
    pub scenario: String,
    pub phy_mode: PhyMode,
    /// `None` when the point ran without noise.
    pub snr_db: Option<f64>,
    /// `None` when the point ran without interference.
    pub sir_db: Option<f64>,
    pub frames_sent: u64,
    pub frames_detected: u64,
    pub packets_valid: u64,
    pub per: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl PerResult {
    pub fn new(
        scenario: impl Into<String>,
        phy_mode: PhyMode,
        snr_db: Option<f64>,
        sir_db: Option<f64>,
        frames_sent: u64,
        frames_detected: u64,
        packets_valid: u64,
    ) -> Self {
        assert!(packets_valid <= frames_detected && frames_detected <= frames_sent);
        let errors = frames_sent - packets_valid;
        let per = if frames_sent == 0 {
            0.0
        } else {
            errors as f64 / frames_sent as f64
        };
        let (wilson_lo, wilson_hi) = wilson_interval(errors, frames_sent, Z_95);
        PerResult {
            scenario: scenario.into(),
            phy_mode,
            snr_db,
            sir_db,
            frames_sent,
            frames_detected,
            packets_valid,
            per,
            wilson_lo,
            wilson_hi,
        }
    }

    /// True when the two 95% intervals are disjoint.
    pub fn separated_from(&self, other: &PerResult) -> bool {
        self.wilson_hi < other.wilson_lo || other.wilson_hi < self.wilson_lo
    }
}

/// Wilson score interval for `k` events in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(results: &[PerResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.phy_mode,
            opt(r.snr_db),
            opt(r.sir_db),
            r.frames_sent,
            r.frames_detected,
            r.packets_valid,
            r.per,
            r.wilson_lo,
            r.wilson_hi
        )
        .expect("write to string");
    }
    out
}

pub fn to_json(results: &[PerResult]) -> String {
    let mut s = serde_json::to_string_pretty(results).expect("results serialize");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<Vec<PerResult>> {
    serde_json::from_str(text).map_err(|e| Error::config("results", e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::config("format", format!("unknown format `{s}`"))),
        }
    }
}

pub fn emit_results(results: &[PerResult], format: OutputFormat, path: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::InsufficientData("no results to write".into()));
    }
    let text = match format {
        OutputFormat::Csv => to_csv(results),
        OutputFormat::Json => to_json(results),
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Rebuilds a channel map from per-channel PER, keeping channels below
/// `threshold` (the two best when fewer survive).
pub fn update_channel_map(
    results: &[(ChannelIndex, PerResult)],
    threshold: f64,
) -> Result<ChannelMap> {
    let per: Vec<(u8, f64)> = results.iter().map(|(c, r)| (c.index(), r.per)).collect();
    ChannelMap::from_channel_per(&per, threshold)
}
