//! Scenario configuration. Every field has a default taken from the
//! reproduction preset, so an empty document is a complete scenario.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcf::DcfConfig;
use crate::engine::Micros;
use crate::mu::MuPolicy;
use crate::phy::PhyConfig;

pub const PRESET_DEFAULT: &str = "paper-3.4";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("unknown preset {0:?} (known: {PRESET_DEFAULT})")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    Dcf,
    Twt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementType {
    Individual,
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub n_stations: usize,
    /// Side of the square area; the AP sits in its center.
    pub area_m: f64,
    /// Distances below this are clamped for the path-loss model.
    pub min_distance_m: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            n_stations: 16,
            area_m: 20.0,
            min_distance_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwtConfig {
    pub num_sessions: usize,
    pub period_us: Micros,
    /// Defaults to `period_us / num_sessions`.
    pub session_duration_us: Option<Micros>,
    pub trigger_enabled: bool,
    pub agreement: AgreementType,
    pub announced: bool,
    pub protection: bool,
    /// Let TWT stations also contend with DCF outside their sessions.
    pub hybrid_dcf: bool,
    /// Beacons a broadcast member skips between receptions, plus one.
    pub listen_interval: u16,
    pub max_rounds: u32,
}

impl Default for TwtConfig {
    fn default() -> Self {
        Self {
            num_sessions: 2,
            period_us: 20_000,
            session_duration_us: None,
            trigger_enabled: true,
            agreement: AgreementType::Individual,
            announced: false,
            protection: true,
            hybrid_dcf: false,
            listen_interval: 1,
            max_rounds: 4,
        }
    }
}

impl TwtConfig {
    pub fn session_duration(&self) -> Micros {
        self.session_duration_us
            .unwrap_or(self.period_us / self.num_sessions.max(1) as Micros)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuConfig {
    pub policy: MuPolicy,
    pub max_mu: usize,
}

impl Default for MuConfig {
    fn default() -> Self {
        Self {
            policy: MuPolicy::MuMimo,
            max_mu: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeaconConfig {
    pub enabled: bool,
    pub interval_us: Micros,
}

impl Default for BeaconConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            interval_us: 102_400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_s: f64,
    /// Leading share of the run excluded from delay and queue averages.
    pub warmup_fraction: f64,
    pub replications: usize,
    pub access: AccessMode,
    /// Offered load per station.
    pub load_mbps: f64,
    pub packet_bits: u64,
    pub buffer_packets: usize,
    pub topology: TopologyConfig,
    pub twt: TwtConfig,
    pub mu: MuConfig,
    pub phy: PhyConfig,
    pub dcf: DcfConfig,
    pub beacon: BeaconConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            duration_s: 60.0,
            warmup_fraction: 0.05,
            replications: 5,
            access: AccessMode::Twt,
            load_mbps: 4.0,
            packet_bits: 12_000,
            buffer_packets: 500,
            topology: TopologyConfig::default(),
            twt: TwtConfig::default(),
            mu: MuConfig::default(),
            phy: PhyConfig::default(),
            dcf: DcfConfig::default(),
            beacon: BeaconConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            PRESET_DEFAULT => Ok(Self::default()),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    /// Parses and validates a TOML document; missing keys keep their preset
    /// values and unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn horizon_us(&self) -> Micros {
        (self.duration_s * 1e6).round() as Micros
    }

    pub fn warmup_us(&self) -> Micros {
        (self.horizon_us() as f64 * self.warmup_fraction).round() as Micros
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut e = Vec::new();
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            e.push(format!("duration_s: must be positive, got {}", self.duration_s));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            e.push(format!("warmup_fraction: must be in [0, 1), got {}", self.warmup_fraction));
        }
        if self.replications == 0 {
            e.push("replications: must be at least 1".into());
        }
        if !(self.load_mbps >= 0.0) || !self.load_mbps.is_finite() {
            e.push(format!("load_mbps: must be non-negative, got {}", self.load_mbps));
        }
        if self.packet_bits == 0 {
            e.push("packet_bits: must be positive".into());
        }
        if self.buffer_packets == 0 {
            e.push("buffer_packets: must be positive".into());
        }
        let t = &self.topology;
        if t.n_stations == 0 || t.n_stations >= u16::MAX as usize {
            e.push(format!("topology.n_stations: must be in 1..65535, got {}", t.n_stations));
        }
        if !(t.area_m > 0.0) {
            e.push(format!("topology.area_m: must be positive, got {}", t.area_m));
        }
        if !(t.min_distance_m > 0.0) {
            e.push(format!("topology.min_distance_m: must be positive, got {}", t.min_distance_m));
        }
        let w = &self.twt;
        if self.access == AccessMode::Twt {
            if w.num_sessions == 0 {
                e.push("twt.num_sessions: must be at least 1".into());
            } else if w.num_sessions > t.n_stations {
                e.push(format!(
                    "twt.num_sessions: {} sessions exceed {} stations",
                    w.num_sessions, t.n_stations
                ));
            }
            if w.period_us < 256 || w.period_us > u32::MAX as Micros {
                e.push(format!("twt.period_us: must be in 256..2^32, got {}", w.period_us));
            }
            let d = w.session_duration();
            if d < 256 {
                e.push(format!("twt.session_duration_us: {d} is below the 256 us minimum"));
            }
            if w.num_sessions > 0 && d * w.num_sessions as Micros > w.period_us {
                e.push(format!(
                    "twt.session_duration_us: {} sessions of {d} us overlap within a {} us period",
                    w.num_sessions, w.period_us
                ));
            }
            if w.max_rounds == 0 {
                e.push("twt.max_rounds: must be at least 1".into());
            }
            if w.listen_interval == 0 {
                e.push("twt.listen_interval: must be at least 1".into());
            }
        }
        if !(1..=8).contains(&self.mu.max_mu) {
            e.push(format!("mu.max_mu: must be in 1..=8, got {}", self.mu.max_mu));
        }
        if self.beacon.enabled && self.beacon.interval_us == 0 {
            e.push("beacon.interval_us: must be positive".into());
        }
        e.extend(self.phy.validate());
        e.extend(self.dcf.validate());
        if e.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(e))
        }
    }
}
