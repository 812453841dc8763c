//! Parameter sweeps over load, access mode and session count.
//!
//! Point `p` (loads outer, modes inner) and replication `r` run with seed
//! `mix_seed(base.seed ^ mix_seed(p << 32 | r))`, which is distinct for
//! every (p, r) because both mixing steps are bijections.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{AccessMode, ScenarioConfig};
use super::sim::{run_scenario, RunReport, SimError};
use crate::engine::mix_seed;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {}", .0.join("; "))]
    Spec(Vec<String>),
    #[error("point {point} replication {replication}: {source}")]
    Run {
        point: usize,
        replication: usize,
        source: SimError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("sweep spec parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

/// `dcf` or `twt-<sessions>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModeSpec {
    Dcf,
    Twt(usize),
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSpec::Dcf => f.write_str("dcf"),
            ModeSpec::Twt(k) => write!(f, "twt-{k}"),
        }
    }
}

impl FromStr for ModeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "dcf" {
            return Ok(ModeSpec::Dcf);
        }
        s.strip_prefix("twt-")
            .and_then(|k| k.parse().ok())
            .filter(|&k| k > 0)
            .map(ModeSpec::Twt)
            .ok_or_else(|| format!("unknown mode {s:?}; expected dcf or twt-<sessions>"))
    }
}

impl TryFrom<String> for ModeSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ModeSpec> for String {
    fn from(m: ModeSpec) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub loads_mbps: Vec<f64>,
    pub modes: Vec<ModeSpec>,
    pub replications: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            base: ScenarioConfig::default(),
            loads_mbps: vec![1.0, 2.0, 4.0, 6.0, 8.0],
            modes: vec![ModeSpec::Dcf, ModeSpec::Twt(2), ModeSpec::Twt(4)],
            replications: 5,
        }
    }
}

/// Column order of the sweep table; matches the fields of [`SweepRow`].
pub const COLUMNS: [&str; 17] = [
    "point",
    "replication",
    "seed",
    "mode",
    "load_mbps",
    "mean_delay_us",
    "mean_sojourn_us",
    "mean_queue",
    "arrival_rate_pps",
    "idle_fraction",
    "collision_fraction",
    "control_fraction",
    "throughput_bps",
    "delivered",
    "dropped",
    "rejected",
    "trace_digest",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: usize,
    pub replication: usize,
    pub seed: u64,
    pub mode: String,
    pub load_mbps: f64,
    pub mean_delay_us: Option<f64>,
    pub mean_sojourn_us: Option<f64>,
    pub mean_queue: f64,
    pub arrival_rate_pps: f64,
    pub idle_fraction: f64,
    pub collision_fraction: f64,
    pub control_fraction: f64,
    pub throughput_bps: f64,
    pub delivered: u64,
    pub dropped: u64,
    pub rejected: u64,
    pub trace_digest: String,
}

impl SweepRow {
    fn from_report(point: usize, replication: usize, mode: ModeSpec, r: &RunReport) -> Self {
        let m = &r.metrics;
        Self {
            point,
            replication,
            seed: r.seed,
            mode: mode.to_string(),
            load_mbps: r.config.load_mbps,
            mean_delay_us: m.mean_delay_us,
            mean_sojourn_us: m.mean_sojourn_us,
            mean_queue: m.mean_queue,
            arrival_rate_pps: m.arrival_rate_pps,
            idle_fraction: m.channel.idle_fraction,
            collision_fraction: m.channel.collision_fraction,
            control_fraction: m.channel.control_fraction,
            throughput_bps: m.throughput_bps,
            delivered: m.delivered,
            dropped: m.dropped,
            rejected: m.rejected,
            trace_digest: r.trace_digest.clone(),
        }
    }
}

/// One planned simulation of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub point: usize,
    pub replication: usize,
    pub mode: ModeSpec,
    pub config: ScenarioConfig,
}

pub fn point_seed(base: u64, point: usize, replication: usize) -> u64 {
    mix_seed(base ^ mix_seed((point as u64) << 32 | replication as u64))
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self, SweepError> {
        Ok(toml::from_str(text)?)
    }

    pub fn plan(&self) -> Result<Vec<PlannedRun>, SweepError> {
        let mut errs = Vec::new();
        if self.loads_mbps.is_empty() {
            errs.push("loads_mbps: must not be empty".to_string());
        }
        if self.modes.is_empty() {
            errs.push("modes: must not be empty".to_string());
        }
        if self.replications == 0 {
            errs.push("replications: must be at least 1".to_string());
        }
        if !errs.is_empty() {
            return Err(SweepError::Spec(errs));
        }
        let mut out = Vec::new();
        let mut point = 0;
        for &load in &self.loads_mbps {
            for &mode in &self.modes {
                for replication in 0..self.replications {
                    let mut c = self.base.clone();
                    c.load_mbps = load;
                    c.replications = 1;
                    match mode {
                        ModeSpec::Dcf => c.access = AccessMode::Dcf,
                        ModeSpec::Twt(k) => {
                            c.access = AccessMode::Twt;
                            c.twt.num_sessions = k;
                        }
                    }
                    c.seed = point_seed(self.base.seed, point, replication);
                    if let Err(e) = c.validate() {
                        errs.push(format!("point {point} ({mode} at {load} Mbps): {e}"));
                    }
                    out.push(PlannedRun {
                        point,
                        replication,
                        mode,
                        config: c,
                    });
                }
                point += 1;
            }
        }
        if errs.is_empty() {
            Ok(out)
        } else {
            Err(SweepError::Spec(errs))
        }
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>, SweepError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        match r {
            Ok(row) => rows.push(row),
            // a torn final line from an interrupted run is recomputed
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => continue,
        }
    }
    Ok(rows)
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<(), SweepError> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        if rows.is_empty() {
            // serialize() only emits the header alongside the first row
            w.write_record(COLUMNS)?;
        }
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every planned point, in parallel. With `out`, rows already present
/// in the file (matched on point, replication and seed) are reused, every
/// new row is appended as soon as it finishes, and the file is finally
/// rewritten in point order.
pub fn run_sweep(spec: &SweepSpec, out: Option<&Path>) -> Result<Vec<SweepRow>, SweepError> {
    let plan = spec.plan()?;
    let mut done: BTreeMap<(usize, usize), SweepRow> = BTreeMap::new();
    if let Some(path) = out {
        for row in read_rows(path)? {
            let fresh = plan
                .iter()
                .any(|p| p.point == row.point && p.replication == row.replication && p.config.seed == row.seed);
            if fresh {
                done.insert((row.point, row.replication), row);
            }
        }
        write_rows(path, &done.values().cloned().collect::<Vec<_>>())?;
    }
    let todo: Vec<&PlannedRun> = plan
        .iter()
        .filter(|p| !done.contains_key(&(p.point, p.replication)))
        .collect();
    log::info!("sweep: {} runs, {} reused", plan.len(), plan.len() - todo.len());

    let appender = match out {
        Some(path) => {
            let f = OpenOptions::new().append(true).open(path)?;
            let w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
            Some(Mutex::new(w))
        }
        None => None,
    };
    let fresh: Vec<SweepRow> = todo
        .par_iter()
        .map(|p| {
            let report = run_scenario(&p.config).map_err(|source| SweepError::Run {
                point: p.point,
                replication: p.replication,
                source,
            })?;
            let row = SweepRow::from_report(p.point, p.replication, p.mode, &report);
            if let Some(w) = &appender {
                let mut w = w.lock().expect("appender lock");
                w.serialize(&row)?;
                w.flush()?;
            }
            log::debug!("point {} rep {} done", p.point, p.replication);
            Ok(row)
        })
        .collect::<Result<_, SweepError>>()?;
    drop(appender);
    for row in fresh {
        done.insert((row.point, row.replication), row);
    }
    let rows: Vec<SweepRow> = done.into_values().collect();
    if let Some(path) = out {
        write_rows(path, &rows)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepSpec {
        SweepSpec {
            base: ScenarioConfig {
                duration_s: 0.3,
                ..ScenarioConfig::default()
            },
            loads_mbps: vec![1.0, 2.0, 4.0, 6.0, 8.0],
            modes: vec![ModeSpec::Dcf, ModeSpec::Twt(2), ModeSpec::Twt(4)],
            replications: 3,
        }
    }

    #[test]
    fn counts_rows() {
        let plan = tiny().plan().unwrap();
        assert_eq!(plan.len(), 45);
        let mut seeds: Vec<u64> = plan.iter().map(|p| p.config.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 45);
    }

    #[test]
    fn mode_names() {
        assert_eq!("twt-4".parse::<ModeSpec>(), Ok(ModeSpec::Twt(4)));
        assert_eq!(ModeSpec::Twt(2).to_string(), "twt-2");
        assert!("twt-0".parse::<ModeSpec>().is_err());
        assert!("csma".parse::<ModeSpec>().is_err());
    }

    #[test]
    fn rerun_is_identical_and_resumes() {
        let mut spec = tiny();
        spec.loads_mbps = vec![2.0];
        spec.replications = 2;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let a = run_sweep(&spec, Some(&path)).unwrap();
        assert_eq!(a.len(), 6);
        let first = fs::read_to_string(&path).unwrap();
        // drop the last two rows, as if interrupted
        let lines: Vec<&str> = first.lines().collect();
        fs::write(&path, lines[..lines.len() - 2].join("\n") + "\n").unwrap();
        let b = run_sweep(&spec, Some(&path)).unwrap();
        assert_eq!(a, b);
        assert_eq!(fs::read_to_string(&path).unwrap(), first);
        assert_eq!(run_sweep(&spec, None).unwrap(), a);
    }

    #[test]
    fn spec_from_toml() {
        let s = SweepSpec::parse("loads_mbps = [1, 8]\nmodes = [\"dcf\", \"twt-4\"]\nreplications = 2\n[base]\nduration_s = 1").unwrap();
        assert_eq!(s.modes, vec![ModeSpec::Dcf, ModeSpec::Twt(4)]);
        assert_eq!(s.plan().unwrap().len(), 8);
        assert!(SweepSpec::parse("modes = [\"aloha\"]").is_err());
    }
}
