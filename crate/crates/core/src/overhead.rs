//! Closed-form count of TWT management messages for the four agreement
//! modes: individual/broadcast crossed with periodic/aperiodic.
//!
//! Setup costs one request/response pair per station. Only aperiodic
//! agreements receive updates: one message per station per update for
//! individual agreements, one beacon-carried message per update for a
//! broadcast session.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TwtMode {
    /// Individual, periodic.
    IP,
    /// Individual, aperiodic.
    IA,
    /// Broadcast, periodic.
    BP,
    /// Broadcast, aperiodic.
    BA,
}

impl TwtMode {
    pub const ALL: [TwtMode; 4] = [TwtMode::IP, TwtMode::IA, TwtMode::BP, TwtMode::BA];

    pub fn label(self) -> &'static str {
        match self {
            TwtMode::IP => "IP",
            TwtMode::IA => "IA",
            TwtMode::BP => "BP",
            TwtMode::BA => "BA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadQuery {
    pub mode: TwtMode,
    pub n_stations: u64,
    pub updates_per_hour: u64,
    pub per_exchange_airtime_us: u64,
    pub horizon_s: f64,
}

impl OverheadQuery {
    pub fn new(mode: TwtMode, n_stations: u64, updates_per_hour: u64) -> Self {
        Self {
            mode,
            n_stations,
            updates_per_hour,
            per_exchange_airtime_us: 2_000,
            horizon_s: 3_600.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadResult {
    pub setup_messages: u64,
    pub update_messages: u64,
    pub total: u64,
    pub messages_per_second: f64,
    pub airtime_fraction: f64,
}

pub fn control_messages(q: &OverheadQuery) -> OverheadResult {
    let n = q.n_stations;
    let k = q.updates_per_hour;
    let setup = 2 * n;
    let updates = match q.mode {
        TwtMode::IP | TwtMode::BP => 0,
        TwtMode::IA => k * n,
        TwtMode::BA => k,
    };
    // broadcast updates need a session to address
    let updates = if n == 0 { 0 } else { updates };
    let total = setup + updates;
    let (rate, fraction) = if q.horizon_s > 0.0 {
        let rate = total as f64 / q.horizon_s;
        let busy_s = total as f64 * q.per_exchange_airtime_us as f64 * 1e-6;
        (rate, (busy_s / q.horizon_s).min(1.0))
    } else {
        (0.0, 0.0)
    };
    OverheadResult {
        setup_messages: setup,
        update_messages: updates,
        total,
        messages_per_second: rate,
        airtime_fraction: fraction,
    }
}

/// Printed values that disagree with the closed form, keyed by
/// (N, k, mode). The formula value is reported; the note records the
/// discrepancy.
pub const KNOWN_TABLE_ANOMALIES: &[(u64, u64, TwtMode, u64, &str)] = &[(
    10,
    100,
    TwtMode::BA,
    30,
    "published table prints 30; 2N + k = 120 and every other BA cell follows 2N + k",
)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n_stations: u64,
    pub updates_per_hour: u64,
    pub mode: TwtMode,
    pub total: u64,
    pub messages_per_second: f64,
    pub airtime_fraction: f64,
    pub note: Option<String>,
}

/// Full cross product in row order: N outer, k inner, then IP, IA, BP, BA.
pub fn table_report(n_values: &[u64], k_values: &[u64]) -> Vec<TableRow> {
    let mut rows = Vec::with_capacity(n_values.len() * k_values.len() * 4);
    for &n in n_values {
        for &k in k_values {
            for mode in TwtMode::ALL {
                let r = control_messages(&OverheadQuery::new(mode, n, k));
                let note = KNOWN_TABLE_ANOMALIES
                    .iter()
                    .find(|a| a.0 == n && a.1 == k && a.2 == mode)
                    .map(|a| a.4.to_string());
                rows.push(TableRow {
                    n_stations: n,
                    updates_per_hour: k,
                    mode,
                    total: r.total,
                    messages_per_second: r.messages_per_second,
                    airtime_fraction: r.airtime_fraction,
                    note,
                });
            }
        }
    }
    rows
}

/// Comma-separated rendering of [`table_report`] with a header line.
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("n_stations,updates_per_hour,mode,total_messages,messages_per_second,airtime_fraction,note\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{}\n",
            r.n_stations,
            r.updates_per_hour,
            r.mode.label(),
            r.total,
            r.messages_per_second,
            r.airtime_fraction,
            r.note.as_deref().map(|n| format!("\"{n}\"")).unwrap_or_default()
        ));
    }
    out
}
