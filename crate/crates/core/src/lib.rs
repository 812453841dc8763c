//! Discrete-event simulator of an 802.11ax uplink BSS comparing contention
//! access (DCF) against scheduled Target Wake Time sessions served with
//! multiuser transmissions.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod dcf;
pub mod engine;
pub mod harness;
pub mod metrics;
pub mod mu;
pub mod overhead;
pub mod phy;
pub mod traffic;
pub mod twt;

/// Index of a station within a scenario; [`traffic::AP`] marks the AP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(pub u16);

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == traffic::AP {
            f.write_str("AP")
        } else {
            write!(f, "STA{}", self.0)
        }
    }
}
