use serde::{Deserialize, Serialize};

use crate::engine::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WakeState {
    Awake,
    Dozing,
}

/// Beacons a broadcast-session member has to receive: every
/// `listen_interval`-th beacon counted from `first_beacon_us`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeaconWake {
    pub first_beacon_us: Micros,
    pub beacon_interval_us: Micros,
    pub listen_interval: u16,
    pub window_us: Micros,
}

impl BeaconWake {
    fn spacing(&self) -> Micros {
        self.beacon_interval_us * self.listen_interval.max(1) as Micros
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationSchedule {
    /// Always awake.
    NonTwt,
    Twt {
        /// (offset within the period, duration) of each service period.
        sessions: Vec<(Micros, Micros)>,
        period_us: Micros,
        /// Start of the first period.
        start_us: Micros,
        beacon: Option<BeaconWake>,
    },
}

pub fn wake_state(schedule: &StationSchedule, now: Micros) -> WakeState {
    match schedule {
        StationSchedule::NonTwt => WakeState::Awake,
        StationSchedule::Twt {
            sessions,
            period_us,
            start_us,
            beacon,
        } => {
            let in_session = now >= *start_us && {
                let phase = (now - start_us) % period_us;
                sessions.iter().any(|&(off, dur)| phase >= off && phase < off + dur)
            };
            let in_beacon = beacon.is_some_and(|b| {
                now >= b.first_beacon_us && (now - b.first_beacon_us) % b.spacing() < b.window_us
            });
            if in_session || in_beacon {
                WakeState::Awake
            } else {
                WakeState::Dozing
            }
        }
    }
}

/// Time spent awake within `[from, to)`, counting overlaps once.
pub fn awake_time(schedule: &StationSchedule, from: Micros, to: Micros) -> Micros {
    if to <= from {
        return 0;
    }
    let (sessions, period, start, beacon) = match schedule {
        StationSchedule::NonTwt => return to - from,
        StationSchedule::Twt {
            sessions,
            period_us,
            start_us,
            beacon,
        } => (sessions, *period_us, *start_us, beacon),
    };
    let mut spans: Vec<(Micros, Micros)> = Vec::new();
    let mut push = |a: Micros, b: Micros| {
        let (a, b) = (a.max(from), b.min(to));
        if a < b {
            spans.push((a, b));
        }
    };
    if period > 0 && to > start {
        let first = from.saturating_sub(start) / period;
        let last = (to - start).div_ceil(period);
        for k in first.saturating_sub(1)..=last {
            let base = start + k * period;
            for &(off, dur) in sessions {
                push(base + off, base + off + dur);
            }
        }
    }
    if let Some(b) = beacon {
        let step = b.spacing();
        if step > 0 && to > b.first_beacon_us {
            let first = from.saturating_sub(b.first_beacon_us) / step;
            let mut t = b.first_beacon_us + first.saturating_sub(1) * step;
            while t < to {
                push(t, t + b.window_us);
                t += step;
            }
        }
    }
    spans.sort_unstable();
    let mut total = 0;
    let mut cur: Option<(Micros, Micros)> = None;
    for (a, b) in spans {
        cur = match cur {
            Some((ca, cb)) if a <= cb => Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    total
}
