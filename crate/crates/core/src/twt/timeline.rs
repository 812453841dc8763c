use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Micros;
use crate::StationId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimelineError {
    #[error("at least one session is required")]
    NoSessions,
    #[error("no stations to schedule")]
    NoStations,
    #[error("{sessions} sessions cannot be filled by {stations} stations")]
    TooFewStations { sessions: usize, stations: usize },
    #[error("period {period} us is too short for {sessions} sessions")]
    PeriodTooShort { period: Micros, sessions: usize },
}

/// One periodic service period within the TWT period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSlot {
    pub session: usize,
    pub offset_us: Micros,
    pub duration_us: Micros,
    pub members: Vec<StationId>,
}

/// Strategy deciding which stations share a session and when it runs.
pub trait SessionPolicy {
    fn build<R: Rng + ?Sized>(
        &self,
        num_sessions: usize,
        period_us: Micros,
        stations: &[StationId],
        rng: &mut R,
    ) -> Result<Vec<SessionSlot>, TimelineError>;
}

/// Uniformly random equal-size groups; session `i` starts at
/// `i * period / num_sessions` and lasts `period / num_sessions`. When the
/// stations do not divide evenly the earlier sessions get one extra member.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomEqualPartition;

impl SessionPolicy for RandomEqualPartition {
    fn build<R: Rng + ?Sized>(
        &self,
        num_sessions: usize,
        period_us: Micros,
        stations: &[StationId],
        rng: &mut R,
    ) -> Result<Vec<SessionSlot>, TimelineError> {
        if num_sessions == 0 {
            return Err(TimelineError::NoSessions);
        }
        if stations.is_empty() {
            return Err(TimelineError::NoStations);
        }
        if stations.len() < num_sessions {
            return Err(TimelineError::TooFewStations {
                sessions: num_sessions,
                stations: stations.len(),
            });
        }
        let slot = period_us / num_sessions as Micros;
        if slot == 0 {
            return Err(TimelineError::PeriodTooShort {
                period: period_us,
                sessions: num_sessions,
            });
        }
        let mut order = stations.to_vec();
        order.shuffle(rng);
        let base = order.len() / num_sessions;
        let extra = order.len() % num_sessions;
        let mut rest = order.as_slice();
        let mut out = Vec::with_capacity(num_sessions);
        for i in 0..num_sessions {
            let size = base + usize::from(i < extra);
            let (group, tail) = rest.split_at(size);
            rest = tail;
            let mut members = group.to_vec();
            members.sort_unstable();
            out.push(SessionSlot {
                session: i,
                offset_us: i as Micros * slot,
                duration_us: slot,
                members,
            });
        }
        Ok(out)
    }
}

pub fn build_timeline<R: Rng + ?Sized>(
    num_sessions: usize,
    period_us: Micros,
    stations: &[StationId],
    rng: &mut R,
) -> Result<Vec<SessionSlot>, TimelineError> {
    RandomEqualPartition.build(num_sessions, period_us, stations, rng)
}
