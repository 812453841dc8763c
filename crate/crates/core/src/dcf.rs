//! CSMA/CA with binary exponential backoff.
//!
//! The channel is slot synchronized and every station hears every other
//! station, so two transmissions starting in the same slot collide and a
//! station never starts while another transmission is on the air.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Micros;
use crate::StationId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcfConfig {
    pub cw_min: u32,
    pub cw_max: u32,
    pub slot_us: Micros,
    pub difs_us: Micros,
    pub retry_limit: u32,
    /// Protect every access with RTS/CTS.
    pub rts_cts: bool,
    /// Time after an RTS collision until the senders give up waiting for CTS.
    pub cts_timeout_us: Micros,
}

impl Default for DcfConfig {
    fn default() -> Self {
        Self {
            cw_min: 15,
            cw_max: 511,
            slot_us: 9,
            difs_us: 34,
            retry_limit: 7,
            rts_cts: true,
            cts_timeout_us: 69,
        }
    }
}

impl DcfConfig {
    /// Contention window upper bound at a retry stage.
    pub fn cw(&self, stage: u32) -> u32 {
        let base = self.cw_min as u64 + 1;
        let scaled = base.checked_shl(stage).unwrap_or(u64::MAX);
        if scaled == 0 || scaled > self.cw_max as u64 + 1 {
            self.cw_max
        } else {
            (scaled - 1) as u32
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let pow2m1 = |x: u32| (x as u64 + 1).is_power_of_two();
        if !pow2m1(self.cw_min) {
            errs.push(format!("dcf.cw_min: {} is not of the form 2^m - 1", self.cw_min));
        }
        if !pow2m1(self.cw_max) {
            errs.push(format!("dcf.cw_max: {} is not of the form 2^m - 1", self.cw_max));
        }
        if self.cw_min > self.cw_max {
            errs.push("dcf.cw_min: must not exceed cw_max".into());
        }
        if self.slot_us == 0 {
            errs.push("dcf.slot_us: must be positive".into());
        }
        errs
    }
}

/// Uniform backoff in `[0, CW(stage)]`.
pub fn draw_backoff<R: Rng + ?Sized>(cfg: &DcfConfig, stage: u32, rng: &mut R) -> u32 {
    rng.random_range(0..=cfg.cw(stage))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AccessOutcome {
    Idle,
    Success(StationId),
    Collision(Vec<StationId>),
}

pub fn resolve_access(transmitters: &[StationId]) -> AccessOutcome {
    match transmitters {
        [] => AccessOutcome::Idle,
        [one] => AccessOutcome::Success(*one),
        many => AccessOutcome::Collision(many.to_vec()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DcfState {
    /// Nothing to send.
    Idle,
    /// Backlogged, counter frozen while the medium is busy or within DIFS.
    Deferring,
    CountingDown,
    Transmitting,
    WaitingAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// The medium has been idle for DIFS after a busy period.
    DifsIdle,
    /// One further idle slot elapsed.
    IdleSlot,
    Busy,
    Ack,
    NoAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    None,
    StartTransmission,
    /// Retry limit reached: discard the head A-MPDU.
    DropPacket,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("observation {observation:?} is not legal in state {state:?}")]
pub struct ProtocolError {
    pub state: DcfState,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcfStation {
    pub state: DcfState,
    pub backoff: u32,
    pub stage: u32,
}

impl Default for DcfStation {
    fn default() -> Self {
        Self::new()
    }
}

impl DcfStation {
    pub fn new() -> Self {
        Self {
            state: DcfState::Idle,
            backoff: 0,
            stage: 0,
        }
    }

    /// A packet arrives at an idle station: draw a stage-0 backoff and wait
    /// for the medium.
    pub fn activate<R: Rng + ?Sized>(&mut self, cfg: &DcfConfig, rng: &mut R) {
        debug_assert_eq!(self.state, DcfState::Idle);
        self.stage = 0;
        self.backoff = draw_backoff(cfg, 0, rng);
        self.state = DcfState::Deferring;
    }

    pub fn deactivate(&mut self) {
        self.state = DcfState::Idle;
        self.stage = 0;
        self.backoff = 0;
    }

    pub fn is_contending(&self) -> bool {
        matches!(self.state, DcfState::Deferring | DcfState::CountingDown)
    }

    /// Applies `k` idle slots at once without transmitting; the counter must
    /// stay positive or reach exactly zero.
    pub fn count_idle_slots(&mut self, k: u32) {
        debug_assert!(k <= self.backoff);
        self.backoff -= k;
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        cfg: &DcfConfig,
        obs: Observation,
        rng: &mut R,
    ) -> Result<Action, ProtocolError> {
        use DcfState::*;
        use Observation::*;
        let illegal = ProtocolError {
            state: self.state,
            observation: obs,
        };
        match (self.state, obs) {
            (Idle, DifsIdle | IdleSlot | Busy) => Ok(Action::None),
            (Deferring | CountingDown, DifsIdle) => {
                self.state = CountingDown;
                Ok(self.fire_if_zero())
            }
            (CountingDown, IdleSlot) => {
                if self.backoff == 0 {
                    return Err(illegal);
                }
                self.backoff -= 1;
                Ok(self.fire_if_zero())
            }
            (Deferring | CountingDown, Busy) => {
                self.state = Deferring;
                Ok(Action::None)
            }
            (Transmitting | WaitingAck, Busy) => {
                self.state = WaitingAck;
                Ok(Action::None)
            }
            (Transmitting | WaitingAck, Ack) => {
                self.stage = 0;
                self.backoff = draw_backoff(cfg, 0, rng);
                self.state = Deferring;
                Ok(Action::None)
            }
            (Transmitting | WaitingAck, NoAck) => {
                let action = if self.stage >= cfg.retry_limit {
                    self.stage = 0;
                    Action::DropPacket
                } else {
                    self.stage += 1;
                    Action::None
                };
                self.backoff = draw_backoff(cfg, self.stage, rng);
                self.state = Deferring;
                Ok(action)
            }
            _ => Err(illegal),
        }
    }

    fn fire_if_zero(&mut self) -> Action {
        if self.backoff == 0 {
            self.state = DcfState::Transmitting;
            Action::StartTransmission
        } else {
            Action::None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngStream;

    #[test]
    fn contention_window_by_stage() {
        let c = DcfConfig::default();
        assert_eq!(c.cw(0), 15);
        assert_eq!(c.cw(1), 31);
        assert_eq!(c.cw(4), 255);
        assert_eq!(c.cw(5), 511);
        assert_eq!(c.cw(9), 511);
        assert_eq!(c.cw(200), 511);
    }

    #[test]
    fn stage_zero_draws_cover_window() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(1, 1);
        let mut seen = [false; 16];
        for _ in 0..10_000 {
            let b = draw_backoff(&c, 0, &mut rng);
            assert!(b <= 15);
            seen[b as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn capped_stages_stay_in_range() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(2, 1);
        let mut max = 0;
        for stage in [5, 9] {
            for _ in 0..5_000 {
                let b = draw_backoff(&c, stage, &mut rng);
                assert!(b <= 511);
                max = max.max(b);
            }
        }
        assert!(max > 255);
    }

    #[test]
    fn access_resolution() {
        let (a, b) = (StationId(1), StationId(2));
        assert_eq!(resolve_access(&[]), AccessOutcome::Idle);
        assert_eq!(resolve_access(&[a]), AccessOutcome::Success(a));
        assert_eq!(resolve_access(&[a, b]), AccessOutcome::Collision(vec![a, b]));
    }

    #[test]
    fn last_idle_slot_starts_transmission() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(0, 0);
        let mut s = DcfStation {
            state: DcfState::CountingDown,
            backoff: 1,
            stage: 0,
        };
        assert_eq!(s.step(&c, Observation::IdleSlot, &mut rng), Ok(Action::StartTransmission));
        assert_eq!(s.backoff, 0);
        assert_eq!(s.state, DcfState::Transmitting);
    }

    #[test]
    fn busy_freezes_counter() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(0, 0);
        let mut s = DcfStation {
            state: DcfState::CountingDown,
            backoff: 6,
            stage: 2,
        };
        s.step(&c, Observation::Busy, &mut rng).unwrap();
        assert_eq!((s.state, s.backoff, s.stage), (DcfState::Deferring, 6, 2));
        assert_eq!(s.step(&c, Observation::DifsIdle, &mut rng), Ok(Action::None));
        assert_eq!(s.state, DcfState::CountingDown);
    }

    #[test]
    fn zero_counter_fires_after_difs() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(0, 0);
        let mut s = DcfStation {
            state: DcfState::Deferring,
            backoff: 0,
            stage: 0,
        };
        assert_eq!(s.step(&c, Observation::DifsIdle, &mut rng), Ok(Action::StartTransmission));
    }

    #[test]
    fn ack_resets_stage() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(3, 0);
        let mut s = DcfStation {
            state: DcfState::WaitingAck,
            backoff: 0,
            stage: 4,
        };
        assert_eq!(s.step(&c, Observation::Ack, &mut rng), Ok(Action::None));
        assert_eq!(s.stage, 0);
        assert!(s.backoff <= 15);
        assert_eq!(s.state, DcfState::Deferring);
    }

    #[test]
    fn no_ack_doubles_then_drops_at_limit() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(3, 0);
        let mut s = DcfStation {
            state: DcfState::WaitingAck,
            backoff: 0,
            stage: 0,
        };
        assert_eq!(s.step(&c, Observation::NoAck, &mut rng), Ok(Action::None));
        assert_eq!(s.stage, 1);
        assert!(s.backoff <= 31);

        s.state = DcfState::WaitingAck;
        s.stage = c.retry_limit;
        assert_eq!(s.step(&c, Observation::NoAck, &mut rng), Ok(Action::DropPacket));
        assert_eq!(s.stage, 0);
        assert!(s.backoff <= 15);
    }

    #[test]
    fn illegal_pairs_are_protocol_errors() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(0, 0);
        let mut idle = DcfStation::new();
        assert!(idle.step(&c, Observation::Ack, &mut rng).is_err());
        let mut counting = DcfStation {
            state: DcfState::CountingDown,
            backoff: 3,
            stage: 0,
        };
        assert!(counting.step(&c, Observation::NoAck, &mut rng).is_err());
        let mut deferring = DcfStation {
            state: DcfState::Deferring,
            backoff: 3,
            stage: 0,
        };
        assert_eq!(
            deferring.step(&c, Observation::IdleSlot, &mut rng),
            Err(ProtocolError {
                state: DcfState::Deferring,
                observation: Observation::IdleSlot
            })
        );
        let mut waiting = DcfStation {
            state: DcfState::WaitingAck,
            backoff: 0,
            stage: 0,
        };
        assert!(waiting.step(&c, Observation::IdleSlot, &mut rng).is_err());
    }

    #[test]
    fn bulk_idle_slots_match_single_steps() {
        let c = DcfConfig::default();
        let mut rng = RngStream::new(0, 0);
        for start in 1..40u32 {
            for k in 0..start {
                let mut one = DcfStation {
                    state: DcfState::CountingDown,
                    backoff: start,
                    stage: 0,
                };
                let mut bulk = one.clone();
                for _ in 0..k {
                    assert_eq!(one.step(&c, Observation::IdleSlot, &mut rng), Ok(Action::None));
                }
                bulk.count_idle_slots(k);
                assert_eq!(one, bulk);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(DcfConfig::default().validate().is_empty());
        let bad = DcfConfig {
            cw_min: 16,
            cw_max: 7,
            ..DcfConfig::default()
        };
        assert_eq!(bad.validate().len(), 2);
    }
}
