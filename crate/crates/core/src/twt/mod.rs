//! Target Wake Time: agreement parameters and bookkeeping, negotiation,
//! session timelines, the element codec and station wake/doze state.

mod codec;
mod negotiation;
mod timeline;
mod wake;

pub use codec::{decode_element, encode_element, DecodeError, TWT_ELEMENT_ID};
pub use negotiation::{
    negotiate, run_dialogue, AcceptAlternatives, Dialogue, DialogueOutcome, NegotiationError,
    PreferredParams, StationStrategy, TwtPolicy,
};
pub use timeline::{build_timeline, RandomEqualPartition, SessionPolicy, SessionSlot, TimelineError};
pub use wake::{awake_time, wake_state, BeaconWake, StationSchedule, WakeState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Micros;
use crate::StationId;

/// Smallest legal minimum wake duration, and its encoding unit.
pub const WAKE_DURATION_UNIT_US: u32 = 256;
/// Agreement ids are 3 bits wide.
pub const MAX_AGREEMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwtParams {
    pub target_wake_time_us: u64,
    /// 0 for a one-shot agreement.
    pub wake_interval_us: u32,
    pub min_wake_duration_us: u32,
    pub channel: u8,
    pub protection: bool,
    pub trigger_enabled: bool,
    pub implicit: bool,
    pub announced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("minimum wake duration {0} us is below 256 us")]
    WakeTooShort(u32),
    #[error("minimum wake duration {0} us is not a multiple of 256 us")]
    WakeUnit(u32),
    #[error("minimum wake duration {0} us exceeds 65535 units of 256 us")]
    WakeTooLong(u32),
    #[error("implicit agreements need a positive wake interval")]
    ImplicitWithoutInterval,
    #[error("minimum wake duration {duration} us exceeds wake interval {interval} us")]
    WakeLongerThanInterval { duration: u32, interval: u32 },
}

impl TwtParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let d = self.min_wake_duration_us;
        if d < WAKE_DURATION_UNIT_US {
            return Err(ParamsError::WakeTooShort(d));
        }
        if d % WAKE_DURATION_UNIT_US != 0 {
            return Err(ParamsError::WakeUnit(d));
        }
        if d / WAKE_DURATION_UNIT_US > u16::MAX as u32 {
            return Err(ParamsError::WakeTooLong(d));
        }
        if self.implicit && self.wake_interval_us == 0 {
            return Err(ParamsError::ImplicitWithoutInterval);
        }
        if self.wake_interval_us > 0 && d > self.wake_interval_us {
            return Err(ParamsError::WakeLongerThanInterval {
                duration: d,
                interval: self.wake_interval_us,
            });
        }
        Ok(())
    }

    /// Largest encodable minimum wake duration not longer than `us`.
    pub fn wake_duration_floor(us: Micros) -> u32 {
        let units = (us / WAKE_DURATION_UNIT_US as u64).clamp(1, u16::MAX as u64);
        units as u32 * WAKE_DURATION_UNIT_US
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Request,
    Response,
}

/// Setup command values; 3 (grouping) is not modeled and never decodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TwtCommand {
    Request = 0,
    Suggest = 1,
    Demand = 2,
    Accept = 4,
    Alternate = 5,
    Dictate = 6,
    Reject = 7,
}

impl TwtCommand {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => TwtCommand::Request,
            1 => TwtCommand::Suggest,
            2 => TwtCommand::Demand,
            4 => TwtCommand::Accept,
            5 => TwtCommand::Alternate,
            6 => TwtCommand::Dictate,
            7 => TwtCommand::Reject,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn direction(self) -> Direction {
        match self {
            TwtCommand::Request | TwtCommand::Suggest | TwtCommand::Demand => Direction::Request,
            _ => Direction::Response,
        }
    }
}

/// Broadcast-session information carried in beacons and setup frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BroadcastInfo {
    pub session_id: u8,
    pub next_target_beacon_us: u64,
    pub listen_interval: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwtMessage {
    pub direction: Direction,
    pub command: TwtCommand,
    pub agreement_id: u8,
    pub params: Option<TwtParams>,
    pub broadcast: Option<BroadcastInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageError {
    #[error("command {command:?} does not belong to a {direction:?}")]
    DirectionMismatch {
        command: TwtCommand,
        direction: Direction,
    },
    #[error("agreement id {0} exceeds 7")]
    AgreementId(u8),
    #[error("{0:?} must carry parameters")]
    MissingParams(TwtCommand),
    #[error("Reject must not carry parameters")]
    RejectWithParams,
    #[error(transparent)]
    Params(#[from] ParamsError),
}

impl TwtMessage {
    pub fn request(command: TwtCommand, agreement_id: u8, params: Option<TwtParams>) -> Self {
        Self {
            direction: Direction::Request,
            command,
            agreement_id,
            params,
            broadcast: None,
        }
    }

    pub fn response(command: TwtCommand, agreement_id: u8, params: Option<TwtParams>) -> Self {
        Self {
            direction: Direction::Response,
            command,
            agreement_id,
            params,
            broadcast: None,
        }
    }

    pub fn validate(&self) -> Result<(), MessageError> {
        if self.command.direction() != self.direction {
            return Err(MessageError::DirectionMismatch {
                command: self.command,
                direction: self.direction,
            });
        }
        if self.agreement_id as usize >= MAX_AGREEMENTS {
            return Err(MessageError::AgreementId(self.agreement_id));
        }
        match (self.command, &self.params) {
            (TwtCommand::Reject, Some(_)) => Err(MessageError::RejectWithParams),
            (TwtCommand::Reject | TwtCommand::Request, None) => Ok(()),
            (c, None) => Err(MessageError::MissingParams(c)),
            (_, Some(p)) => Ok(p.validate()?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgreementKind {
    Individual,
    Broadcast { session_id: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgreementState {
    Negotiating,
    Active,
    TornDown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwtAgreement {
    pub agreement_id: u8,
    pub station: StationId,
    pub params: TwtParams,
    pub kind: AgreementKind,
    pub state: AgreementState,
}

impl TwtAgreement {
    /// Next service period start strictly after `now`.
    ///
    /// Implicit agreements repeat every `wake_interval_us` from the target
    /// wake time. Explicit ones only know the last announced wake time, held
    /// in `params.target_wake_time_us`.
    pub fn next_wake_time(&self, now: Micros) -> Option<Micros> {
        if self.state != AgreementState::Active {
            return None;
        }
        let t0 = self.params.target_wake_time_us;
        if now < t0 {
            return Some(t0);
        }
        if !self.params.implicit {
            return None;
        }
        let interval = self.params.wake_interval_us as u64;
        if interval == 0 {
            return None;
        }
        let n = (now - t0) / interval + 1;
        Some(t0 + n * interval)
    }

    /// Records an explicit wake-time announcement from the AP.
    pub fn announce(&mut self, next_wake_us: Micros) {
        self.params.target_wake_time_us = next_wake_us;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("station {0} already holds {MAX_AGREEMENTS} agreements")]
    TooMany(StationId),
    #[error("agreement id {0} is already in use")]
    IdInUse(u8),
    #[error("no agreement with id {0}")]
    Unknown(u8),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Active agreements of one station, indexed by their 3-bit id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgreementTable {
    station: StationId,
    slots: [Option<TwtAgreement>; MAX_AGREEMENTS],
}

impl AgreementTable {
    pub fn new(station: StationId) -> Self {
        Self {
            station,
            slots: Default::default(),
        }
    }

    pub fn free_id(&self) -> Option<u8> {
        self.slots.iter().position(Option::is_none).map(|i| i as u8)
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn install(&mut self, id: u8, params: TwtParams, kind: AgreementKind) -> Result<&TwtAgreement, AgreementError> {
        params.validate()?;
        if self.free_id().is_none() {
            return Err(AgreementError::TooMany(self.station));
        }
        let slot = self
            .slots
            .get_mut(id as usize)
            .ok_or(AgreementError::Unknown(id))?;
        if slot.is_some() {
            return Err(AgreementError::IdInUse(id));
        }
        Ok(slot.insert(TwtAgreement {
            agreement_id: id,
            station: self.station,
            params,
            kind,
            state: AgreementState::Active,
        }))
    }

    pub fn teardown(&mut self, id: u8) -> Result<TwtAgreement, AgreementError> {
        let mut a = self
            .slots
            .get_mut(id as usize)
            .and_then(Option::take)
            .ok_or(AgreementError::Unknown(id))?;
        a.state = AgreementState::TornDown;
        Ok(a)
    }

    pub fn get(&self, id: u8) -> Option<&TwtAgreement> {
        self.slots.get(id as usize).and_then(Option::as_ref)
    }

    pub fn get_mut(&mut self, id: u8) -> Option<&mut TwtAgreement> {
        self.slots.get_mut(id as usize).and_then(Option::as_mut)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TwtAgreement> {
        self.slots.iter().flatten()
    }
}
