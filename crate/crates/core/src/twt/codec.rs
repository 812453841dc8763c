//! Canonical byte layout of the TWT element used inside the simulator.
//! It mirrors the field set of the standard element but is not meant to be
//! wire-compatible.
//!
//! ```text
//! 0      element id (216)
//! 1      body length
//! 2..4   request type, little endian
//!          bits 0-2   setup command
//!          bit  3     trigger
//!          bit  4     implicit
//!          bit  5     flow type (1 = unannounced)
//!          bits 6-8   agreement id
//!          bit  9     parameter block present
//!          bit  10    broadcast block present
//!          bits 11-15 reserved, zero
//! parameter block (16 bytes)
//!   u64 target wake time, u32 wake interval, u16 min wake duration
//!   (256 us units), u8 channel, u8 flags (bit 0 protection, rest zero)
//! broadcast block (11 bytes)
//!   u8 session id, u64 next target beacon, u16 listen interval
//! ```
//!
//! The direction is implied by the setup command.

use thiserror::Error;

use super::{
    BroadcastInfo, MessageError, TwtCommand, TwtMessage, TwtParams, WAKE_DURATION_UNIT_US,
};

pub const TWT_ELEMENT_ID: u8 = 216;

const PARAMS_LEN: usize = 16;
const BROADCAST_LEN: usize = 11;

const TRIGGER: u16 = 1 << 3;
const IMPLICIT: u16 = 1 << 4;
const UNANNOUNCED: u16 = 1 << 5;
const HAS_PARAMS: u16 = 1 << 9;
const HAS_BROADCAST: u16 = 1 << 10;
const RESERVED: u16 = 0xf800;
const PROTECTION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated {field}: need {needed} bytes, {available} left")]
    Truncated {
        field: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("element id {0} is not a TWT element")]
    ElementId(u8),
    #[error("length field says {declared} bytes but the present blocks need {expected}")]
    Length { declared: usize, expected: usize },
    #[error("setup command {0} is undefined")]
    SetupCommand(u8),
    #[error("reserved bits set in {field}: {value:#x}")]
    Reserved { field: &'static str, value: u16 },
    #[error("trigger/implicit/flow-type bits set without a parameter block")]
    FlagsWithoutParams,
    #[error("{0} trailing bytes after the element")]
    Trailing(usize),
    #[error("invalid message: {0}")]
    Invalid(#[from] MessageError),
}

/// Serializes a message after validating it.
pub fn encode_element(m: &TwtMessage) -> Result<Vec<u8>, MessageError> {
    m.validate()?;
    let mut body = Vec::with_capacity(2 + PARAMS_LEN + BROADCAST_LEN);
    let mut rt = m.command.code() as u16 | (m.agreement_id as u16) << 6;
    if let Some(p) = &m.params {
        rt |= HAS_PARAMS;
        if p.trigger_enabled {
            rt |= TRIGGER;
        }
        if p.implicit {
            rt |= IMPLICIT;
        }
        if !p.announced {
            rt |= UNANNOUNCED;
        }
    }
    if m.broadcast.is_some() {
        rt |= HAS_BROADCAST;
    }
    body.extend_from_slice(&rt.to_le_bytes());
    if let Some(p) = &m.params {
        body.extend_from_slice(&p.target_wake_time_us.to_le_bytes());
        body.extend_from_slice(&p.wake_interval_us.to_le_bytes());
        let units = (p.min_wake_duration_us / WAKE_DURATION_UNIT_US) as u16;
        body.extend_from_slice(&units.to_le_bytes());
        body.push(p.channel);
        body.push(if p.protection { PROTECTION } else { 0 });
    }
    if let Some(b) = &m.broadcast {
        body.push(b.session_id);
        body.extend_from_slice(&b.next_target_beacon_us.to_le_bytes());
        body.extend_from_slice(&b.listen_interval.to_le_bytes());
    }
    let mut out = Vec::with_capacity(body.len() + 2);
    out.push(TWT_ELEMENT_ID);
    out.push(body.len() as u8);
    out.extend_from_slice(&body);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self, field: &'static str) -> Result<[u8; N], DecodeError> {
        if self.buf.len() < N {
            return Err(DecodeError::Truncated {
                field,
                needed: N,
                available: self.buf.len(),
            });
        }
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        Ok(head.try_into().expect("split at N"))
    }

    fn u8(&mut self, field: &'static str) -> Result<u8, DecodeError> {
        Ok(self.take::<1>(field)?[0])
    }
    fn u16(&mut self, field: &'static str) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take(field)?))
    }
    fn u32(&mut self, field: &'static str) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(field)?))
    }
    fn u64(&mut self, field: &'static str) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(field)?))
    }
}

/// Parses one element that must span all of `bytes`.
pub fn decode_element(bytes: &[u8]) -> Result<TwtMessage, DecodeError> {
    let mut r = Reader { buf: bytes };
    let id = r.u8("element id")?;
    if id != TWT_ELEMENT_ID {
        return Err(DecodeError::ElementId(id));
    }
    let declared = r.u8("length")? as usize;
    let rt = r.u16("request type")?;
    if rt & RESERVED != 0 {
        return Err(DecodeError::Reserved {
            field: "request type",
            value: rt & RESERVED,
        });
    }
    let code = (rt & 0x7) as u8;
    let command = TwtCommand::from_code(code).ok_or(DecodeError::SetupCommand(code))?;
    let agreement_id = ((rt >> 6) & 0x7) as u8;
    let has_params = rt & HAS_PARAMS != 0;
    let has_broadcast = rt & HAS_BROADCAST != 0;
    let expected = 2 + PARAMS_LEN * usize::from(has_params) + BROADCAST_LEN * usize::from(has_broadcast);
    if declared != expected {
        return Err(DecodeError::Length { declared, expected });
    }

    let params = if has_params {
        let target_wake_time_us = r.u64("target wake time")?;
        let wake_interval_us = r.u32("wake interval")?;
        let units = r.u16("min wake duration")?;
        let channel = r.u8("channel")?;
        let flags = r.u8("flags")?;
        if flags & !PROTECTION != 0 {
            return Err(DecodeError::Reserved {
                field: "flags",
                value: (flags & !PROTECTION) as u16,
            });
        }
        Some(TwtParams {
            target_wake_time_us,
            wake_interval_us,
            min_wake_duration_us: units as u32 * WAKE_DURATION_UNIT_US,
            channel,
            protection: flags & PROTECTION != 0,
            trigger_enabled: rt & TRIGGER != 0,
            implicit: rt & IMPLICIT != 0,
            announced: rt & UNANNOUNCED == 0,
        })
    } else {
        if rt & (TRIGGER | IMPLICIT | UNANNOUNCED) != 0 {
            return Err(DecodeError::FlagsWithoutParams);
        }
        None
    };
    let broadcast = if has_broadcast {
        Some(BroadcastInfo {
            session_id: r.u8("broadcast session id")?,
            next_target_beacon_us: r.u64("next target beacon")?,
            listen_interval: r.u16("listen interval")?,
        })
    } else {
        None
    };
    if !r.buf.is_empty() {
        return Err(DecodeError::Trailing(r.buf.len()));
    }
    let m = TwtMessage {
        direction: command.direction(),
        command,
        agreement_id,
        params,
        broadcast,
    };
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twt::tests::params;

    fn all_flags() -> TwtMessage {
        TwtMessage {
            broadcast: Some(BroadcastInfo {
                session_id: 3,
                next_target_beacon_us: 204_800,
                listen_interval: 2,
            }),
            ..TwtMessage::response(
                TwtCommand::Accept,
                5,
                Some(TwtParams {
                    announced: true,
                    ..params()
                }),
            )
        }
    }

    #[test]
    fn accept_round_trips() {
        let m = all_flags();
        let bytes = encode_element(&m).unwrap();
        assert_eq!(bytes.len(), 2 + 2 + 16 + 11);
        assert_eq!(bytes[0], TWT_ELEMENT_ID);
        assert_eq!(bytes[1] as usize, bytes.len() - 2);
        assert_eq!(decode_element(&bytes).unwrap(), m);
    }

    #[test]
    fn bare_request_is_four_bytes() {
        let m = TwtMessage::request(TwtCommand::Request, 1, None);
        let bytes = encode_element(&m).unwrap();
        assert_eq!(bytes, vec![216, 2, 0x40, 0x00]);
        assert_eq!(decode_element(&bytes).unwrap(), m);
    }

    #[test]
    fn known_encoding() {
        let m = TwtMessage::request(TwtCommand::Demand, 0, Some(params()));
        let bytes = encode_element(&m).unwrap();
        // demand | trigger | implicit | unannounced | params
        assert_eq!(&bytes[2..4], &(2u16 | 0x8 | 0x10 | 0x20 | 0x200).to_le_bytes());
        assert_eq!(&bytes[4..12], &1_000u64.to_le_bytes());
        assert_eq!(&bytes[12..16], &20_000u32.to_le_bytes());
        assert_eq!(&bytes[16..18], &39u16.to_le_bytes());
        assert_eq!(&bytes[18..20], &[36, 1]);
    }

    #[test]
    fn undefined_setup_command() {
        let mut bytes = encode_element(&TwtMessage::request(TwtCommand::Request, 0, None)).unwrap();
        bytes[2] = 3;
        assert_eq!(decode_element(&bytes), Err(DecodeError::SetupCommand(3)));
    }

    #[test]
    fn every_truncation_rejected() {
        let bytes = encode_element(&all_flags()).unwrap();
        for n in 0..bytes.len() {
            assert!(decode_element(&bytes[..n]).is_err(), "prefix {n} decoded");
        }
    }

    #[test]
    fn truncation_names_field() {
        let bytes = encode_element(&all_flags()).unwrap();
        match decode_element(&bytes[..10]) {
            Err(DecodeError::Truncated { field, .. }) => assert_eq!(field, "target wake time"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_rejected() {
        assert_eq!(decode_element(&[0, 2, 0, 0]), Err(DecodeError::ElementId(0)));
        assert!(matches!(decode_element(&[216, 2, 0, 0x80]), Err(DecodeError::Reserved { .. })));
        assert_eq!(decode_element(&[216, 2, 0x08, 0]), Err(DecodeError::FlagsWithoutParams));
        assert!(matches!(decode_element(&[216, 5, 0, 0]), Err(DecodeError::Length { .. })));
        assert_eq!(decode_element(&[216, 2, 0, 0, 9]), Err(DecodeError::Trailing(1)));
        // Reject carrying parameters
        let mut b = encode_element(&TwtMessage::request(TwtCommand::Demand, 0, Some(params()))).unwrap();
        b[2] = (b[2] & !0x7) | 7;
        assert!(matches!(decode_element(&b), Err(DecodeError::Invalid(MessageError::RejectWithParams))));
    }

    #[test]
    fn encode_refuses_invalid() {
        let m = TwtMessage::request(TwtCommand::Accept, 0, Some(params()));
        assert!(encode_element(&m).is_err());
    }
}
