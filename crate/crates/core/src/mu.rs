//! Multiuser uplink scheduling: OFDMA resource units, MU-MIMO stream
//! assignment and the duration of a trigger-based exchange.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Micros;
use crate::phy::{AirtimeQuery, ExchangeTiming, Mcs, PhyConfig, PhyError};
use crate::StationId;

/// Maximum spatial streams multiplexed on one RU.
pub const MAX_STREAMS_PER_RU: u8 = 8;
/// Smallest RU on which several users may share tones through MU-MIMO.
pub const MIN_MU_MIMO_TONES: u16 = 106;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuSize {
    Tones26,
    Tones52,
    Tones106,
    Tones242,
    Tones484,
    Tones996,
    Tones2x996,
}

impl RuSize {
    pub const ALL: [RuSize; 7] = [
        RuSize::Tones26,
        RuSize::Tones52,
        RuSize::Tones106,
        RuSize::Tones242,
        RuSize::Tones484,
        RuSize::Tones996,
        RuSize::Tones2x996,
    ];

    pub fn tones(self) -> u16 {
        match self {
            RuSize::Tones26 => 26,
            RuSize::Tones52 => 52,
            RuSize::Tones106 => 106,
            RuSize::Tones242 => 242,
            RuSize::Tones484 => 484,
            RuSize::Tones996 => 996,
            RuSize::Tones2x996 => 1992,
        }
    }

    /// Data subcarriers (tones minus pilots).
    pub fn data_tones(self) -> u16 {
        match self {
            RuSize::Tones26 => 24,
            RuSize::Tones52 => 48,
            RuSize::Tones106 => 102,
            RuSize::Tones242 => 234,
            RuSize::Tones484 => 468,
            RuSize::Tones996 => 980,
            RuSize::Tones2x996 => 1960,
        }
    }

    pub fn from_tones(tones: u16) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.tones() == tones)
    }

    pub fn full_width(width_mhz: u32) -> Option<Self> {
        match width_mhz {
            20 => Some(RuSize::Tones242),
            40 => Some(RuSize::Tones484),
            80 => Some(RuSize::Tones996),
            160 => Some(RuSize::Tones2x996),
            _ => None,
        }
    }

    fn half_width(width_mhz: u32) -> Option<(Self, Self)> {
        // (half-band RU, RU size that tiles the other half twice)
        match width_mhz {
            20 => Some((RuSize::Tones106, RuSize::Tones52)),
            40 => Some((RuSize::Tones242, RuSize::Tones106)),
            80 => Some((RuSize::Tones484, RuSize::Tones242)),
            160 => Some((RuSize::Tones996, RuSize::Tones484)),
            _ => None,
        }
    }
}

/// Tone budget of a channel width.
pub fn tone_budget(width_mhz: u32) -> Option<u16> {
    RuSize::full_width(width_mhz).map(RuSize::tones)
}

/// RU positions of one 20 MHz subchannel, as (first 26-tone slot, slot count).
fn positions_20(size: RuSize) -> &'static [(u32, u32)] {
    match size {
        RuSize::Tones26 => &[(0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (5, 1), (6, 1), (7, 1), (8, 1)],
        RuSize::Tones52 => &[(0, 2), (2, 2), (5, 2), (7, 2)],
        RuSize::Tones106 => &[(0, 4), (5, 4)],
        RuSize::Tones242 => &[(0, 9)],
        _ => &[],
    }
}

/// Slot masks of every legal position of `size` in a channel of `width_mhz`.
/// Slots are 26-tone units: 9 per 20 MHz, plus one center slot per 80 MHz.
fn positions(size: RuSize, width_mhz: u32) -> Vec<u128> {
    fn mask(start: u32, len: u32) -> u128 {
        (((1u128 << len) - 1) << start) as u128
    }
    fn in_80(size: RuSize, base: u32, out: &mut Vec<u128>) {
        // two 40 MHz halves at slots base..base+18 and base+19..base+37,
        // center 26-tone RU at base+18
        match size {
            RuSize::Tones996 => out.push(mask(base, 37)),
            RuSize::Tones484 => {
                out.push(mask(base, 18));
                out.push(mask(base + 19, 18));
            }
            RuSize::Tones2x996 => {}
            _ => {
                for sub in [0, 9, 19, 28] {
                    for &(s, l) in positions_20(size) {
                        out.push(mask(base + sub + s, l));
                    }
                }
                if size == RuSize::Tones26 {
                    out.push(mask(base + 18, 1));
                }
            }
        }
    }
    let mut out = Vec::new();
    match width_mhz {
        20 => out.extend(positions_20(size).iter().map(|&(s, l)| mask(s, l))),
        40 => match size {
            RuSize::Tones484 => out.push(mask(0, 18)),
            RuSize::Tones996 | RuSize::Tones2x996 => {}
            _ => {
                for sub in [0, 9] {
                    out.extend(positions_20(size).iter().map(|&(s, l)| mask(sub + s, l)));
                }
            }
        },
        80 => in_80(size, 0, &mut out),
        160 => {
            if size == RuSize::Tones2x996 {
                out.push(mask(0, 74));
            } else {
                in_80(size, 0, &mut out);
                in_80(size, 37, &mut out);
            }
        }
        _ => {}
    }
    out
}

/// Number of RUs of `size` that fit in `width_mhz`.
pub fn ru_count(size: RuSize, width_mhz: u32) -> usize {
    positions(size, width_mhz).len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAllocation {
    pub station: StationId,
    pub streams: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceUnit {
    pub size: RuSize,
    pub users: Vec<UserAllocation>,
}

impl ResourceUnit {
    pub fn total_streams(&self) -> u32 {
        self.users.iter().map(|u| u.streams as u32).sum()
    }
}

/// Per-user RU and spatial stream assignment for one MU transmission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuAllocation {
    pub channel_width_mhz: u32,
    pub rus: Vec<ResourceUnit>,
}

impl RuAllocation {
    pub fn stations(&self) -> impl Iterator<Item = StationId> + '_ {
        self.rus.iter().flat_map(|ru| ru.users.iter().map(|u| u.station))
    }

    /// RU size and stream count assigned to `station`.
    pub fn assignment(&self, station: StationId) -> Option<(RuSize, u8)> {
        self.rus.iter().find_map(|ru| {
            ru.users
                .iter()
                .find(|u| u.station == station)
                .map(|u| (ru.size, u.streams))
        })
    }

    pub fn len(&self) -> usize {
        self.rus.iter().map(|ru| ru.users.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnsupportedWidth(u32),
    RuNotInWidth { ru: usize, tones: u16 },
    EmptyRu { ru: usize },
    DuplicateStation(StationId),
    ZeroStreams { ru: usize, station: StationId },
    MuMimoRuTooSmall { ru: usize, tones: u16 },
    TooManyStreams { ru: usize, streams: u32 },
    ToneBudget { used: u32, budget: u16 },
    NoTiling,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::UnsupportedWidth(w) => write!(f, "unsupported channel width {w} MHz"),
            Violation::RuNotInWidth { ru, tones } => {
                write!(f, "RU #{ru}: {tones}-tone RU does not exist at this width")
            }
            Violation::EmptyRu { ru } => write!(f, "RU #{ru}: no users"),
            Violation::DuplicateStation(s) => write!(f, "station {s} allocated more than once"),
            Violation::ZeroStreams { ru, station } => {
                write!(f, "RU #{ru}: station {station} has zero streams")
            }
            Violation::MuMimoRuTooSmall { ru, tones } => write!(
                f,
                "RU #{ru}: {tones} tones shared by several users, MU-MIMO needs >= {MIN_MU_MIMO_TONES}"
            ),
            Violation::TooManyStreams { ru, streams } => write!(
                f,
                "RU #{ru}: {streams} streams exceed {MAX_STREAMS_PER_RU}"
            ),
            Violation::ToneBudget { used, budget } => {
                write!(f, "{used} tones allocated, channel budget is {budget}")
            }
            Violation::NoTiling => write!(f, "RUs cannot be placed without overlap"),
        }
    }
}

/// Checks every allocation invariant and returns all violations found.
pub fn validate(a: &RuAllocation) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let Some(budget) = tone_budget(a.channel_width_mhz) else {
        return Err(vec![Violation::UnsupportedWidth(a.channel_width_mhz)]);
    };
    let mut seen = std::collections::BTreeSet::new();
    let mut used: u32 = 0;
    let mut legal = true;
    for (i, ru) in a.rus.iter().enumerate() {
        used += ru.size.tones() as u32;
        if ru_count(ru.size, a.channel_width_mhz) == 0 {
            v.push(Violation::RuNotInWidth {
                ru: i,
                tones: ru.size.tones(),
            });
            legal = false;
        }
        if ru.users.is_empty() {
            v.push(Violation::EmptyRu { ru: i });
        }
        for u in &ru.users {
            if !seen.insert(u.station) {
                v.push(Violation::DuplicateStation(u.station));
            }
            if u.streams == 0 {
                v.push(Violation::ZeroStreams {
                    ru: i,
                    station: u.station,
                });
            }
        }
        if ru.users.len() >= 2 && ru.size.tones() < MIN_MU_MIMO_TONES {
            v.push(Violation::MuMimoRuTooSmall {
                ru: i,
                tones: ru.size.tones(),
            });
        }
        let streams = ru.total_streams();
        if streams > MAX_STREAMS_PER_RU as u32 {
            v.push(Violation::TooManyStreams { ru: i, streams });
        }
    }
    if used > budget as u32 {
        v.push(Violation::ToneBudget { used, budget });
    }
    if legal && !tiles(a) {
        v.push(Violation::NoTiling);
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Whether the RUs can be placed at distinct legal positions.
fn tiles(a: &RuAllocation) -> bool {
    let mut sizes: Vec<RuSize> = a.rus.iter().map(|r| r.size).collect();
    sizes.sort_unstable_by(|x, y| y.cmp(x));
    let cands: Vec<Vec<u128>> = sizes
        .iter()
        .map(|&s| positions(s, a.channel_width_mhz))
        .collect();
    fn place(i: usize, occupied: u128, cands: &[Vec<u128>], sizes: &[RuSize], last: usize) -> bool {
        if i == cands.len() {
            return true;
        }
        // identical sizes are interchangeable: keep their positions ordered
        let start = if i > 0 && sizes[i] == sizes[i - 1] { last + 1 } else { 0 };
        for (j, &m) in cands[i].iter().enumerate().skip(start) {
            if m & occupied == 0 && place(i + 1, occupied | m, cands, sizes, j) {
                return true;
            }
        }
        false
    }
    place(0, 0, &cands, &sizes, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuPolicy {
    /// All users share the full-width RU with one stream each.
    MuMimo,
    /// One RU per user, equal sizes, no spatial sharing.
    Ofdma,
    /// Half the band is a shared MU-MIMO RU anchored by the largest demand;
    /// the other half is split into two OFDMA RUs.
    Mixed,
}

#[derive(Debug, Error, PartialEq)]
pub enum MuError {
    #[error("no station has buffered traffic")]
    NoDemand,
    #[error("max_mu must be in 1..=8, got {0}")]
    MaxMu(usize),
    #[error("unsupported channel width {0} MHz")]
    Width(u32),
    #[error("invalid allocation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("station {0} has no RU in the allocation")]
    NotAllocated(StationId),
    #[error(transparent)]
    Phy(#[from] PhyError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationOutcome {
    pub allocation: RuAllocation,
    /// Stations with traffic left for a later exchange.
    pub deferred: Vec<StationId>,
}

/// Assigns RUs and streams to stations with nonzero demand. At most `max_mu`
/// stations are served; the rest are returned in `deferred`.
pub fn allocate(
    channel_width_mhz: u32,
    demands: &[(StationId, usize)],
    max_mu: usize,
    policy: MuPolicy,
    su_streams: u8,
) -> Result<AllocationOutcome, MuError> {
    if !(1..=MAX_STREAMS_PER_RU as usize).contains(&max_mu) {
        return Err(MuError::MaxMu(max_mu));
    }
    let full = RuSize::full_width(channel_width_mhz).ok_or(MuError::Width(channel_width_mhz))?;
    let mut active: Vec<(StationId, usize)> =
        demands.iter().copied().filter(|&(_, d)| d > 0).collect();
    if active.is_empty() {
        return Err(MuError::NoDemand);
    }
    let su_streams = su_streams.clamp(1, MAX_STREAMS_PER_RU);
    if policy == MuPolicy::Mixed {
        // largest demand first; ties keep input order
        active.sort_by(|a, b| b.1.cmp(&a.1));
    }
    let capacity = match policy {
        MuPolicy::MuMimo => max_mu,
        MuPolicy::Ofdma => max_mu.min(ru_count(RuSize::Tones26, channel_width_mhz)),
        MuPolicy::Mixed => max_mu.min(MAX_STREAMS_PER_RU as usize + 2),
    };
    let served: Vec<StationId> = active.iter().take(capacity).map(|&(s, _)| s).collect();
    let deferred: Vec<StationId> = active.iter().skip(capacity).map(|&(s, _)| s).collect();

    let single = |s: StationId, size: RuSize| ResourceUnit {
        size,
        users: vec![UserAllocation {
            station: s,
            streams: su_streams,
        }],
    };
    let shared = |group: &[StationId], size: RuSize| ResourceUnit {
        size,
        users: group
            .iter()
            .map(|&s| UserAllocation {
                station: s,
                streams: if group.len() == 1 { su_streams } else { 1 },
            })
            .collect(),
    };

    let rus = if served.len() == 1 {
        vec![single(served[0], full)]
    } else {
        match policy {
            MuPolicy::MuMimo => vec![shared(&served, full)],
            MuPolicy::Ofdma => {
                let k = served.len();
                let size = RuSize::ALL
                    .into_iter()
                    .rev()
                    .find(|&s| ru_count(s, channel_width_mhz) >= k)
                    .expect("26-tone RUs bound the capacity");
                served.iter().map(|&s| single(s, size)).collect()
            }
            MuPolicy::Mixed => {
                let (wide, narrow) =
                    RuSize::half_width(channel_width_mhz).ok_or(MuError::Width(channel_width_mhz))?;
                let ofdma: Vec<StationId> = served.iter().skip(1).take(2).copied().collect();
                let mut mimo = vec![served[0]];
                mimo.extend(served.iter().skip(3).copied());
                let mut rus = vec![shared(&mimo, wide)];
                rus.extend(ofdma.iter().map(|&s| single(s, narrow)));
                rus
            }
        }
    };
    let allocation = RuAllocation {
        channel_width_mhz,
        rus,
    };
    debug_assert_eq!(validate(&allocation), Ok(()));
    Ok(AllocationOutcome {
        allocation,
        deferred,
    })
}

/// Uplink grant for one station inside a trigger-based exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StationGrant {
    pub station: StationId,
    pub n_mpdus: usize,
    pub mcs: Mcs,
}

/// AP control frame soliciting an uplink MU transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerFrame {
    pub allocation: RuAllocation,
    pub grants: Vec<StationGrant>,
    /// Length of the solicited trigger-based PPDU.
    pub ppdu_us: Micros,
}

impl TriggerFrame {
    pub fn addressed(&self) -> impl Iterator<Item = StationId> + '_ {
        self.grants.iter().map(|g| g.station)
    }

    pub fn granted_mpdus(&self) -> usize {
        self.grants.iter().map(|g| g.n_mpdus).sum()
    }
}

/// Airtime of the trigger-based PPDU: the slowest user sets the length.
pub fn mu_ppdu_airtime(
    phy: &PhyConfig,
    a: &RuAllocation,
    grants: &[StationGrant],
    payload_bits: u64,
) -> Result<Micros, MuError> {
    validate(a).map_err(MuError::Invalid)?;
    let mut longest = 0;
    for g in grants.iter().filter(|g| g.n_mpdus > 0) {
        let (ru, streams) = a.assignment(g.station).ok_or(MuError::NotAllocated(g.station))?;
        let q = AirtimeQuery {
            payload_bits,
            mcs: g.mcs,
            spatial_streams: streams,
            ru,
        };
        longest = longest.max(phy.ppdu_airtime(&q, g.n_mpdus)?);
    }
    if longest == 0 {
        return Err(MuError::NoDemand);
    }
    Ok(longest)
}

/// Full trigger-based exchange: optional MU-RTS/CTS, trigger, the MU PPDU
/// and a single multiuser block ACK.
pub fn mu_exchange_duration(
    phy: &PhyConfig,
    a: &RuAllocation,
    grants: &[StationGrant],
    payload_bits: u64,
    protection: bool,
) -> Result<ExchangeTiming, MuError> {
    let data = mu_ppdu_airtime(phy, a, grants, payload_bits)?;
    Ok(phy.exchange_timing(data, protection, true))
}

/// Builds the trigger frame for an allocation; each station is granted
/// `min(buffered, max_ampdu)` MPDUs, reduced so its PPDU fits the PPDU cap.
pub fn build_trigger(
    phy: &PhyConfig,
    outcome: &AllocationOutcome,
    buffered: impl Fn(StationId) -> usize,
    mcs: impl Fn(StationId) -> Mcs,
    payload_bits: u64,
) -> Result<TriggerFrame, MuError> {
    let mut grants = Vec::new();
    for station in outcome.allocation.stations() {
        let (ru, streams) = outcome.allocation.assignment(station).expect("listed");
        let m = mcs(station);
        let q = AirtimeQuery {
            payload_bits,
            mcs: m,
            spatial_streams: streams,
            ru,
        };
        let n = phy.max_fitting_mpdus(&q, buffered(station))?;
        grants.push(StationGrant {
            station,
            n_mpdus: n,
            mcs: m,
        });
    }
    let ppdu_us = mu_ppdu_airtime(phy, &outcome.allocation, &grants, payload_bits)?;
    Ok(TriggerFrame {
        allocation: outcome.allocation.clone(),
        grants,
        ppdu_us,
    })
}
