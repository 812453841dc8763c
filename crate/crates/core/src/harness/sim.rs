//! Event-driven simulation of one BSS: Poisson uplink traffic, DCF
//! contention, AP beacons and trigger-based TWT service periods sharing a
//! single channel.
//!
//! The AP wins the medium after PIFS, ahead of any DCF station. DCF
//! stations count down on a slot grid that starts DIFS after the medium
//! went idle; a station that becomes backlogged mid-idle joins the grid at
//! the next slot boundary. At the start of a trigger-enabled session the AP
//! takes a snapshot of every member's queue and serves that snapshot with
//! back-to-back trigger exchanges while the session window lasts. Packets
//! arriving during the session wait for the next one.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{AccessMode, AgreementType, ConfigError, ScenarioConfig};
use crate::dcf::{Action, DcfState, DcfStation, Observation, ProtocolError};
use crate::engine::{self, Engine, EventHandle, Micros, RngStream};
use crate::metrics::{ChannelState, Metrics, MetricsError, MetricsReport};
use crate::mu::{self, MuError, RuSize};
use crate::phy::{AirtimeQuery, Mcs, PhyError};
use crate::traffic::{self, Enqueue, Mpdu, StationBuffer, TrafficError};
use crate::twt::{
    self, build_timeline, run_dialogue, AcceptAlternatives, AgreementError, AgreementKind, AgreementTable,
    BeaconWake, BroadcastInfo, DialogueOutcome, NegotiationError, PreferredParams, SessionSlot, StationSchedule,
    TimelineError, TwtCommand, TwtMessage, TwtParams,
};
use crate::StationId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error("station {station} at {distance_m:.2} m has SNR {snr_db:.2} dB, below every MCS threshold")]
    Infeasible {
        station: StationId,
        distance_m: f64,
        snr_db: f64,
    },
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Negotiation(#[from] NegotiationError),
    #[error("station {0}: TWT negotiation rejected")]
    Rejected(StationId),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Mu(#[from] MuError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationInfo {
    pub station: StationId,
    pub x_m: f64,
    pub y_m: f64,
    pub distance_m: f64,
    pub snr_db: f64,
    pub mcs: usize,
    pub session: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationSummary {
    pub messages: u64,
    pub agreements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub config: ScenarioConfig,
    pub stations: Vec<StationInfo>,
    pub sessions: Vec<SessionSlot>,
    pub negotiation: Option<NegotiationSummary>,
    pub events: u64,
    /// FNV-1a digest over every (station, arrival, delivery) triple.
    pub trace_digest: String,
    pub metrics: MetricsReport,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Arrival(usize),
    ChannelFree,
    Access,
    Beacon,
    SessionStart(usize),
    SessionEnd(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ApJob {
    Beacon,
    Session { session: usize, end: Micros },
}

#[derive(Debug)]
enum Busy {
    Beacon,
    Single { station: usize, burst: Vec<Mpdu> },
    Collision { bursts: Vec<(usize, Vec<Mpdu>)> },
    Trigger { session: usize, end: Micros, grants: Vec<(usize, Vec<Mpdu>)> },
}

struct Sta {
    id: StationId,
    buffer: StationBuffer,
    dcf: DcfStation,
    /// Slot index on the current idle grid at which this station joined.
    join_slot: u64,
    /// Whether the station may contend right now.
    contends: bool,
    mcs: Mcs,
    arrivals: RngStream,
    backoff: RngStream,
    next_packet: u64,
}

struct Snapshot {
    /// (station index, packets still owed from the snapshot)
    owed: Vec<(usize, usize)>,
    first: bool,
}

struct Sim<'a> {
    c: &'a ScenarioConfig,
    horizon: Micros,
    sta: Vec<Sta>,
    sessions: Vec<SessionSlot>,
    members: Vec<Vec<usize>>,
    snapshots: Vec<Option<Snapshot>>,
    agreements: Vec<AgreementTable>,
    ap_jobs: VecDeque<ApJob>,
    busy: Option<Busy>,
    idle_since: Micros,
    access: Option<EventHandle>,
    metrics: Metrics,
    digest: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, v: u64) -> u64 {
    for b in v.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Runs one scenario with `c.seed` to `c.duration_s`.
pub fn run_scenario(c: &ScenarioConfig) -> Result<RunReport, SimError> {
    c.validate()?;
    let seed = c.seed;
    let n = c.topology.n_stations;
    let ids: Vec<StationId> = (0..n).map(|i| StationId(i as u16)).collect();

    // topology
    let mut topo = RngStream::new(seed, engine::stream::TOPOLOGY);
    let mut infos = Vec::with_capacity(n);
    let mut sta = Vec::with_capacity(n);
    let half = c.topology.area_m / 2.0;
    for (i, &id) in ids.iter().enumerate() {
        use rand::Rng;
        let x: f64 = topo.random_range(-half..=half);
        let y: f64 = topo.random_range(-half..=half);
        let d = x.hypot(y).max(c.topology.min_distance_m);
        let snr = c.phy.snr_db(d)?;
        let mcs = c.phy.select_mcs(snr).ok_or(SimError::Infeasible {
            station: id,
            distance_m: d,
            snr_db: snr,
        })?;
        infos.push(StationInfo {
            station: id,
            x_m: x,
            y_m: y,
            distance_m: d,
            snr_db: snr,
            mcs: mcs.0,
            session: None,
        });
        sta.push(Sta {
            id,
            buffer: StationBuffer::new(c.buffer_packets),
            dcf: DcfStation::new(),
            join_slot: 0,
            contends: c.access == AccessMode::Dcf || c.twt.hybrid_dcf,
            mcs,
            arrivals: RngStream::new(seed, engine::stream::arrivals(i)),
            backoff: RngStream::new(seed, engine::stream::backoff(i)),
            next_packet: 0,
        });
    }

    // TWT setup
    let mut sessions = Vec::new();
    let mut members = Vec::new();
    let mut agreements: Vec<AgreementTable> = ids.iter().map(|&id| AgreementTable::new(id)).collect();
    let mut negotiation = None;
    if c.access == AccessMode::Twt {
        let w = &c.twt;
        let mut trng = RngStream::new(seed, engine::stream::TIMELINE);
        let mut slots = build_timeline(w.num_sessions, w.period_us, &ids, &mut trng)?;
        let dur = w.session_duration();
        for s in &mut slots {
            s.duration_us = dur;
        }
        let mut messages = 0u64;
        for s in &slots {
            let params = TwtParams {
                target_wake_time_us: s.offset_us,
                wake_interval_us: w.period_us as u32,
                min_wake_duration_us: TwtParams::wake_duration_floor(dur),
                channel: 0,
                protection: w.protection,
                trigger_enabled: w.trigger_enabled,
                implicit: true,
                announced: w.announced,
            };
            let policy = PreferredParams {
                preferred: params,
                acceptable: move |p: &TwtParams| *p == params,
            };
            let (kind, broadcast) = match w.agreement {
                AgreementType::Individual => (AgreementKind::Individual, None),
                AgreementType::Broadcast => (
                    AgreementKind::Broadcast {
                        session_id: s.session as u8,
                    },
                    Some(BroadcastInfo {
                        session_id: s.session as u8,
                        next_target_beacon_us: 0,
                        listen_interval: w.listen_interval,
                    }),
                ),
            };
            for &m in &s.members {
                let first = TwtMessage {
                    broadcast,
                    ..TwtMessage::request(TwtCommand::Request, 0, None)
                };
                let d = run_dialogue(first, &policy, &mut AcceptAlternatives, w.max_rounds)?;
                messages += d.messages.len() as u64;
                let DialogueOutcome::Accepted(p) = d.outcome else {
                    return Err(SimError::Rejected(m));
                };
                let table = &mut agreements[m.0 as usize];
                let id = table.free_id().ok_or(AgreementError::TooMany(m))?;
                table.install(id, p, kind)?;
                infos[m.0 as usize].session = Some(s.session);
            }
            members.push(s.members.iter().map(|m| m.0 as usize).collect());
        }
        negotiation = Some(NegotiationSummary {
            messages,
            agreements: agreements.iter().map(AgreementTable::len).sum(),
        });
        sessions = slots;
    }

    let horizon = c.horizon_us();
    let mut sim = Sim {
        c,
        horizon,
        snapshots: sessions.iter().map(|_| None).collect(),
        sta,
        sessions,
        members,
        agreements,
        ap_jobs: VecDeque::new(),
        busy: None,
        idle_since: 0,
        access: None,
        metrics: Metrics::new(n, horizon, c.warmup_us()),
        digest: FNV_OFFSET,
    };
    let mut eng: Engine<Ev> = Engine::new();
    sim.bootstrap(&mut eng)?;
    let mut failure: Option<SimError> = None;
    let (events, _) = eng.run(horizon, |eng, ev| {
        if failure.is_none() {
            if let Err(e) = sim.handle(eng, ev.kind) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let buffered: Vec<usize> = sim.sta.iter().map(|s| s.buffer.occupancy()).collect();
    let awake: Vec<f64> = (0..n).map(|i| sim.awake_fraction(i)).collect();
    let digest = sim.digest;
    let sessions = std::mem::take(&mut sim.sessions);
    let metrics = sim.metrics.finalize(&buffered, &awake)?;
    Ok(RunReport {
        seed,
        config: c.clone(),
        stations: infos,
        sessions,
        negotiation,
        events,
        trace_digest: format!("{digest:016x}"),
        metrics,
    })
}

impl Sim<'_> {
    fn pifs(&self) -> Micros {
        self.c.phy.sifs_us + self.c.dcf.slot_us
    }

    fn bootstrap(&mut self, eng: &mut Engine<Ev>) -> Result<(), SimError> {
        if self.c.load_mbps > 0.0 {
            for i in 0..self.sta.len() {
                self.schedule_arrival(eng, i)?;
            }
        }
        if self.c.beacon.enabled {
            eng.schedule(0, Ev::Beacon)?;
        }
        for s in 0..self.sessions.len() {
            eng.schedule(self.sessions[s].offset_us, Ev::SessionStart(s))?;
        }
        Ok(())
    }

    fn schedule_arrival(&mut self, eng: &mut Engine<Ev>, i: usize) -> Result<(), SimError> {
        let gap = traffic::next_interarrival(self.c.load_mbps * 1e6, self.c.packet_bits, &mut self.sta[i].arrivals)?;
        let at = eng.now() + gap;
        if at <= self.horizon {
            eng.schedule(at, Ev::Arrival(i))?;
        }
        Ok(())
    }

    fn handle(&mut self, eng: &mut Engine<Ev>, ev: Ev) -> Result<(), SimError> {
        let now = eng.now();
        match ev {
            Ev::Arrival(i) => {
                let s = &mut self.sta[i];
                let p = Mpdu {
                    id: s.next_packet,
                    src: s.id,
                    dst: traffic::AP,
                    size_bits: self.c.packet_bits,
                    arrival_time: now,
                };
                s.next_packet += 1;
                let accepted = s.buffer.enqueue(p) == Enqueue::Accepted;
                let occ = s.buffer.occupancy();
                self.metrics.record_arrival(s.id, now, accepted)?;
                if accepted {
                    self.metrics.sample_queue(s.id, now, occ)?;
                    self.wake_contender(eng, i, false);
                }
                self.schedule_arrival(eng, i)?;
            }
            Ev::ChannelFree => self.finish_busy(eng)?,
            Ev::Access => {
                self.access = None;
                self.start_access(eng)?;
            }
            Ev::Beacon => {
                self.ap_jobs.push_back(ApJob::Beacon);
                let next = now + self.c.beacon.interval_us;
                if next <= self.horizon {
                    eng.schedule(next, Ev::Beacon)?;
                }
                self.plan(eng);
            }
            Ev::SessionStart(s) => {
                let end = now + self.sessions[s].duration_us;
                if self.c.twt.trigger_enabled {
                    self.ap_jobs.push_back(ApJob::Session { session: s, end });
                    self.plan(eng);
                } else {
                    for k in 0..self.members[s].len() {
                        let i = self.members[s][k];
                        self.sta[i].contends = true;
                        self.wake_contender(eng, i, true);
                    }
                }
                if !self.c.twt.hybrid_dcf && !self.c.twt.trigger_enabled {
                    eng.schedule(end, Ev::SessionEnd(s))?;
                }
                let lead = self.members[s][0];
                let next = self.agreements[lead]
                    .iter()
                    .next()
                    .and_then(|a| a.next_wake_time(now));
                if let Some(t) = next.filter(|&t| t <= self.horizon) {
                    eng.schedule(t, Ev::SessionStart(s))?;
                }
            }
            Ev::SessionEnd(s) => {
                let ids = self.members[s].clone();
                for i in ids {
                    self.sta[i].contends = false;
                }
                self.plan(eng);
            }
        }
        Ok(())
    }

    /// Puts a backlogged, awake station into contention. With `rejoin`, a
    /// station resuming a frozen counter starts on the current slot grid.
    fn wake_contender(&mut self, eng: &mut Engine<Ev>, i: usize, rejoin: bool) {
        let s = &mut self.sta[i];
        if !s.contends || s.buffer.is_empty() {
            return;
        }
        if s.dcf.state == DcfState::Idle {
            s.dcf.activate(&self.c.dcf, &mut s.backoff);
        } else if !(rejoin && s.dcf.is_contending()) {
            return;
        }
        s.join_slot = 0;
        if self.busy.is_none() {
            let t_ref = self.idle_since + self.c.dcf.difs_us;
            let now = eng.now();
            if now > t_ref {
                self.sta[i].join_slot = (now - t_ref).div_ceil(self.c.dcf.slot_us);
            }
            self.plan(eng);
        }
    }

    fn contending(&self) -> impl Iterator<Item = usize> + '_ {
        self.sta
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contends && s.dcf.is_contending())
            .map(|(i, _)| i)
    }

    /// Whole backoff slots elapsed on the current idle stretch at `t`.
    fn due_slots(&self, t: Micros) -> u64 {
        let t_ref = self.idle_since + self.c.dcf.difs_us;
        if t >= t_ref {
            (t - t_ref) / self.c.dcf.slot_us
        } else {
            0
        }
    }

    /// Applies the idle slots elapsed on the current grid up to `t`.
    fn freeze(&mut self, t: Micros) {
        let elapsed = self.due_slots(t);
        for s in &mut self.sta {
            if s.contends && s.dcf.is_contending() {
                let used = elapsed.saturating_sub(s.join_slot).min(s.dcf.backoff as u64);
                s.dcf.count_idle_slots(used as u32);
            }
            s.join_slot = 0;
        }
    }

    /// Schedules the next medium access while the channel is idle.
    fn plan(&mut self, eng: &mut Engine<Ev>) {
        if self.busy.is_some() {
            return;
        }
        if let Some(h) = self.access.take() {
            eng.cancel(h);
        }
        let now = eng.now();
        let at = if !self.ap_jobs.is_empty() {
            Some((self.idle_since + self.pifs()).max(now))
        } else {
            let t_ref = self.idle_since + self.c.dcf.difs_us;
            self.contending()
                .map(|i| self.sta[i].dcf.backoff as u64 + self.sta[i].join_slot)
                .min()
                .map(|m| (t_ref + m * self.c.dcf.slot_us).max(now))
        };
        if let Some(t) = at {
            self.access = Some(eng.schedule(t, Ev::Access).expect("access is never in the past"));
        }
    }

    fn occupy(&mut self, eng: &mut Engine<Ev>, segments: &[(ChannelState, Micros)], busy: Busy) -> Result<(), SimError> {
        let now = eng.now();
        let end = self.metrics.ledger.occupy(now, segments)?;
        self.busy = Some(busy);
        eng.schedule(end, Ev::ChannelFree)?;
        Ok(())
    }

    fn start_access(&mut self, eng: &mut Engine<Ev>) -> Result<(), SimError> {
        let now = eng.now();
        let due = self.due_slots(now);
        let ready: Vec<usize> = self
            .contending()
            .filter(|&i| self.sta[i].dcf.backoff as u64 + self.sta[i].join_slot <= due)
            .collect();
        self.freeze(now);
        if let Some(job) = self.ap_jobs.pop_front() {
            return match job {
                ApJob::Beacon => {
                    let b = self.c.phy.beacon_us;
                    self.occupy(eng, &[(ChannelState::Control, b)], Busy::Beacon)
                }
                ApJob::Session { session, end } => self.start_trigger(eng, session, end),
            };
        }
        let winners = ready;
        if winners.is_empty() {
            self.plan(eng);
            return Ok(());
        }
        let mut bursts = Vec::with_capacity(winners.len());
        let mut longest = 0;
        for &i in &winners {
            self.metrics.record_attempt(self.sta[i].id, now, winners.len() > 1)?;
            let action = {
                let s = &mut self.sta[i];
                s.dcf.step(&self.c.dcf, Observation::DifsIdle, &mut s.backoff)?
            };
            debug_assert_eq!(action, Action::StartTransmission);
            let (burst, ppdu) = self.su_burst(i)?;
            longest = longest.max(ppdu);
            bursts.push((i, burst));
        }
        let p = &self.c.phy;
        if bursts.len() == 1 {
            let (station, burst) = bursts.pop().expect("one winner");
            let t = p.exchange_timing(longest, self.c.dcf.rts_cts, false);
            let post = p.sifs_us + p.ack_us;
            self.occupy(
                eng,
                &[
                    (ChannelState::Control, t.control_us - post),
                    (ChannelState::Success, t.data_us),
                    (ChannelState::Control, post),
                ],
                Busy::Single { station, burst },
            )
        } else {
            let lost = if self.c.dcf.rts_cts {
                p.rts_us + self.c.dcf.cts_timeout_us
            } else {
                longest + p.sifs_us + p.ack_us
            };
            self.occupy(eng, &[(ChannelState::Collision, lost)], Busy::Collision { bursts })
        }
    }

    /// Dequeues the A-MPDU a station sends on its own.
    fn su_burst(&mut self, i: usize) -> Result<(Vec<Mpdu>, Micros), SimError> {
        let p = &self.c.phy;
        let s = &mut self.sta[i];
        let q = AirtimeQuery {
            payload_bits: self.c.packet_bits,
            mcs: s.mcs,
            spatial_streams: p.su_streams,
            ru: p.full_width_ru().unwrap_or(RuSize::Tones242),
        };
        let n = p.max_fitting_mpdus(&q, s.buffer.len())?;
        let burst = s.buffer.dequeue_burst(n);
        let ppdu = p.ppdu_airtime(&q, burst.len())?;
        Ok((burst, ppdu))
    }

    fn start_trigger(&mut self, eng: &mut Engine<Ev>, session: usize, end: Micros) -> Result<(), SimError> {
        let now = eng.now();
        if self.snapshots[session].is_none() {
            let owed = self.members[session]
                .iter()
                .map(|&i| (i, self.sta[i].buffer.len()))
                .collect();
            self.snapshots[session] = Some(Snapshot { owed, first: true });
        }
        let snap = self.snapshots[session].as_ref().expect("just set");
        let demands: Vec<(StationId, usize)> = snap
            .owed
            .iter()
            .map(|&(i, n)| (self.sta[i].id, n.min(self.sta[i].buffer.len())))
            .filter(|&(_, n)| n > 0)
            .collect();
        if demands.is_empty() {
            self.snapshots[session] = None;
            self.plan(eng);
            return Ok(());
        }
        let c = self.c;
        let outcome = mu::allocate(c.phy.channel_width_mhz, &demands, c.mu.max_mu, c.mu.policy, c.phy.su_streams)?;
        let solicit = if snap.first && c.twt.announced {
            self.members[session].len() as Micros * (c.phy.solicitation_us + c.phy.sifs_us)
        } else {
            0
        };
        let want = |id: StationId| demands.iter().find(|d| d.0 == id).map_or(0, |d| d.1);
        let mcs_of = |id: StationId| self.sta[id.0 as usize].mcs;
        let fits = |cap: usize| -> Result<Option<(mu::TriggerFrame, crate::phy::ExchangeTiming)>, SimError> {
            let tf = mu::build_trigger(&c.phy, &outcome, |id| want(id).min(cap), mcs_of, c.packet_bits)?;
            let t = mu::mu_exchange_duration(&c.phy, &tf.allocation, &tf.grants, c.packet_bits, c.twt.protection)?;
            Ok((now + solicit + t.total() <= end).then_some((tf, t)))
        };
        let mut chosen = fits(usize::MAX)?;
        if chosen.is_none() {
            let (mut lo, mut hi) = (0usize, demands.iter().map(|d| d.1).max().unwrap_or(0));
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if fits(mid)?.is_some() {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            if lo > 0 {
                chosen = fits(lo)?;
            }
        }
        let Some((tf, timing)) = chosen else {
            // window exhausted; leftovers wait for the next period
            self.snapshots[session] = None;
            self.plan(eng);
            return Ok(());
        };
        let mut grants = Vec::with_capacity(tf.grants.len());
        let snap = self.snapshots[session].as_mut().expect("present");
        snap.first = false;
        for g in tf.grants.iter().filter(|g| g.n_mpdus > 0) {
            let i = g.station.0 as usize;
            let burst = self.sta[i].buffer.dequeue_burst(g.n_mpdus);
            if let Some(o) = snap.owed.iter_mut().find(|o| o.0 == i) {
                o.1 = o.1.saturating_sub(burst.len());
            }
            grants.push((i, burst));
        }
        let post = c.phy.sifs_us + c.phy.ack_us;
        self.occupy(
            eng,
            &[
                (ChannelState::Control, solicit + timing.control_us - post),
                (ChannelState::Success, timing.data_us),
                (ChannelState::Control, post),
            ],
            Busy::Trigger { session, end, grants },
        )
    }

    fn deliver(&mut self, i: usize, burst: Vec<Mpdu>, now: Micros) -> Result<(), SimError> {
        let n = burst.len();
        for p in &burst {
            self.metrics.record_delivery(p, now)?;
            self.digest = fnv(fnv(fnv(self.digest, p.src.0 as u64), p.arrival_time), now);
        }
        let s = &mut self.sta[i];
        s.buffer.complete(n);
        let occ = s.buffer.occupancy();
        self.metrics.sample_queue(s.id, now, occ)?;
        Ok(())
    }

    fn finish_busy(&mut self, eng: &mut Engine<Ev>) -> Result<(), SimError> {
        let now = eng.now();
        match self.busy.take().expect("ChannelFree without a transmission") {
            Busy::Beacon => {}
            Busy::Single { station, burst } => {
                self.deliver(station, burst, now)?;
                let s = &mut self.sta[station];
                s.dcf.step(&self.c.dcf, Observation::Ack, &mut s.backoff)?;
            }
            Busy::Collision { bursts } => {
                for (i, burst) in bursts {
                    let s = &mut self.sta[i];
                    let action = s.dcf.step(&self.c.dcf, Observation::NoAck, &mut s.backoff)?;
                    if action == Action::DropPacket {
                        s.buffer.complete(burst.len());
                        let (id, occ) = (s.id, s.buffer.occupancy());
                        for p in &burst {
                            self.metrics.record_drop(p, now)?;
                        }
                        self.metrics.sample_queue(id, now, occ)?;
                    } else {
                        s.buffer.requeue_front(burst);
                    }
                }
            }
            Busy::Trigger { session, end, grants } => {
                for (i, burst) in grants {
                    self.deliver(i, burst, now)?;
                }
                let more = self.snapshots[session]
                    .as_ref()
                    .is_some_and(|s| s.owed.iter().any(|&(_, n)| n > 0));
                if more && now < end {
                    self.ap_jobs.push_front(ApJob::Session { session, end });
                } else {
                    self.snapshots[session] = None;
                }
            }
        }
        for s in &mut self.sta {
            if s.buffer.is_empty() && s.buffer.in_flight() == 0 && s.dcf.is_contending() {
                s.dcf.deactivate();
            }
        }
        self.idle_since = now;
        self.plan(eng);
        Ok(())
    }

    fn awake_fraction(&self, i: usize) -> f64 {
        if self.horizon == 0 {
            return 1.0;
        }
        let c = self.c;
        let schedule = if c.access == AccessMode::Dcf || c.twt.hybrid_dcf {
            StationSchedule::NonTwt
        } else {
            let id = self.sta[i].id;
            let mine: Vec<(Micros, Micros)> = self
                .sessions
                .iter()
                .filter(|s| s.members.contains(&id))
                .map(|s| (s.offset_us, s.duration_us))
                .collect();
            let beacon = (c.twt.agreement == AgreementType::Broadcast && c.beacon.enabled).then_some(BeaconWake {
                first_beacon_us: 0,
                beacon_interval_us: c.beacon.interval_us,
                listen_interval: c.twt.listen_interval,
                window_us: c.phy.beacon_us,
            });
            StationSchedule::Twt {
                sessions: mine,
                period_us: c.twt.period_us,
                start_us: 0,
                beacon,
            }
        };
        twt::awake_time(&schedule, 0, self.horizon) as f64 / self.horizon as f64
    }
}
