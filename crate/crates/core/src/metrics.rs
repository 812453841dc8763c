//! Run measurements: channel time accounting, per-packet delay, time-averaged
//! buffer occupancy and the final report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Micros;
use crate::traffic::Mpdu;
use crate::StationId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("station {station}: packet delivered at {delivery} before it arrived at {arrival}")]
    NegativeDelay {
        station: StationId,
        arrival: Micros,
        delivery: Micros,
    },
    #[error("ledger moved backwards from {cursor} to {to}")]
    TimeReversal { cursor: Micros, to: Micros },
    #[error("queue sample for station {station} at {now} precedes {last}")]
    SampleOrder {
        station: StationId,
        now: Micros,
        last: Micros,
    },
    #[error("ledger accounts for {accounted} us of a {horizon} us run")]
    LedgerMismatch { accounted: Micros, horizon: Micros },
    #[error("station {station}: {arrived} arrived but {delivered} delivered + {dropped} dropped + {buffered} buffered")]
    Conservation {
        station: StationId,
        arrived: u64,
        delivered: u64,
        dropped: u64,
        buffered: u64,
    },
    #[error("unknown station {0}")]
    UnknownStation(StationId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelState {
    Idle,
    Success,
    Collision,
    Control,
}

impl ChannelState {
    fn index(self) -> usize {
        self as usize
    }
}

/// Integer time accounting of the shared channel. The cursor may run ahead
/// of the simulation clock when a whole exchange is booked at its start.
/// Everything past `horizon` is clipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLedger {
    horizon: Micros,
    cursor: Micros,
    acc: [Micros; 4],
}

impl ChannelLedger {
    pub fn new(horizon: Micros) -> Self {
        Self {
            horizon,
            cursor: 0,
            acc: [0; 4],
        }
    }

    pub fn cursor(&self) -> Micros {
        self.cursor
    }

    /// Books `[cursor, to)` as `state`.
    pub fn advance(&mut self, to: Micros, state: ChannelState) -> Result<(), MetricsError> {
        if to < self.cursor {
            return Err(MetricsError::TimeReversal {
                cursor: self.cursor,
                to,
            });
        }
        let a = self.cursor.min(self.horizon);
        let b = to.min(self.horizon);
        self.acc[state.index()] += b - a;
        self.cursor = to;
        Ok(())
    }

    /// Books idle time up to `start`, then consecutive segments.
    pub fn occupy(&mut self, start: Micros, segments: &[(ChannelState, Micros)]) -> Result<Micros, MetricsError> {
        self.advance(start, ChannelState::Idle)?;
        let mut t = start;
        for &(state, dur) in segments {
            t += dur;
            self.advance(t, state)?;
        }
        Ok(t)
    }

    pub fn get(&self, state: ChannelState) -> Micros {
        self.acc[state.index()]
    }

    pub fn total(&self) -> Micros {
        self.acc.iter().sum()
    }

    /// Closes the trailing idle stretch at the horizon.
    pub fn close(&mut self) -> Result<(), MetricsError> {
        if self.cursor < self.horizon {
            self.advance(self.horizon, ChannelState::Idle)?;
        }
        let accounted = self.total();
        if accounted != self.horizon {
            return Err(MetricsError::LedgerMismatch {
                accounted,
                horizon: self.horizon,
            });
        }
        Ok(())
    }
}

/// Time integral of a piecewise-constant value over `[from, ..)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimeAverage {
    from: Micros,
    last_t: Micros,
    value: u64,
    integral: u128,
}

impl TimeAverage {
    pub fn new(from: Micros) -> Self {
        Self {
            from,
            ..Self::default()
        }
    }

    /// The value changes to `value` at `now`; `now` must not decrease.
    pub fn update(&mut self, now: Micros, value: u64) -> bool {
        if now < self.last_t {
            return false;
        }
        let a = self.last_t.max(self.from);
        if now > a {
            self.integral += (now - a) as u128 * self.value as u128;
        }
        self.last_t = now;
        self.value = value;
        true
    }

    pub fn last_time(&self) -> Micros {
        self.last_t
    }

    pub fn mean(&mut self, horizon: Micros) -> f64 {
        self.update(horizon.max(self.last_t), self.value);
        let span = horizon.saturating_sub(self.from);
        if span == 0 {
            0.0
        } else {
            self.integral as f64 / span as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
struct StationStats {
    arrived: u64,
    arrived_in_window: u64,
    rejected: u64,
    delivered: u64,
    delivered_bits: u64,
    dropped: u64,
    delay_sum: u128,
    delay_count: u64,
    /// Delivered and retry-dropped packets alike.
    sojourn_sum: u128,
    sojourn_count: u64,
    attempts: u64,
    collided: u64,
    queue: TimeAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationReport {
    pub station: StationId,
    pub arrived: u64,
    pub delivered: u64,
    /// Rejected at a full buffer plus discarded after the retry limit.
    pub dropped: u64,
    /// Of `dropped`, the arrivals refused by a full buffer.
    pub rejected: u64,
    pub mean_delay_us: Option<f64>,
    /// Buffer residence of every packet that left the buffer, delivered or
    /// discarded after the retry limit.
    pub mean_sojourn_us: Option<f64>,
    pub mean_queue: f64,
    pub arrival_rate_pps: f64,
    pub throughput_bps: f64,
    pub awake_fraction: f64,
    /// Contended transmissions started after the warm-up.
    pub attempts: u64,
    /// Of `attempts`, those that overlapped another station.
    pub collided: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub idle_us: Micros,
    pub success_us: Micros,
    pub collision_us: Micros,
    pub control_us: Micros,
    pub idle_fraction: f64,
    pub success_fraction: f64,
    pub collision_fraction: f64,
    pub control_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizon_us: Micros,
    pub warmup_us: Micros,
    /// Mean over every delivered packet that arrived after the warm-up.
    pub mean_delay_us: Option<f64>,
    pub mean_sojourn_us: Option<f64>,
    /// Per-station time-averaged occupancy, averaged across stations.
    pub mean_queue: f64,
    /// Per-station arrival rate after the warm-up, averaged across stations.
    pub arrival_rate_pps: f64,
    pub delivered: u64,
    pub dropped: u64,
    pub rejected: u64,
    pub throughput_bps: f64,
    /// Collided share of all contended attempts after the warm-up.
    pub collision_probability: Option<f64>,
    pub channel: ChannelReport,
    pub stations: Vec<StationReport>,
}

/// Collects every measurement of one run.
#[derive(Debug, Clone)]
pub struct Metrics {
    horizon: Micros,
    warmup: Micros,
    pub ledger: ChannelLedger,
    stations: Vec<StationStats>,
}

impl Metrics {
    pub fn new(n_stations: usize, horizon: Micros, warmup: Micros) -> Self {
        let warmup = warmup.min(horizon);
        Self {
            horizon,
            warmup,
            ledger: ChannelLedger::new(horizon),
            stations: (0..n_stations)
                .map(|_| StationStats {
                    queue: TimeAverage::new(warmup),
                    ..StationStats::default()
                })
                .collect(),
        }
    }

    fn stats(&mut self, s: StationId) -> Result<&mut StationStats, MetricsError> {
        self.stations.get_mut(s.0 as usize).ok_or(MetricsError::UnknownStation(s))
    }

    pub fn record_arrival(&mut self, s: StationId, now: Micros, accepted: bool) -> Result<(), MetricsError> {
        let warm = now >= self.warmup;
        let st = self.stats(s)?;
        st.arrived += 1;
        if !accepted {
            st.rejected += 1;
        } else if warm {
            st.arrived_in_window += 1;
        }
        Ok(())
    }

    /// Checks the departure time and returns the sojourn if the packet
    /// arrived inside the measurement window.
    fn depart(&mut self, p: &Mpdu, t: Micros) -> Result<(&mut StationStats, Option<u128>), MetricsError> {
        if t < p.arrival_time {
            return Err(MetricsError::NegativeDelay {
                station: p.src,
                arrival: p.arrival_time,
                delivery: t,
            });
        }
        let warm = p.arrival_time >= self.warmup;
        let st = self.stats(p.src)?;
        let sojourn = warm.then(|| (t - p.arrival_time) as u128);
        if let Some(d) = sojourn {
            st.sojourn_sum += d;
            st.sojourn_count += 1;
        }
        Ok((st, sojourn))
    }

    pub fn record_delivery(&mut self, p: &Mpdu, delivery: Micros) -> Result<(), MetricsError> {
        let (st, sojourn) = self.depart(p, delivery)?;
        st.delivered += 1;
        st.delivered_bits += p.size_bits;
        if let Some(d) = sojourn {
            st.delay_sum += d;
            st.delay_count += 1;
        }
        Ok(())
    }

    /// A contended transmission attempt starting at `now`.
    pub fn record_attempt(&mut self, s: StationId, now: Micros, collided: bool) -> Result<(), MetricsError> {
        let warm = now >= self.warmup;
        let st = self.stats(s)?;
        if warm {
            st.attempts += 1;
            st.collided += collided as u64;
        }
        Ok(())
    }

    /// A packet discarded after the retry limit.
    pub fn record_drop(&mut self, p: &Mpdu, t: Micros) -> Result<(), MetricsError> {
        self.depart(p, t)?.0.dropped += 1;
        Ok(())
    }

    pub fn sample_queue(&mut self, s: StationId, now: Micros, occupancy: usize) -> Result<(), MetricsError> {
        let st = self.stats(s)?;
        let last = st.queue.last_time();
        if st.queue.update(now, occupancy as u64) {
            Ok(())
        } else {
            Err(MetricsError::SampleOrder { station: s, now, last })
        }
    }

    /// `buffered[i]` is station i's occupancy at the horizon and
    /// `awake[i]` its awake fraction.
    pub fn finalize(mut self, buffered: &[usize], awake: &[f64]) -> Result<MetricsReport, MetricsError> {
        self.ledger.close()?;
        let horizon = self.horizon;
        let window_s = (horizon - self.warmup) as f64 * 1e-6;
        let horizon_s = horizon as f64 * 1e-6;
        let mut stations = Vec::with_capacity(self.stations.len());
        let (mut delay_sum, mut delay_count) = (0u128, 0u64);
        let (mut sojourn_sum, mut sojourn_count) = (0u128, 0u64);
        for (i, st) in self.stations.iter_mut().enumerate() {
            let station = StationId(i as u16);
            let b = buffered.get(i).copied().unwrap_or(0) as u64;
            let lost = st.rejected + st.dropped;
            if st.arrived != st.delivered + lost + b {
                return Err(MetricsError::Conservation {
                    station,
                    arrived: st.arrived,
                    delivered: st.delivered,
                    dropped: lost,
                    buffered: b,
                });
            }
            delay_sum += st.delay_sum;
            delay_count += st.delay_count;
            sojourn_sum += st.sojourn_sum;
            sojourn_count += st.sojourn_count;
            stations.push(StationReport {
                station,
                arrived: st.arrived,
                delivered: st.delivered,
                dropped: lost,
                rejected: st.rejected,
                mean_delay_us: mean(st.delay_sum, st.delay_count),
                mean_sojourn_us: mean(st.sojourn_sum, st.sojourn_count),
                mean_queue: st.queue.mean(horizon),
                arrival_rate_pps: ratio(st.arrived_in_window as f64, window_s),
                throughput_bps: ratio(st.delivered_bits as f64, horizon_s),
                awake_fraction: awake.get(i).copied().unwrap_or(1.0),
                attempts: st.attempts,
                collided: st.collided,
            });
        }
        let n = stations.len().max(1) as f64;
        let l = &self.ledger;
        let frac = |s| ratio(l.get(s) as f64, horizon as f64);
        let channel = ChannelReport {
            idle_us: l.get(ChannelState::Idle),
            success_us: l.get(ChannelState::Success),
            collision_us: l.get(ChannelState::Collision),
            control_us: l.get(ChannelState::Control),
            idle_fraction: if horizon == 0 { 1.0 } else { frac(ChannelState::Idle) },
            success_fraction: frac(ChannelState::Success),
            collision_fraction: frac(ChannelState::Collision),
            control_fraction: frac(ChannelState::Control),
        };
        Ok(MetricsReport {
            horizon_us: horizon,
            warmup_us: self.warmup,
            mean_delay_us: mean(delay_sum, delay_count),
            mean_sojourn_us: mean(sojourn_sum, sojourn_count),
            mean_queue: stations.iter().map(|s| s.mean_queue).sum::<f64>() / n,
            arrival_rate_pps: stations.iter().map(|s| s.arrival_rate_pps).sum::<f64>() / n,
            delivered: stations.iter().map(|s| s.delivered).sum(),
            dropped: stations.iter().map(|s| s.dropped).sum(),
            rejected: stations.iter().map(|s| s.rejected).sum(),
            throughput_bps: stations.iter().map(|s| s.throughput_bps).sum(),
            collision_probability: mean(
                stations.iter().map(|s| s.collided as u128).sum(),
                stations.iter().map(|s| s.attempts).sum(),
            ),
            channel,
            stations,
        })
    }
}

fn mean(sum: u128, count: u64) -> Option<f64> {
    (count > 0).then(|| sum as f64 / count as f64)
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mpdu(arrival: Micros) -> Mpdu {
        Mpdu {
            id: 0,
            src: StationId(0),
            dst: crate::traffic::AP,
            size_bits: 12_000,
            arrival_time: arrival,
        }
    }

    #[test]
    fn delay_sample() {
        let mut m = Metrics::new(1, 100_000, 0);
        m.record_arrival(StationId(0), 1_000, true).unwrap();
        m.record_arrival(StationId(0), 5_000, true).unwrap();
        m.record_delivery(&mpdu(1_000), 11_000).unwrap();
        m.record_delivery(&mpdu(5_000), 5_000).unwrap();
        let r = m.finalize(&[0], &[1.0]).unwrap();
        assert_eq!(r.mean_delay_us, Some(5_000.0));
        assert_eq!(r.delivered, 2);
    }

    #[test]
    fn drops_count_toward_sojourn_only() {
        let mut m = Metrics::new(1, 100_000, 0);
        for t in [0, 0, 2_000] {
            m.record_arrival(StationId(0), t, true).unwrap();
        }
        m.record_arrival(StationId(0), 3_000, false).unwrap();
        m.record_delivery(&mpdu(0), 4_000).unwrap();
        m.record_drop(&mpdu(0), 8_000).unwrap();
        m.record_attempt(StationId(0), 100, true).unwrap();
        m.record_attempt(StationId(0), 200, false).unwrap();
        let r = m.finalize(&[1], &[1.0]).unwrap();
        assert_eq!(r.mean_delay_us, Some(4_000.0));
        assert_eq!(r.mean_sojourn_us, Some(6_000.0));
        assert_eq!((r.dropped, r.rejected), (2, 1));
        assert_eq!(r.collision_probability, Some(0.5));
    }

    #[test]
    fn negative_delay_aborts() {
        let mut m = Metrics::new(1, 100_000, 0);
        assert!(matches!(
            m.record_delivery(&mpdu(2_000), 1_000),
            Err(MetricsError::NegativeDelay { .. })
        ));
    }

    #[test]
    fn queue_time_average() {
        let mut m = Metrics::new(2, 20_000, 0);
        m.sample_queue(StationId(0), 0, 5).unwrap();
        m.sample_queue(StationId(0), 10_000, 0).unwrap();
        assert!(m.sample_queue(StationId(0), 9_000, 1).is_err());
        let r = m.finalize(&[0, 0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.stations[0].mean_queue, 2.5);
        assert_eq!(r.stations[1].mean_queue, 0.0);
    }

    #[test]
    fn warmup_excluded_from_queue() {
        let mut a = TimeAverage::new(1_000);
        a.update(0, 10);
        a.update(1_500, 0);
        assert_eq!(a.mean(2_000), 5.0);
    }

    #[test]
    fn empty_run() {
        let r = Metrics::new(3, 1_000_000, 50_000).finalize(&[0; 3], &[1.0; 3]).unwrap();
        assert_eq!(r.channel.idle_fraction, 1.0);
        assert_eq!(r.delivered, 0);
        assert_eq!(r.mean_delay_us, None);
    }

    #[test]
    fn ledger_exact_and_clipped() {
        let mut l = ChannelLedger::new(10_000);
        let end = l
            .occupy(1_000, &[(ChannelState::Control, 200), (ChannelState::Success, 3_000)])
            .unwrap();
        assert_eq!(end, 4_200);
        l.occupy(9_000, &[(ChannelState::Collision, 5_000)]).unwrap();
        assert!(l.advance(100, ChannelState::Idle).is_err());
        l.close().unwrap();
        assert_eq!(l.get(ChannelState::Idle), 1_000 + 4_800);
        assert_eq!(l.get(ChannelState::Collision), 1_000);
        assert_eq!(l.total(), 10_000);
    }

    #[test]
    fn conservation_checked() {
        let mut m = Metrics::new(1, 1_000, 0);
        m.record_arrival(StationId(0), 10, true).unwrap();
        assert!(matches!(m.clone().finalize(&[0], &[1.0]), Err(MetricsError::Conservation { .. })));
        assert!(m.finalize(&[1], &[1.0]).is_ok());
    }

    #[test]
    fn fractions_sum_to_one() {
        let mut m = Metrics::new(1, 7_919, 0);
        m.ledger.occupy(13, &[(ChannelState::Control, 101), (ChannelState::Success, 997)]).unwrap();
        m.ledger.occupy(3_001, &[(ChannelState::Collision, 409)]).unwrap();
        let c = m.finalize(&[0], &[1.0]).unwrap().channel;
        assert_eq!(c.idle_us + c.success_us + c.collision_us + c.control_us, 7_919);
        let s = c.idle_fraction + c.success_fraction + c.collision_fraction + c.control_fraction;
        assert!((s - 1.0).abs() < 1e-12);
    }
}
