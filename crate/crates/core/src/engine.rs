//! Deterministic discrete-event core.
//!
//! Events are ordered by `(fire_time, seq)` where `seq` is a monotonically
//! increasing insertion counter, so two events scheduled for the same
//! microsecond are always delivered in the order they were scheduled.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Simulated time in integer microseconds since simulation start.
pub type Micros = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("cannot schedule event at {at} us: clock is already at {now} us")]
    InPast { at: Micros, now: Micros },
    #[error("run horizon {until} us is before the current clock {now} us")]
    HorizonInPast { until: Micros, now: Micros },
}

/// Handle returned by [`Engine::schedule`]; used for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event<K> {
    pub fire_time: Micros,
    pub seq: u64,
    pub kind: K,
}

struct Entry<K> {
    fire_time: Micros,
    seq: u64,
    kind: K,
}

impl<K> PartialEq for Entry<K> {
    fn eq(&self, other: &Self) -> bool {
        (self.fire_time, self.seq) == (other.fire_time, other.seq)
    }
}
impl<K> Eq for Entry<K> {}
impl<K> PartialOrd for Entry<K> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<K> Ord for Entry<K> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.fire_time, self.seq).cmp(&(other.fire_time, other.seq))
    }
}

/// Single-threaded event queue plus simulation clock.
pub struct Engine<K> {
    now: Micros,
    next_seq: u64,
    heap: BinaryHeap<Reverse<Entry<K>>>,
    live: HashSet<u64>,
}

impl<K> Default for Engine<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K> Engine<K> {
    pub fn new() -> Self {
        Self {
            now: 0,
            next_seq: 0,
            heap: BinaryHeap::new(),
            live: HashSet::new(),
        }
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    /// Number of scheduled events that have neither fired nor been cancelled.
    pub fn pending(&self) -> usize {
        self.live.len()
    }

    pub fn schedule(&mut self, fire_time: Micros, kind: K) -> Result<EventHandle, EngineError> {
        if fire_time < self.now {
            return Err(EngineError::InPast {
                at: fire_time,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Reverse(Entry {
            fire_time,
            seq,
            kind,
        }));
        Ok(EventHandle(seq))
    }

    /// Schedules `kind` to fire `delay` microseconds from now.
    pub fn schedule_in(&mut self, delay: Micros, kind: K) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, kind)
            .expect("relative schedule is never in the past")
    }

    /// Returns true iff the event had not yet fired or been cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    /// Pops the next live event with `fire_time <= until` and advances the
    /// clock to it. Returns `None` (and leaves the clock untouched) once no
    /// such event remains.
    pub fn next_event(&mut self, until: Micros) -> Option<Event<K>> {
        loop {
            let top = self.heap.peek()?;
            if top.0.fire_time > until {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked");
            if !self.live.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_time >= self.now);
            self.now = entry.fire_time;
            return Some(Event {
                fire_time: entry.fire_time,
                seq: entry.seq,
                kind: entry.kind,
            });
        }
    }

    /// Delivers every event with `fire_time <= until` to `handler`, then sets
    /// the clock to `until`. The handler may schedule or cancel further events.
    pub fn run<F>(&mut self, until: Micros, mut handler: F) -> Result<(u64, Micros), EngineError>
    where
        F: FnMut(&mut Self, Event<K>),
    {
        if until < self.now {
            return Err(EngineError::HorizonInPast {
                until,
                now: self.now,
            });
        }
        let mut delivered = 0;
        while let Some(ev) = self.next_event(until) {
            delivered += 1;
            handler(self, ev);
        }
        self.now = until;
        Ok((delivered, self.now))
    }

    /// Moves the clock forward to `until` without delivering anything.
    pub fn advance_to(&mut self, until: Micros) {
        if until > self.now {
            self.now = until;
        }
    }
}

/// Well-known stream identifiers. Per-station streams are offset by the
/// station index so that each (station, purpose) pair gets its own sequence.
pub mod stream {
    pub const TOPOLOGY: u64 = 1;
    pub const TIMELINE: u64 = 2;
    pub const ARRIVALS_BASE: u64 = 1 << 16;
    pub const BACKOFF_BASE: u64 = 2 << 16;

    pub fn arrivals(station: usize) -> u64 {
        ARRIVALS_BASE + station as u64
    }

    pub fn backoff(station: usize) -> u64 {
        BACKOFF_BASE + station as u64
    }
}

/// Independent, reproducible random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto ChaCha's native stream
/// parameter, which makes the draw sequence platform independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl rand::RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer; used to derive per-point seeds in sweeps.
pub fn mix_seed(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn now_before_next_microsecond() {
        let mut e = Engine::new();
        e.schedule(1, "later").unwrap();
        e.schedule(0, "now").unwrap();
        let mut seen = Vec::new();
        e.run(10, |_, ev| seen.push(ev.kind)).unwrap();
        assert_eq!(seen, vec!["now", "later"]);
    }

    #[test]
    fn equal_times_delivered_in_schedule_order() {
        let mut e = Engine::new();
        e.schedule(100, 'A').unwrap();
        e.schedule(100, 'B').unwrap();
        let mut seen = Vec::new();
        e.run(100, |_, ev| seen.push(ev.kind)).unwrap();
        assert_eq!(seen, vec!['A', 'B']);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut e: Engine<()> = Engine::new();
        e.run(50, |_, _| {}).unwrap();
        assert_eq!(
            e.schedule(49, ()),
            Err(EngineError::InPast { at: 49, now: 50 })
        );
        assert!(e.schedule(50, ()).is_ok());
    }

    #[test]
    fn cancel_semantics() {
        let mut e = Engine::new();
        let a = e.schedule(10, 1).unwrap();
        let b = e.schedule(20, 2).unwrap();
        assert!(e.cancel(a));
        assert!(!e.cancel(a));
        let mut seen = Vec::new();
        e.run(100, |_, ev| seen.push(ev.kind)).unwrap();
        assert_eq!(seen, vec![2]);
        assert!(!e.cancel(b));
    }

    #[test]
    fn run_reports_count_and_clock() {
        let mut e: Engine<()> = Engine::new();
        assert_eq!(e.run(1_000_000, |_, _| {}).unwrap(), (0, 1_000_000));

        let mut e = Engine::new();
        for t in [5, 10, 15, 500] {
            e.schedule(t, ()).unwrap();
        }
        assert_eq!(e.run(100, |_, _| {}).unwrap(), (3, 100));
        assert_eq!(e.pending(), 1);
    }

    #[test]
    fn handler_may_schedule_follow_ups() {
        let mut e = Engine::new();
        e.schedule(0, 0u32).unwrap();
        let mut times = Vec::new();
        e.run(1000, |eng, ev| {
            times.push(ev.fire_time);
            if ev.kind < 4 {
                eng.schedule_in(100, ev.kind + 1);
            }
        })
        .unwrap();
        assert_eq!(times, vec![0, 100, 200, 300, 400]);
    }

    #[test]
    fn rng_streams_are_reproducible_and_independent() {
        let draw = |seed, id| {
            let mut r = RngStream::new(seed, id);
            (0..8).map(|_| r.random::<u64>()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 3), draw(7, 3));
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));
    }

    #[test]
    fn rng_stream_is_pinned() {
        // Guards against accidental changes to the generator or seeding scheme.
        let mut r = RngStream::new(0, 0);
        let first = r.random::<u64>();
        let mut again = RngStream::new(0, 0);
        assert_eq!(first, again.random::<u64>());
        assert_eq!(first, 13_080_132_717_333_068_652);
    }
}
