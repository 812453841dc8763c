//! Poisson packet generation and per-station drop-tail FIFO buffers.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Micros;
use crate::StationId;

/// Station id used for the access point.
pub const AP: StationId = StationId(u16::MAX);

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("load must be positive, got {0} bit/s")]
    NonPositiveLoad(f64),
    #[error("packet size must be positive")]
    ZeroSize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mpdu {
    pub id: u64,
    pub src: StationId,
    pub dst: StationId,
    pub size_bits: u64,
    pub arrival_time: Micros,
}

/// Exponential inter-arrival draw with mean `size_bits / load_bps` seconds,
/// rounded to the nearest microsecond and never below 1 us.
pub fn next_interarrival<R: Rng + ?Sized>(
    load_bps: f64,
    size_bits: u64,
    rng: &mut R,
) -> Result<Micros, TrafficError> {
    if !(load_bps > 0.0) {
        return Err(TrafficError::NonPositiveLoad(load_bps));
    }
    if size_bits == 0 {
        return Err(TrafficError::ZeroSize);
    }
    let mean_us = size_bits as f64 / load_bps * 1e6;
    let e: f64 = rng.sample(Exp1);
    Ok(((e * mean_us).round() as Micros).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enqueue {
    Accepted,
    Dropped,
}

/// Drop-tail FIFO. Packets handed to the MAC for transmission stay charged
/// against the capacity (`in_flight`) until they are acknowledged or put back.
#[derive(Debug, Clone)]
pub struct StationBuffer {
    capacity: usize,
    queue: VecDeque<Mpdu>,
    in_flight: usize,
    drop_count: u64,
}

impl StationBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            queue: VecDeque::new(),
            in_flight: 0,
            drop_count: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Packets waiting in the queue.
    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    /// Packets held by the station: queued plus handed to the MAC.
    pub fn occupancy(&self) -> usize {
        self.queue.len() + self.in_flight
    }

    pub fn drop_count(&self) -> u64 {
        self.drop_count
    }

    pub fn enqueue(&mut self, p: Mpdu) -> Enqueue {
        if self.occupancy() < self.capacity {
            self.queue.push_back(p);
            Enqueue::Accepted
        } else {
            self.drop_count += 1;
            Enqueue::Dropped
        }
    }

    /// Removes and returns the `min(max_n, len)` oldest packets. The returned
    /// packets count as in flight until [`Self::complete`] or
    /// [`Self::requeue_front`].
    pub fn dequeue_burst(&mut self, max_n: usize) -> Vec<Mpdu> {
        let n = max_n.min(self.queue.len());
        self.in_flight += n;
        self.queue.drain(..n).collect()
    }

    /// Marks `n` in-flight packets as gone (delivered or discarded).
    pub fn complete(&mut self, n: usize) {
        assert!(n <= self.in_flight, "completing more packets than in flight");
        self.in_flight -= n;
    }

    /// Puts an unsent burst back at the head, preserving FIFO order.
    pub fn requeue_front(&mut self, burst: Vec<Mpdu>) {
        assert!(burst.len() <= self.in_flight, "requeueing packets never dequeued");
        self.in_flight -= burst.len();
        for p in burst.into_iter().rev() {
            self.queue.push_front(p);
        }
    }

    pub fn head(&self) -> Option<&Mpdu> {
        self.queue.front()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngStream;

    fn pkt(id: u64) -> Mpdu {
        Mpdu {
            id,
            src: StationId(0),
            dst: AP,
            size_bits: 12_000,
            arrival_time: id,
        }
    }

    fn sample_mean(load_bps: f64, n: usize) -> f64 {
        let mut rng = RngStream::new(42, 7);
        let total: u64 = (0..n)
            .map(|_| next_interarrival(load_bps, 12_000, &mut rng).unwrap())
            .sum();
        total as f64 / n as f64
    }

    #[test]
    fn one_mbps_mean_interarrival() {
        let m = sample_mean(1e6, 100_000);
        assert!((m - 12_000.0).abs() / 12_000.0 < 0.02, "mean {m}");
    }

    #[test]
    fn eight_mbps_mean_interarrival() {
        let m = sample_mean(8e6, 100_000);
        assert!((m - 1_500.0).abs() / 1_500.0 < 0.02, "mean {m}");
    }

    #[test]
    fn interarrival_is_deterministic_and_positive() {
        let draw = || {
            let mut rng = RngStream::new(9, 1);
            (0..100)
                .map(|_| next_interarrival(1e9, 12_000, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        let a = draw();
        assert_eq!(a, draw());
        assert!(a.iter().all(|&x| x >= 1));
    }

    #[test]
    fn non_positive_load_rejected() {
        let mut rng = RngStream::new(0, 0);
        assert!(next_interarrival(0.0, 12_000, &mut rng).is_err());
        assert!(next_interarrival(-1.0, 12_000, &mut rng).is_err());
        assert!(next_interarrival(f64::NAN, 12_000, &mut rng).is_err());
    }

    #[test]
    fn enqueue_empty_and_full() {
        let mut b = StationBuffer::new(500);
        assert_eq!(b.enqueue(pkt(0)), Enqueue::Accepted);
        assert_eq!(b.len(), 1);

        let mut b = StationBuffer::new(500);
        let accepted = (0..501)
            .filter(|&i| b.enqueue(pkt(i)) == Enqueue::Accepted)
            .count();
        assert_eq!(accepted, 500);
        assert_eq!(b.drop_count(), 1);
        assert_eq!(b.len(), 500);
        assert_eq!(b.enqueue(pkt(999)), Enqueue::Dropped);
        assert_eq!(b.len(), 500);
    }

    #[test]
    fn burst_sizes() {
        let mut b = StationBuffer::new(500);
        for i in 0..100 {
            b.enqueue(pkt(i));
        }
        let burst = b.dequeue_burst(64);
        assert_eq!(burst.len(), 64);
        assert_eq!(b.len(), 36);
        assert_eq!(burst.iter().map(|p| p.id).collect::<Vec<_>>(), (0..64).collect::<Vec<_>>());

        let mut b = StationBuffer::new(500);
        for i in 0..3 {
            b.enqueue(pkt(i));
        }
        assert_eq!(b.dequeue_burst(64).len(), 3);
        assert!(b.dequeue_burst(64).is_empty());
    }

    #[test]
    fn in_flight_counts_against_capacity() {
        let mut b = StationBuffer::new(3);
        for i in 0..3 {
            b.enqueue(pkt(i));
        }
        let burst = b.dequeue_burst(2);
        assert_eq!(b.occupancy(), 3);
        assert_eq!(b.enqueue(pkt(10)), Enqueue::Dropped);
        b.requeue_front(burst);
        assert_eq!(b.head().unwrap().id, 0);
        assert_eq!(b.in_flight(), 0);
        let burst = b.dequeue_burst(3);
        assert_eq!(burst.iter().map(|p| p.id).collect::<Vec<_>>(), vec![0, 1, 2]);
        b.complete(3);
        assert_eq!(b.occupancy(), 0);
    }
}
