//! Event scheduler, simulated clock and labelled random streams.
//!
//! Time is an integer count of nanoseconds so that event ordering is exact
//! and a run replays bit-for-bit on any platform.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::SimError;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Absolute simulated time in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

/// A span of simulated time in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimDuration(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs_f64(secs: f64) -> Self {
        SimTime(secs_to_nanos(secs))
    }

    pub fn nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    pub fn saturating_since(self, earlier: SimTime) -> SimDuration {
        SimDuration(self.0.saturating_sub(earlier.0))
    }
}

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    pub fn from_secs_f64(secs: f64) -> Self {
        SimDuration(secs_to_nanos(secs))
    }

    pub fn from_millis(ms: u64) -> Self {
        SimDuration(ms * 1_000_000)
    }

    pub fn from_secs(s: u64) -> Self {
        SimDuration(s * NANOS_PER_SEC)
    }

    pub fn nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }
}

fn secs_to_nanos(secs: f64) -> u64 {
    assert!(secs.is_finite() && secs >= 0.0, "time must be finite and non-negative: {secs}");
    (secs * NANOS_PER_SEC as f64).round() as u64
}

impl Add<SimDuration> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Add for SimDuration {
    type Output = SimDuration;
    fn add(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimDuration;
    fn sub(self, rhs: SimTime) -> SimDuration {
        SimDuration(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

/// Handle returned by [`Scheduler::schedule`], usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// A queued event. Ordering is by `(fire_time, sequence)`, earliest first.
#[derive(Debug)]
pub struct Event<E> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub payload: E,
}

impl<E> PartialEq for Event<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_time == other.fire_time && self.sequence == other.sequence
    }
}

impl<E> Eq for Event<E> {}

impl<E> PartialOrd for Event<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Event<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        (other.fire_time, other.sequence).cmp(&(self.fire_time, self.sequence))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub dispatched: u64,
    pub cancelled: u64,
    pub end_time: SimTime,
}

/// Single-threaded discrete-event scheduler.
#[derive(Debug)]
pub struct Scheduler<E> {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Event<E>>,
    cancelled: HashSet<u64>,
    dispatched: u64,
    cancelled_count: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            dispatched: 0,
            cancelled_count: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, fire_time: SimTime, payload: E) -> Result<EventHandle, SimError> {
        if fire_time < self.now {
            return Err(SimError::EventInPast { at: fire_time, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Event { fire_time, sequence, payload });
        Ok(EventHandle(sequence))
    }

    /// Schedules relative to the current clock; cannot be in the past.
    pub fn schedule_in(&mut self, delay: SimDuration, payload: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, payload).expect("relative schedule is never in the past")
    }

    /// Returns `true` if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_sequence {
            return false;
        }
        if !self.queue.iter().any(|e| e.sequence == handle.0) {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Pops the next live event with `fire_time <= end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = self.queue.peek()?;
            if head.fire_time > end {
                return None;
            }
            let ev = self.queue.pop().expect("peeked");
            if self.cancelled.remove(&ev.sequence) {
                self.cancelled_count += 1;
                continue;
            }
            debug_assert!(ev.fire_time >= self.now);
            self.now = ev.fire_time;
            self.dispatched += 1;
            return Some((ev.fire_time, ev.payload));
        }
    }

    /// Moves the clock to `end` (it never moves backwards) and summarises the run.
    pub fn finish(&mut self, end: SimTime) -> RunSummary {
        if end > self.now {
            self.now = end;
        }
        RunSummary {
            dispatched: self.dispatched,
            cancelled: self.cancelled_count,
            end_time: self.now,
        }
    }

    /// Dispatches every event up to and including `end`.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> RunSummary
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        while let Some((t, ev)) = self.pop_until(end) {
            handler(self, t, ev);
        }
        self.finish(end)
    }
}

/// A reproducible random sequence named by `(master_seed, label)`.
///
/// The generator seed is the SHA-256 digest of the master seed and label, so
/// streams are independent of each other and of the order they are created in.
#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(master_seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let seed: [u8; 32] = hasher.finalize().into();
        RandomStream {
            master_seed,
            label: label.to_owned(),
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Uniform draw in `[lo, hi)`; returns `lo` when the interval is degenerate.
    pub fn draw_uniform(&mut self, lo: f64, hi: f64) -> Result<f64, SimError> {
        if !(lo <= hi) {
            return Err(SimError::InvalidInterval { lo, hi });
        }
        if lo == hi {
            return Ok(lo);
        }
        Ok(self.rng.random_range(lo..hi))
    }

    /// Uniform integer draw in `[lo, hi]`.
    pub fn draw_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        if lo >= hi {
            return lo;
        }
        self.rng.random_range(lo..=hi)
    }

    pub fn draw_index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        self.rng.random_bool(p)
    }
}
