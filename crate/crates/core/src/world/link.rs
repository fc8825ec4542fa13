//! Per-node half-duplex interface: drop-tail FIFO and reception bookkeeping.

use std::collections::VecDeque;

use crate::engine::SimTime;
use crate::protocol::{NodeId, Packet};

use super::channel::InterferenceMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dest {
    Broadcast,
    Unicast(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: u64,
    pub packet: Packet,
    pub dest: Dest,
}

#[derive(Debug)]
pub struct InterfaceQueue {
    capacity: usize,
    frames: VecDeque<Frame>,
}

impl InterfaceQueue {
    pub fn new(capacity: usize) -> Self {
        InterfaceQueue { capacity, frames: VecDeque::with_capacity(capacity) }
    }

    /// Appends the frame, or hands it back if the queue is full (drop-tail).
    pub fn push(&mut self, frame: Frame) -> Result<(), Frame> {
        if self.frames.len() >= self.capacity {
            return Err(frame);
        }
        self.frames.push_back(frame);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<Frame> {
        self.frames.pop_front()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn drain(&mut self) -> impl Iterator<Item = Frame> + '_ {
        self.frames.drain(..)
    }
}

#[derive(Debug, Clone, Copy)]
struct Reception {
    frame: u64,
    end: SimTime,
    corrupted: bool,
}

/// Signals currently arriving at one node.
#[derive(Debug, Default)]
pub struct ReceiverState {
    incoming: Vec<Reception>,
}

impl ReceiverState {
    /// Registers a signal occupying `[now, end)`. Returns whether it is already
    /// lost because the receiver is transmitting or, under overlap
    /// interference, another audible signal is in the air.
    pub fn begin(&mut self, frame: u64, now: SimTime, end: SimTime, mode: InterferenceMode, transmitting: bool) -> bool {
        let mut corrupted = transmitting;
        if mode == InterferenceMode::Overlap {
            for r in self.incoming.iter_mut().filter(|r| r.end > now) {
                r.corrupted = true;
                corrupted = true;
            }
        }
        self.incoming.push(Reception { frame, end, corrupted });
        corrupted
    }

    /// The node started transmitting; anything it was receiving is lost.
    pub fn transmit_started(&mut self, now: SimTime) {
        for r in self.incoming.iter_mut().filter(|r| r.end > now) {
            r.corrupted = true;
        }
    }

    /// Removes the reception of `frame`; `Some(true)` if it arrived intact.
    pub fn finish(&mut self, frame: u64) -> Option<bool> {
        let idx = self.incoming.iter().position(|r| r.frame == frame)?;
        let r = self.incoming.swap_remove(idx);
        Some(!r.corrupted)
    }

    pub fn corrupt_all(&mut self) {
        for r in &mut self.incoming {
            r.corrupted = true;
        }
    }

    pub fn active(&self) -> usize {
        self.incoming.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{Link, Rerr};

    fn frame(n: u32) -> Frame {
        Frame {
            id: n as u64,
            packet: Packet::Rerr(Rerr::new(Link::new(NodeId(n), NodeId(n + 1)), NodeId(0), vec![NodeId(n), NodeId(0)])),
            dest: Dest::Broadcast,
        }
    }

    #[test]
    fn drop_tail_rejects_the_newest() {
        let mut q = InterfaceQueue::new(50);
        let mut dropped = 0;
        for i in 0..51 {
            if q.push(frame(i)).is_err() {
                dropped += 1;
            }
        }
        assert_eq!(dropped, 1);
        assert_eq!(q.len(), 50);
        assert_eq!(q.pop(), Some(frame(0)));
    }

    #[test]
    fn overlapping_signals_destroy_each_other() {
        let mut rx = ReceiverState::default();
        let t = |n| SimTime(n);
        assert!(!rx.begin(1, t(0), t(100), InterferenceMode::Overlap, false));
        assert!(rx.begin(2, t(50), t(150), InterferenceMode::Overlap, false));
        assert_eq!(rx.finish(1), Some(false));
        assert_eq!(rx.finish(2), Some(false));
    }

    #[test]
    fn touching_signals_do_not_overlap() {
        let mut rx = ReceiverState::default();
        rx.begin(1, SimTime(0), SimTime(100), InterferenceMode::Overlap, false);
        assert!(!rx.begin(2, SimTime(100), SimTime(200), InterferenceMode::Overlap, false));
        assert_eq!(rx.finish(1), Some(true));
        assert_eq!(rx.finish(2), Some(true));
    }

    #[test]
    fn no_interference_mode_keeps_both() {
        let mut rx = ReceiverState::default();
        rx.begin(1, SimTime(0), SimTime(100), InterferenceMode::None, false);
        rx.begin(2, SimTime(10), SimTime(110), InterferenceMode::None, false);
        assert_eq!(rx.finish(1), Some(true));
        assert_eq!(rx.finish(2), Some(true));
    }

    #[test]
    fn half_duplex_loses_receptions() {
        let mut rx = ReceiverState::default();
        rx.begin(1, SimTime(0), SimTime(100), InterferenceMode::None, false);
        rx.transmit_started(SimTime(40));
        assert_eq!(rx.finish(1), Some(false));
        assert!(rx.begin(2, SimTime(50), SimTime(60), InterferenceMode::None, true));
        assert_eq!(rx.finish(3), None);
    }
}
