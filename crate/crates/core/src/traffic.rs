//! Constant-bit-rate UDP-style sessions.

use crate::engine::{RandomStream, SimDuration, SimTime, NANOS_PER_SEC};
use crate::error::SimError;
use crate::protocol::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: u32,
    pub src: NodeId,
    pub dst: NodeId,
    /// packets per second
    pub rate: u32,
    pub payload: u32,
    pub start: SimTime,
}

impl Session {
    /// Time of the `k`-th packet (the first goes out at `start`).
    pub fn emission_time(&self, k: u64) -> SimTime {
        let offset = (k as u128 * NANOS_PER_SEC as u128 / self.rate as u128) as u64;
        self.start + SimDuration(offset)
    }

    /// Packets emitted strictly before `end`.
    pub fn emission_count(&self, end: SimTime) -> u64 {
        if end <= self.start {
            return 0;
        }
        let span = (end - self.start).nanos() as u128 * self.rate as u128;
        span.div_ceil(NANOS_PER_SEC as u128) as u64
    }
}

/// Draws `count` sessions between distinct random node pairs with start
/// times uniform in `[0, start_window]`.
pub fn generate_sessions(
    count: usize,
    nodes: usize,
    rate: u32,
    payload: u32,
    start_window: SimDuration,
    rng: &mut RandomStream,
) -> Result<Vec<Session>, SimError> {
    if nodes < 2 {
        return Err(SimError::PoolTooSmall(nodes));
    }
    if rate == 0 {
        return Err(SimError::Config("traffic rate must be positive".into()));
    }
    (0..count)
        .map(|i| {
            let src = rng.draw_index(nodes);
            let mut dst = rng.draw_index(nodes - 1);
            if dst >= src {
                dst += 1;
            }
            let start = SimTime::from_secs_f64(rng.draw_uniform(0.0, start_window.as_secs_f64())?);
            Ok(Session { id: i as u32, src: NodeId(src as u32), dst: NodeId(dst as u32), rate, payload, start })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn session(start: f64, rate: u32) -> Session {
        Session { id: 0, src: NodeId(0), dst: NodeId(1), rate, payload: 512, start: SimTime::from_secs_f64(start) }
    }

    #[test]
    fn gap_is_one_over_rate() {
        let s = session(0.0, 4);
        assert_eq!(s.emission_time(1), SimTime::from_secs_f64(0.25));
        let s = session(0.0, 12);
        assert_eq!(s.emission_time(12), SimTime::from_secs_f64(1.0));
    }

    #[test]
    fn count_over_a_run() {
        assert_eq!(session(100.0, 4).emission_count(SimTime::from_secs_f64(600.0)), 2000);
        assert_eq!(session(700.0, 4).emission_count(SimTime::from_secs_f64(600.0)), 0);
    }

    #[test]
    fn table_one_baseline() {
        let mut rng = RandomStream::new(7, "traffic");
        let s = generate_sessions(10, 50, 4, 512, SimDuration::from_secs(120), &mut rng).unwrap();
        assert_eq!(s.len(), 10);
        for x in &s {
            assert_ne!(x.src, x.dst);
            assert!(x.start <= SimTime::from_secs_f64(120.0));
            assert_eq!((x.rate, x.payload), (4, 512));
        }
        let mut again = RandomStream::new(7, "traffic");
        assert_eq!(s, generate_sessions(10, 50, 4, 512, SimDuration::from_secs(120), &mut again).unwrap());
    }

    #[test]
    fn tiny_pool_rejected() {
        let mut rng = RandomStream::new(1, "traffic");
        assert!(matches!(generate_sessions(1, 1, 4, 512, SimDuration::ZERO, &mut rng), Err(SimError::PoolTooSmall(1))));
    }

    proptest! {
        #[test]
        fn count_matches_enumeration(start in 0u64..200_000_000_000, len in 0u64..300_000_000_000, rate in 1u32..20) {
            let s = Session { id: 0, src: NodeId(0), dst: NodeId(1), rate, payload: 1, start: SimTime(start) };
            let end = SimTime(start + len);
            let n = s.emission_count(end);
            if n > 0 {
                prop_assert!(s.emission_time(n - 1) < end);
            }
            prop_assert!(s.emission_time(n) >= end);
        }
    }
}
