//! Deterministic event kernel: a virtual clock and a time-ordered queue.
//!
//! Events are ordered by `(time, seq)` where `seq` is the insertion counter,
//! so simultaneous events pop in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use crate::error::QueueError;

/// Identifier returned by [`EventQueue::schedule`]; equal to the event's `seq`.
pub type EventId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    PostSend,
    PostRecv,
    WaitEnter,
    CommComplete,
    CkptBegin,
    CkptEnd,
    Failure,
    RestartEnd,
    ReexecEnd,
    GoSleepEnd,
    WakeupEnd,
    StrategyFlag,
    SimEnd,
}

/// Kind-specific data carried by an event.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Payload {
    pub peer: Option<usize>,
    pub op: Option<usize>,
    pub freq: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
    pub node: usize,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, u64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    pending: BTreeMap<Key, SimEvent>,
    times: HashMap<EventId, f64>,
    clock: f64,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Stores an event and assigns it the next sequence number.
    pub fn schedule(
        &mut self,
        time: f64,
        kind: EventKind,
        node: usize,
        payload: Payload,
    ) -> Result<EventId, QueueError> {
        if !(time >= self.clock) {
            return Err(QueueError::PastTime {
                time,
                clock: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(
            Key(time, seq),
            SimEvent {
                time,
                seq,
                kind,
                node,
                payload,
            },
        );
        self.times.insert(seq, time);
        Ok(seq)
    }

    /// Removes the minimum `(time, seq)` event and moves the clock to it.
    pub fn advance(&mut self) -> Result<SimEvent, QueueError> {
        let (_, ev) = self.pending.pop_first().ok_or(QueueError::EmptyQueue)?;
        self.times.remove(&ev.seq);
        self.clock = ev.time;
        Ok(ev)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.pending.first_key_value().map(|(k, _)| k.0)
    }

    /// Returns true if the event was still pending and has been removed.
    pub fn cancel(&mut self, id: EventId) -> bool {
        match self.times.remove(&id) {
            Some(t) => self.pending.remove(&Key(t, id)).is_some(),
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(q: &mut EventQueue, t: f64) -> EventId {
        q.schedule(t, EventKind::StrategyFlag, 0, Payload::default()).unwrap()
    }

    #[test]
    fn schedule_keeps_clock() {
        let mut q = EventQueue::new();
        at(&mut q, 5.0);
        assert_eq!(q.len(), 1);
        assert_eq!(q.clock(), 0.0);
    }

    #[test]
    fn equal_times_pop_in_insertion_order() {
        let mut q = EventQueue::new();
        let a = at(&mut q, 5.0);
        let b = at(&mut q, 5.0);
        assert_eq!(q.advance().unwrap().seq, a);
        assert_eq!(q.advance().unwrap().seq, b);
    }

    #[test]
    fn past_time_rejected() {
        let mut q = EventQueue::new();
        at(&mut q, 10.0);
        q.advance().unwrap();
        let err = q.schedule(3.0, EventKind::SimEnd, 0, Payload::default()).unwrap_err();
        assert!(matches!(err, QueueError::PastTime { .. }));
        assert!(q.schedule(f64::NAN, EventKind::SimEnd, 0, Payload::default()).is_err());
    }

    #[test]
    fn advance_returns_minimum() {
        let mut q = EventQueue::new();
        at(&mut q, 2.0);
        at(&mut q, 1.0);
        let e = q.advance().unwrap();
        assert_eq!(e.time, 1.0);
        assert_eq!(q.clock(), 1.0);
    }

    #[test]
    fn tie_break_by_seq() {
        let mut q = EventQueue::new();
        at(&mut q, 1.0);
        at(&mut q, 1.0);
        assert_eq!(q.advance().unwrap().seq, 0);
    }

    #[test]
    fn empty_queue_errors() {
        let mut q = EventQueue::new();
        assert_eq!(q.advance().unwrap_err(), QueueError::EmptyQueue);
    }

    #[test]
    fn cancel_semantics() {
        let mut q = EventQueue::new();
        let a = at(&mut q, 1.0);
        let b = at(&mut q, 2.0);
        assert!(q.cancel(b));
        assert_eq!(q.len(), 1);
        assert!(!q.cancel(b));
        q.advance().unwrap();
        assert!(!q.cancel(a));
        assert!(!q.cancel(99));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clock_monotone_and_conserving(times in proptest::collection::vec(0.0f64..1e4, 1..60),
                                             cancel_mask in proptest::collection::vec(any::<bool>(), 60)) {
                let mut q = EventQueue::new();
                let ids: Vec<_> = times.iter().map(|&t| at(&mut q, t)).collect();
                let mut cancelled = 0;
                for (id, c) in ids.iter().zip(&cancel_mask) {
                    if *c && q.cancel(*id) { cancelled += 1; }
                }
                let mut popped = 0;
                let mut last = (f64::NEG_INFINITY, 0u64);
                while let Ok(e) = q.advance() {
                    prop_assert!(e.time > last.0 || (e.time == last.0 && e.seq > last.1));
                    last = (e.time, e.seq);
                    popped += 1;
                }
                prop_assert_eq!(popped + cancelled, times.len());
            }
        }
    }
}
