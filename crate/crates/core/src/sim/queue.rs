//! Deterministic future-event list.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::clock::SimTime;
use crate::scalar::Scalar;

/// Tie-break class for events due at the same instant; lower runs first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Priority {
    Arrival = 0,
    Emission = 1,
}

struct Entry<T, P> {
    due: SimTime<T>,
    priority: Priority,
    seq: u64,
    payload: P,
}

impl<T: Scalar, P> Entry<T, P> {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.due
            .partial_cmp(&other.due)
            .expect("event times are finite")
            .then(self.priority.cmp(&other.priority))
            .then(self.seq.cmp(&other.seq))
    }
}

impl<T: Scalar, P> PartialEq for Entry<T, P> {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar, P> Eq for Entry<T, P> {}

impl<T: Scalar, P> PartialOrd for Entry<T, P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar, P> Ord for Entry<T, P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

/// Pops events in `(due, priority, insertion order)` order.
pub struct EventQueue<T, P> {
    heap: BinaryHeap<Entry<T, P>>,
    next_seq: u64,
}

impl<T: Scalar, P> Default for EventQueue<T, P> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }
}

impl<T: Scalar, P> EventQueue<T, P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, due: SimTime<T>, priority: Priority, payload: P) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            due,
            priority,
            seq,
            payload,
        });
    }

    pub fn pop(&mut self) -> Option<(SimTime<T>, P)> {
        self.heap.pop().map(|e| (e.due, e.payload))
    }

    pub fn peek_due(&self) -> Option<&SimTime<T>> {
        self.heap.peek().map(|e| &e.due)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Remaining payloads in dequeue order.
    pub fn drain_ordered(mut self) -> Vec<(SimTime<T>, P)> {
        let mut out = Vec::with_capacity(self.heap.len());
        while let Some(e) = self.pop() {
            out.push(e);
        }
        out
    }
}
