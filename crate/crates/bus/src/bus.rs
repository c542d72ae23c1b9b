use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, Weak};
use std::time::{Duration, Instant};

use crate::{BusError, Payload, Topic};

pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

/// A published message as seen by a subscriber.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub topic: Topic,
    /// Per-topic sequence number, starting at 1.
    pub seq: u64,
    pub stamp_ms: u64,
    pub published_at: Instant,
    /// Arrival time of the frame that caused this message, when known.
    pub origin: Option<Instant>,
    pub payload: Arc<Payload>,
}

/// Per-(topic, subscriber) accounting.
/// `published == delivered + dropped + still queued` at all times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub published: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecvError {
    Timeout,
    Closed,
}

struct QueueInner {
    items: VecDeque<Envelope>,
    counters: [Counters; 5],
    closed: bool,
}

struct Queue {
    capacity: usize,
    inner: Mutex<QueueInner>,
    ready: Condvar,
}

impl Queue {
    fn lock(&self) -> MutexGuard<'_, QueueInner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn push(&self, env: Envelope) {
        let mut q = self.lock();
        q.counters[env.topic.index()].published += 1;
        if q.items.len() == self.capacity {
            if let Some(old) = q.items.pop_front() {
                q.counters[old.topic.index()].dropped += 1;
            }
        }
        q.items.push_back(env);
        drop(q);
        self.ready.notify_one();
    }
}

#[derive(Default)]
struct Slot {
    next_seq: u64,
    subscribers: Vec<Weak<Queue>>,
}

/// Topic-based pub-sub with bounded drop-oldest subscriber queues.
pub struct Bus {
    capacity: usize,
    slots: [Mutex<Slot>; 5],
    closed: AtomicBool,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self::with_capacity(DEFAULT_QUEUE_CAPACITY).expect("nonzero default capacity")
    }

    pub fn with_capacity(capacity: usize) -> Result<Self, BusError> {
        if capacity == 0 {
            return Err(BusError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            slots: Default::default(),
            closed: AtomicBool::new(false),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn slot(&self, topic: Topic) -> MutexGuard<'_, Slot> {
        self.slots[topic.index()].lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Publishes `payload` and returns its sequence number.
    pub fn publish(&self, topic: Topic, payload: Payload, stamp_ms: u64) -> Result<u64, BusError> {
        self.publish_traced(topic, payload, stamp_ms, None)
    }

    /// [`Bus::publish`] carrying the arrival time of the originating frame.
    pub fn publish_traced(
        &self,
        topic: Topic,
        payload: Payload,
        stamp_ms: u64,
        origin: Option<Instant>,
    ) -> Result<u64, BusError> {
        if payload.topic() != topic {
            return Err(BusError::SchemaMismatch {
                topic,
                payload: payload.topic(),
            });
        }
        if self.closed.load(Ordering::Acquire) {
            return Err(BusError::Closed);
        }
        // the slot lock is held through fan-out so concurrent publishers keep seq order
        let mut slot = self.slot(topic);
        slot.next_seq += 1;
        let env = Envelope {
            topic,
            seq: slot.next_seq,
            stamp_ms,
            published_at: Instant::now(),
            origin,
            payload: Arc::new(payload),
        };
        slot.subscribers.retain(|w| match w.upgrade() {
            Some(q) => {
                q.push(env.clone());
                true
            }
            None => false,
        });
        Ok(env.seq)
    }

    /// Subscribes one queue to every topic in `topics`.
    pub fn subscribe(&self, topics: &[Topic]) -> Subscription {
        let queue = Arc::new(Queue {
            capacity: self.capacity,
            inner: Mutex::new(QueueInner {
                items: VecDeque::with_capacity(self.capacity),
                counters: Default::default(),
                closed: self.closed.load(Ordering::Acquire),
            }),
            ready: Condvar::new(),
        });
        let mut topics = topics.to_vec();
        topics.sort();
        topics.dedup();
        for t in &topics {
            self.slot(*t).subscribers.push(Arc::downgrade(&queue));
        }
        Subscription { queue, topics }
    }

    /// Subscribes by topic name.
    pub fn subscribe_named(&self, names: &[&str]) -> Result<Subscription, BusError> {
        let topics = names.iter().map(|n| n.parse()).collect::<Result<Vec<Topic>, _>>()?;
        Ok(self.subscribe(&topics))
    }

    pub fn subscriber_count(&self, topic: Topic) -> usize {
        self.slot(topic).subscribers.iter().filter(|w| w.strong_count() > 0).count()
    }

    /// Last sequence number assigned on `topic` (0 before the first publish).
    pub fn last_seq(&self, topic: Topic) -> u64 {
        self.slot(topic).next_seq
    }

    /// Rejects further publishes and wakes every blocked receiver. Queued
    /// messages stay readable.
    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
        for t in Topic::ALL {
            for q in self.slot(t).subscribers.iter().filter_map(Weak::upgrade) {
                q.lock().closed = true;
                q.ready.notify_all();
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::Acquire)
    }
}

/// Receiving end of [`Bus::subscribe`]. Owned by one consumer.
pub struct Subscription {
    queue: Arc<Queue>,
    topics: Vec<Topic>,
}

impl Subscription {
    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    fn take(q: &mut QueueInner) -> Option<Envelope> {
        let env = q.items.pop_front()?;
        q.counters[env.topic.index()].delivered += 1;
        Some(env)
    }

    pub fn try_recv(&self) -> Option<Envelope> {
        Self::take(&mut self.queue.lock())
    }

    /// Blocks until a message arrives; `None` once the bus is closed and the
    /// queue is empty.
    pub fn recv(&self) -> Option<Envelope> {
        let mut q = self.queue.lock();
        loop {
            if let Some(env) = Self::take(&mut q) {
                return Some(env);
            }
            if q.closed {
                return None;
            }
            q = self.queue.ready.wait(q).unwrap_or_else(|e| e.into_inner());
        }
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Result<Envelope, RecvError> {
        let deadline = Instant::now() + timeout;
        let mut q = self.queue.lock();
        loop {
            if let Some(env) = Self::take(&mut q) {
                return Ok(env);
            }
            if q.closed {
                return Err(RecvError::Closed);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(RecvError::Timeout);
            }
            q = self
                .queue
                .ready
                .wait_timeout(q, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    /// Everything currently queued, oldest first.
    pub fn drain(&self) -> Vec<Envelope> {
        let mut q = self.queue.lock();
        let mut out = Vec::with_capacity(q.items.len());
        while let Some(env) = Self::take(&mut q) {
            out.push(env);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.queue.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counters(&self, topic: Topic) -> Counters {
        self.queue.lock().counters[topic.index()]
    }

    pub fn dropped(&self) -> u64 {
        self.queue.lock().counters.iter().map(|c| c.dropped).sum()
    }
}
