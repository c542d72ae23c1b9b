//! Message plumbing for palmjog.
//!
//! - [`Bus`]: topic pub-sub with bounded drop-oldest queues
//! - [`wire`]: the newline-delimited JSON protocol spoken to clients
//! - [`nodes`]: perception, controller and sim nodes
//! - [`Pipeline`]: the node graph on a virtual clock, for deterministic runs
//! - [`Service`]: the threaded socket service
//! - [`latency`]: per-stage latency percentiles

mod bus;
pub mod clock;
pub mod latency;
pub mod nodes;
mod pipeline;
mod server;
mod topic;
pub mod wire;

pub use bus::{Bus, Counters, Envelope, RecvError, Subscription, DEFAULT_QUEUE_CAPACITY};
pub use latency::{LatencyReport, LatencyTracker, Stage, StageStats};
pub use nodes::{Classifier, NodeError};
pub use pipeline::{Pipeline, PipelineConfig};
pub use server::{ServeConfig, ServeError, Service};
pub use topic::{Payload, RobotState, SafetyEvent, Topic};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BusError {
    #[error("unknown topic \"{0}\"")]
    UnknownTopic(String),
    #[error("{payload} payload published on {topic}")]
    SchemaMismatch { topic: Topic, payload: Topic },
    #[error("queue capacity must be positive")]
    ZeroCapacity,
    #[error("bus is closed")]
    Closed,
    #[error("latency window is empty")]
    EmptyWindow,
}
