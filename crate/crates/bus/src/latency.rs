use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::BusError;

/// Pipeline hops with timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    FrameToGesture,
    GestureToJog,
    JogToState,
    FrameToJog,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::FrameToGesture,
        Stage::GestureToJog,
        Stage::JogToState,
        Stage::FrameToJog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::FrameToGesture => "frame_to_gesture",
            Stage::GestureToJog => "gesture_to_jog",
            Stage::JogToState => "jog_to_state",
            Stage::FrameToJog => "frame_to_jog",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStats {
    pub stage: Stage,
    pub count: usize,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    /// Requested window; stages may hold fewer samples.
    pub window: usize,
    pub stages: Vec<StageStats>,
    /// No sample arrived within the staleness horizon.
    pub stale: bool,
}

impl LatencyReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageStats> {
        self.stages.iter().find(|s| s.stage == stage)
    }
}

/// Nearest-rank percentile of sorted data, `p` in (0, 1].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Ring buffers of recent per-stage latencies.
pub struct LatencyTracker {
    capacity: usize,
    samples: Mutex<[VecDeque<(Instant, Duration)>; 4]>,
}

impl LatencyTracker {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            samples: Mutex::new(Default::default()),
        }
    }

    pub fn record(&self, stage: Stage, elapsed: Duration) {
        let mut s = self.samples.lock().unwrap_or_else(|e| e.into_inner());
        let ring = &mut s[stage as usize];
        if ring.len() == self.capacity {
            ring.pop_front();
        }
        ring.push_back((Instant::now(), elapsed));
    }

    pub fn record_since(&self, stage: Stage, start: Instant) {
        self.record(stage, start.elapsed());
    }

    pub fn clear(&self) {
        let mut s = self.samples.lock().unwrap_or_else(|e| e.into_inner());
        s.iter_mut().for_each(VecDeque::clear);
    }

    /// Percentiles over the latest `window` samples of each stage.
    pub fn report(&self, window: usize, stale_after: Duration) -> Result<LatencyReport, BusError> {
        let s = self.samples.lock().unwrap_or_else(|e| e.into_inner());
        let mut stages = Vec::new();
        let mut newest: Option<Instant> = None;
        for stage in Stage::ALL {
            let ring = &s[stage as usize];
            let take = ring.len().min(window);
            if take == 0 {
                continue;
            }
            let recent = ring.iter().skip(ring.len() - take);
            let mut ms: Vec<f64> = recent.clone().map(|(_, d)| d.as_secs_f64() * 1e3).collect();
            newest = newest.max(recent.map(|(at, _)| *at).max());
            ms.sort_by(f64::total_cmp);
            stages.push(StageStats {
                stage,
                count: ms.len(),
                p50_ms: percentile(&ms, 0.50),
                p99_ms: percentile(&ms, 0.99),
                max_ms: *ms.last().unwrap(),
            });
        }
        let newest = newest.ok_or(BusError::EmptyWindow)?;
        Ok(LatencyReport {
            window,
            stages,
            stale: newest.elapsed() > stale_after,
        })
    }
}
