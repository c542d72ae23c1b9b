use std::sync::Arc;

use palmjog_core::arm::{SimConfig, SimState};
use palmjog_core::control::ControllerConfig;
use palmjog_core::{GestureEvent, LandmarkFrame};

use crate::clock::{Clock, VirtualClock};
use crate::nodes::{Classifier, ControllerNode, NodeError, SimNode};
use crate::{Bus, Envelope, Payload, RobotState, SafetyEvent, Subscription, Topic};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub controller: ControllerConfig,
    pub sim: SimConfig,
    /// Sim step and controller idle-tick period.
    pub tick_ms: u64,
    pub stale_jog_ms: u64,
    /// Start pose; the home pose when `None`.
    pub initial_q: Option<[f64; 6]>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            sim: SimConfig::default(),
            tick_ms: 10,
            stale_jog_ms: 500,
            initial_q: None,
        }
    }
}

/// The full node graph run synchronously on a virtual clock. Every message
/// still goes through a [`Bus`], so topic semantics match the live service.
pub struct Pipeline {
    bus: Bus,
    clock: VirtualClock,
    classifier: Option<Arc<Classifier>>,
    controller: ControllerNode,
    sim: SimNode,
    tick_ms: u64,
    next_tick_ms: u64,
    event_since_tick: bool,
    landmarks: Subscription,
    gestures: Subscription,
    jogs: Subscription,
    recorder: Subscription,
    log: Vec<Envelope>,
}

impl Pipeline {
    pub fn new(classifier: Option<Arc<Classifier>>, config: PipelineConfig) -> Result<Self, NodeError> {
        if config.tick_ms == 0 {
            return Err(NodeError::Sim(palmjog_core::arm::SimError::Config("tick_ms must be positive".into())));
        }
        let bus = Bus::new();
        let mut sim = SimNode::new(config.sim, config.stale_jog_ms)?;
        if let Some(q) = config.initial_q {
            sim = sim.with_joints(q);
        }
        let mut p = Self {
            landmarks: bus.subscribe(&[Topic::Landmarks]),
            gestures: bus.subscribe(&[Topic::Gesture]),
            jogs: bus.subscribe(&[Topic::Jog]),
            recorder: bus.subscribe(&[Topic::Gesture, Topic::Jog, Topic::RobotState, Topic::SafetyEvents]),
            bus,
            clock: VirtualClock::new(0),
            classifier,
            controller: ControllerNode::new(config.controller)?,
            sim,
            tick_ms: config.tick_ms,
            next_tick_ms: config.tick_ms,
            event_since_tick: false,
            log: Vec::new(),
        };
        let initial = RobotState::from_sim(p.sim.state(), 0);
        p.bus.publish(Topic::RobotState, Payload::State(initial), 0)?;
        p.record();
        Ok(p)
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn sim_state(&self) -> &SimState {
        self.sim.state()
    }

    pub fn controller(&self) -> &ControllerNode {
        &self.controller
    }

    /// Every gesture, jog, state and safety message so far, in publish order.
    pub fn log(&self) -> &[Envelope] {
        &self.log
    }

    /// Runs every tick due up to and including `t_ms`.
    pub fn advance_to(&mut self, t_ms: u64) -> Result<(), NodeError> {
        let now = self.now_ms();
        if t_ms < now {
            return Err(NodeError::TimeRegression { now, requested: t_ms });
        }
        while self.next_tick_ms <= t_ms {
            let t = self.next_tick_ms;
            self.clock.advance_to(t);
            self.tick(t)?;
            self.next_tick_ms += self.tick_ms;
        }
        self.clock.advance_to(t_ms);
        Ok(())
    }

    /// Feeds one camera frame through perception at time `t_ms`.
    pub fn push_frame(&mut self, t_ms: u64, frame: LandmarkFrame) -> Result<GestureEvent, NodeError> {
        let classifier = self.classifier.clone().ok_or(NodeError::NoClassifier)?;
        self.advance_to(t_ms)?;
        self.bus.publish(Topic::Landmarks, Payload::Landmarks(frame), t_ms)?;
        let mut last = None;
        for env in self.landmarks.drain() {
            if let Payload::Landmarks(f) = env.payload.as_ref() {
                let ev = classifier.classify(f)?;
                self.bus.publish(Topic::Gesture, Payload::Gesture(ev), t_ms)?;
                last = Some(ev);
            }
        }
        self.run_controller(t_ms)?;
        Ok(last.expect("one frame in, one gesture out"))
    }

    /// Injects a gesture event directly, as the button input mode does.
    pub fn push_gesture(&mut self, t_ms: u64, event: GestureEvent) -> Result<(), NodeError> {
        self.advance_to(t_ms)?;
        self.bus.publish(Topic::Gesture, Payload::Gesture(event), t_ms)?;
        self.run_controller(t_ms)
    }

    fn run_controller(&mut self, t_ms: u64) -> Result<(), NodeError> {
        for env in self.gestures.drain() {
            if let Payload::Gesture(ev) = env.payload.as_ref() {
                self.event_since_tick = true;
                if let Some(cmd) = self.controller.on_event(Some(ev), t_ms)? {
                    self.bus.publish(Topic::Jog, Payload::Jog(cmd), t_ms)?;
                }
            }
        }
        self.feed_sim(t_ms);
        self.record();
        Ok(())
    }

    fn feed_sim(&mut self, t_ms: u64) {
        for env in self.jogs.drain() {
            if let Payload::Jog(cmd) = env.payload.as_ref() {
                self.sim.on_jog(cmd, t_ms);
            }
        }
    }

    fn tick(&mut self, t_ms: u64) -> Result<(), NodeError> {
        if !std::mem::take(&mut self.event_since_tick) {
            if let Some(cmd) = self.controller.on_event(None, t_ms)? {
                self.bus.publish(Topic::Jog, Payload::Jog(cmd), t_ms)?;
            }
            self.feed_sim(t_ms);
        }
        let out = self.sim.tick(t_ms)?;
        self.bus
            .publish(Topic::RobotState, Payload::State(RobotState::from_sim(&out.state, t_ms)), t_ms)?;
        if out.has_safety_event() {
            let ev = SafetyEvent::from_verdict(&out.verdict, t_ms);
            self.bus.publish(Topic::SafetyEvents, Payload::Safety(ev), t_ms)?;
        }
        self.record();
        Ok(())
    }

    fn record(&mut self) {
        self.log.extend(self.recorder.drain());
    }
}
