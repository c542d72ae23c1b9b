//! The three processing nodes. Each is a plain state holder driven either by
//! the threaded service or by the virtual-clock [`crate::Pipeline`].

use palmjog_core::arm::{step, SimConfig, SimError, SimState, StepOutcome};
use palmjog_core::control::{ControlError, ControllerConfig, ControllerState, GripperAction, JogCommand};
use palmjog_core::landmark::normalize_frame;
use palmjog_core::nn::{forward, MlpParams, NetError};
use palmjog_core::quant::{quantized_forward, QuantError, QuantizedModel};
use palmjog_core::{GestureEvent, GestureLabel, LandmarkError, LandmarkFrame};
use thiserror::Error;

use crate::BusError;

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("class {0} is not a gesture id")]
    NotAGesture(usize),
    #[error("classifier input width {0} is not 42")]
    InputWidth(usize),
    #[error("time moved backwards: now {now} ms, requested {requested} ms")]
    TimeRegression { now: u64, requested: u64 },
    #[error("no classifier loaded")]
    NoClassifier,
}

/// Model behind the perception node.
#[derive(Debug, Clone)]
pub enum Classifier {
    Float(MlpParams),
    Quantized(QuantizedModel),
}

impl Classifier {
    pub fn float(params: MlpParams) -> Result<Self, NodeError> {
        Self::Float(params).checked()
    }

    pub fn quantized(model: QuantizedModel) -> Result<Self, NodeError> {
        Self::Quantized(model).checked()
    }

    fn checked(self) -> Result<Self, NodeError> {
        let spec = match &self {
            Classifier::Float(p) => &p.spec,
            Classifier::Quantized(q) => &q.spec,
        };
        if spec.input_len() != palmjog_core::landmark::FEATURE_LEN {
            return Err(NodeError::InputWidth(spec.input_len()));
        }
        Ok(self)
    }

    /// Top-1 class and its probability; no threshold is applied here.
    pub fn classify_features(&self, features: &[f64]) -> Result<GestureEvent, NodeError> {
        let (i, confidence) = match self {
            Classifier::Float(p) => forward(p, features)?.1.top(),
            Classifier::Quantized(q) => quantized_forward(q, features)?.0.top(),
        };
        let label = GestureLabel::new(i).ok_or(NodeError::NotAGesture(i))?;
        Ok(GestureEvent { label, confidence })
    }

    pub fn classify(&self, frame: &LandmarkFrame) -> Result<GestureEvent, NodeError> {
        self.classify_features(&normalize_frame(frame)?)
    }
}

/// Gesture events in, jog commands out.
#[derive(Debug, Clone)]
pub struct ControllerNode {
    pub state: ControllerState,
    pub config: ControllerConfig,
}

impl ControllerNode {
    pub fn new(config: ControllerConfig) -> Result<Self, NodeError> {
        config.validate()?;
        Ok(Self {
            state: ControllerState::new(),
            config,
        })
    }

    /// `None` is an idle tick.
    pub fn on_event(&mut self, event: Option<&GestureEvent>, now_ms: u64) -> Result<Option<JogCommand>, NodeError> {
        Ok(self.state.update(event, now_ms, &self.config)?)
    }
}

/// Holds the latest jog and steps the arm at a fixed rate.
#[derive(Debug, Clone)]
pub struct SimNode {
    state: SimState,
    config: SimConfig,
    velocity: [f64; 3],
    pending_grip: Option<GripperAction>,
    last_jog_ms: Option<u64>,
    /// A jog older than this is treated as a stop.
    pub stale_after_ms: u64,
}

impl SimNode {
    pub fn new(config: SimConfig, stale_after_ms: u64) -> Result<Self, NodeError> {
        config.validate()?;
        Ok(Self {
            state: SimState::home(&config.dh),
            config,
            velocity: [0.0; 3],
            pending_grip: None,
            last_jog_ms: None,
            stale_after_ms,
        })
    }

    pub fn with_joints(mut self, q: [f64; 6]) -> Self {
        self.state = SimState::at(q, &self.config.dh);
        self
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn on_jog(&mut self, cmd: &JogCommand, now_ms: u64) {
        self.velocity = cmd.linear_velocity;
        if cmd.gripper_action.is_some() {
            self.pending_grip = cmd.gripper_action;
        }
        self.last_jog_ms = Some(now_ms);
    }

    /// One simulation step of `config.dt`.
    pub fn tick(&mut self, now_ms: u64) -> Result<StepOutcome, NodeError> {
        let stale = self
            .last_jog_ms
            .is_none_or(|t| now_ms.saturating_sub(t) > self.stale_after_ms);
        let cmd = JogCommand {
            linear_velocity: if stale { [0.0; 3] } else { self.velocity },
            gripper_action: self.pending_grip.take(),
            stamp_ms: now_ms,
        };
        let out = step(&self.state, &cmd, &self.config)?;
        self.state = out.state.clone();
        Ok(out)
    }
}
