//! Scripted gesture scenarios run headless on the virtual-clock pipeline,
//! with a geometric verdict and a post-hoc safety audit of the log.

use std::sync::Arc;

use palmjog_bus::wire::Outbound;
use palmjog_bus::{Classifier, Envelope, NodeError, Payload, Pipeline, PipelineConfig, RobotState};
use palmjog_core::arm::{forward_kinematics, SimConfig};
use palmjog_core::control::{GripperAction, GripperState, SafetyReason};
use palmjog_core::synth::jittered_frame;
use palmjog_core::{GestureEvent, GestureLabel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PICK_AND_PLACE: &str = include_str!("../assets/scenarios/pick_and_place.json");
pub const LIMIT_SEEK: &str = include_str!("../assets/scenarios/limit_seek.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("step {index}: time {t} ms is before the previous step at {previous} ms")]
    TimeRegression { index: usize, t: u64, previous: u64 },
    #[error("unknown gesture \"{0}\"")]
    UnknownGesture(String),
    #[error("invalid script: {0}")]
    Invalid(String),
    #[error("script is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("frame input needs a classifier model")]
    NeedsClassifier,
    #[error(transparent)]
    Node(#[from] NodeError),
}

/// How scripted gestures enter the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Synthetic landmark frames through the classifier.
    #[default]
    Frames,
    /// Confidence-1 gesture events, as the console buttons send them.
    Hold,
}

/// A gesture id, a gesture name, or `"none"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GestureRef {
    Id(u8),
    Name(String),
}

impl GestureRef {
    pub fn resolve(&self) -> Result<Option<GestureLabel>, ScenarioError> {
        match self {
            GestureRef::Id(i) => GestureLabel::new(*i as usize)
                .map(Some)
                .ok_or_else(|| ScenarioError::UnknownGesture(i.to_string())),
            GestureRef::Name(n) if n.eq_ignore_ascii_case("none") => Ok(None),
            GestureRef::Name(n) => GestureLabel::from_name(&n.replace('_', ""))
                .map(Some)
                .ok_or_else(|| ScenarioError::UnknownGesture(n.clone())),
        }
    }
}

/// From `t` on, the hand shows `gesture` (or nothing) until the next step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    pub t: u64,
    pub gesture: GestureRef,
}

/// A ball the flange must enter, optionally followed by a gripper action there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub name: String,
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default)]
    pub gripper: Option<GripperAction>,
}

fn default_fps() -> u32 {
    30
}

fn default_jitter() -> f64 {
    0.005
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    #[serde(default)]
    pub input: InputMode,
    #[serde(default = "default_fps")]
    pub fps: u32,
    /// Landmark noise for synthetic frames.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub start_q_deg: Option<[f64; 6]>,
    #[serde(default)]
    pub payload_kg: Option<f64>,
    /// Run length; one second past the last step when omitted.
    #[serde(default)]
    pub end_ms: Option<u64>,
    pub steps: Vec<ScriptStep>,
    #[serde(default)]
    pub checkpoints: Vec<Checkpoint>,
}

impl ScenarioScript {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn pick_and_place() -> Self {
        Self::parse(PICK_AND_PLACE).expect("bundled script is valid")
    }

    pub fn limit_seek() -> Self {
        Self::parse(LIMIT_SEEK).expect("bundled script is valid")
    }

    pub fn empty(name: &str) -> Self {
        Self {
            name: name.to_string(),
            input: InputMode::Hold,
            fps: default_fps(),
            jitter: default_jitter(),
            start_q_deg: None,
            payload_kg: None,
            end_ms: None,
            steps: Vec::new(),
            checkpoints: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (i, w) in self.steps.windows(2).enumerate() {
            if w[1].t < w[0].t {
                return Err(ScenarioError::TimeRegression {
                    index: i + 1,
                    t: w[1].t,
                    previous: w[0].t,
                });
            }
        }
        for s in &self.steps {
            s.gesture.resolve()?;
        }
        if self.fps == 0 || self.fps > 1000 {
            return Err(ScenarioError::Invalid("fps must be in 1..=1000".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(ScenarioError::Invalid("jitter must be finite and non-negative".into()));
        }
        if let (Some(end), Some(last)) = (self.end_ms, self.steps.last()) {
            if end < last.t {
                return Err(ScenarioError::Invalid("end_ms precedes the last step".into()));
            }
        }
        if self.checkpoints.iter().any(|c| !(c.radius > 0.0) || c.center.iter().any(|v| !v.is_finite())) {
            return Err(ScenarioError::Invalid("checkpoint radius must be positive, center finite".into()));
        }
        if self.start_q_deg.is_some_and(|q| q.iter().any(|v| !v.is_finite())) {
            return Err(ScenarioError::Invalid("start_q_deg must be finite".into()));
        }
        Ok(())
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms.unwrap_or_else(|| self.steps.last().map_or(0, |s| s.t + 1_000))
    }

    fn gesture_at(&self, t: u64) -> Option<GestureLabel> {
        self.steps
            .iter()
            .take_while(|s| s.t <= t)
            .last()
            .and_then(|s| s.gesture.resolve().ok().flatten())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyCounts {
    pub events: usize,
    pub joint_limit: usize,
    pub speed_limit: usize,
    pub payload: usize,
    /// Events where the command was refused outright.
    pub rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalResult {
    pub name: String,
    pub reached_at_ms: Option<u64>,
    pub gripper_at_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub script: String,
    pub success: bool,
    pub goals: Vec<GoalResult>,
    pub gripper_order_ok: bool,
    pub gripper_actions: Vec<GripperAction>,
    pub safety: SafetyCounts,
    /// Audit findings; empty when every logged state respects the envelope.
    pub violations: Vec<String>,
    pub states: usize,
    pub duration_ms: u64,
    pub notes: Vec<String>,
}

pub struct ScenarioRun {
    pub log: Vec<Envelope>,
    pub verdict: Verdict,
}

impl ScenarioRun {
    /// The log as clients would have received it.
    pub fn wire_log(&self) -> Vec<Outbound> {
        self.log.iter().filter_map(Outbound::from_envelope).collect()
    }
}

/// Plays `script` through the virtual-clock pipeline and judges the result.
pub fn run_scenario(
    script: &ScenarioScript,
    classifier: Option<Arc<Classifier>>,
    mut config: PipelineConfig,
    seed: u64,
) -> Result<ScenarioRun, ScenarioError> {
    script.validate()?;
    if script.input == InputMode::Frames && classifier.is_none() && !script.steps.is_empty() {
        return Err(ScenarioError::NeedsClassifier);
    }
    if let Some(q) = script.start_q_deg {
        config.initial_q = Some(q.map(f64::to_radians));
    }
    if let Some(m) = script.payload_kg {
        config.sim.payload_mass = m;
    }
    let sim = config.sim.clone();
    let mut p = Pipeline::new(classifier, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = script.end_ms();
    if !script.steps.is_empty() {
        let fps = u64::from(script.fps);
        for k in 0.. {
            let t = k * 1_000 / fps;
            if t >= end {
                break;
            }
            let Some(label) = script.gesture_at(t) else { continue };
            match script.input {
                InputMode::Frames => {
                    p.push_frame(t, jittered_frame(label, script.jitter, t, &mut rng))?;
                }
                InputMode::Hold => p.push_gesture(t, GestureEvent { label, confidence: 1.0 })?,
            }
        }
    }
    p.advance_to(end)?;
    let log = p.log().to_vec();
    let verdict = judge(script, &log, &sim);
    Ok(ScenarioRun { log, verdict })
}

fn states(log: &[Envelope]) -> impl Iterator<Item = &RobotState> {
    log.iter().filter_map(|e| match e.payload.as_ref() {
        Payload::State(s) => Some(s),
        _ => None,
    })
}

/// Checks every logged state and safety event against the envelope.
pub fn audit(log: &[Envelope], sim: &SimConfig) -> Vec<String> {
    let mut out = Vec::new();
    let env = &sim.envelope;
    let mut last_t = 0;
    for s in states(log) {
        if s.t_ms < last_t {
            out.push(format!("t={}: time went backwards from {last_t}", s.t_ms));
        }
        last_t = s.t_ms;
        for j in 0..6 {
            let (lo, hi) = env.joint_limits_deg[j];
            let deg = s.q[j].to_degrees();
            if !(lo..=hi).contains(&deg) {
                out.push(format!("t={}: joint {j} at {deg:.6} deg outside [{lo}, {hi}]", s.t_ms));
            }
            if s.qdot[j].abs() > env.speed_cap(j) {
                out.push(format!("t={}: joint {j} speed {:.6} above cap {:.6}", s.t_ms, s.qdot[j], env.speed_cap(j)));
            }
        }
        let pose = forward_kinematics(&s.q, &sim.dh);
        if [pose.position.x, pose.position.y, pose.position.z] != s.ee {
            out.push(format!("t={}: end effector does not match forward kinematics", s.t_ms));
        }
        if pose.orthonormality_error() > 1e-9 {
            out.push(format!("t={}: rotation not orthonormal", s.t_ms));
        }
    }
    let over = sim.payload_mass > env.payload_cap;
    for e in log {
        if let Payload::Safety(s) = e.payload.as_ref() {
            if s.reasons.contains(&SafetyReason::Payload) != over {
                out.push(format!("t={}: payload verdict inconsistent with {} kg", s.t_ms, sim.payload_mass));
            }
        }
    }
    out
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn action_state(a: GripperAction) -> GripperState {
    match a {
        GripperAction::Open => GripperState::Open,
        GripperAction::Close => GripperState::Closed,
    }
}

/// Goal-region verdict on a logged trajectory.
pub fn judge(script: &ScenarioScript, log: &[Envelope], sim: &SimConfig) -> Verdict {
    let mut safety = SafetyCounts::default();
    let mut gripper_actions = Vec::new();
    for e in log {
        match e.payload.as_ref() {
            Payload::Safety(s) => {
                safety.events += 1;
                safety.joint_limit += s.reasons.contains(&SafetyReason::JointLimit) as usize;
                safety.speed_limit += s.reasons.contains(&SafetyReason::SpeedLimit) as usize;
                safety.payload += s.reasons.contains(&SafetyReason::Payload) as usize;
                safety.rejections += (!s.accepted) as usize;
            }
            Payload::Jog(j) => gripper_actions.extend(j.gripper_action),
            _ => {}
        }
    }

    let mut goals: Vec<GoalResult> = script
        .checkpoints
        .iter()
        .map(|c| GoalResult {
            name: c.name.clone(),
            reached_at_ms: None,
            gripper_at_ms: None,
        })
        .collect();
    let mut i = 0;
    let mut prev_grip: Option<GripperState> = None;
    for s in states(log) {
        let changed_to = (prev_grip.is_some_and(|g| g != s.gripper)).then_some(s.gripper);
        prev_grip = Some(s.gripper);
        let Some(cp) = script.checkpoints.get(i) else { break };
        let inside = dist(&s.ee, &cp.center) <= cp.radius;
        if goals[i].reached_at_ms.is_none() {
            if !inside {
                continue;
            }
            goals[i].reached_at_ms = Some(s.t_ms);
        }
        match cp.gripper {
            None => i += 1,
            Some(a) if inside && changed_to == Some(action_state(a)) => {
                goals[i].gripper_at_ms = Some(s.t_ms);
                i += 1;
            }
            Some(_) => {}
        }
    }

    let expected: Vec<GripperAction> = script.checkpoints.iter().filter_map(|c| c.gripper).collect();
    let gripper_order_ok = gripper_actions == expected;
    let violations = audit(log, sim);
    let mut notes = Vec::new();
    if script.checkpoints.is_empty() {
        notes.push("no goals".to_string());
    }
    if safety.joint_limit > 0 {
        notes.push(format!("{} joint_limit safety events", safety.joint_limit));
    }
    let success = i == script.checkpoints.len() && gripper_order_ok && violations.is_empty() && safety.rejections == 0;
    Verdict {
        script: script.name.clone(),
        success,
        goals,
        gripper_order_ok,
        gripper_actions,
        safety,
        violations,
        states: states(log).count(),
        duration_ms: script.end_ms(),
        notes,
    }
}
