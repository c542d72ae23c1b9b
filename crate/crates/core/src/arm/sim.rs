use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dh::{forward_kinematics, DhTable, Pose};
use super::dls::ArmModel;
use super::JointVector;
use crate::control::{validate_jog, GripperState, JogCommand, SafetyEnvelope, SafetyError, SafetyVerdict};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("simulation state is not finite")]
    NonFinite,
    #[error("invalid sim config: {0}")]
    Config(String),
    #[error(transparent)]
    Safety(#[from] SafetyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Integration step in seconds.
    pub dt: f64,
    /// DLS damping λ.
    pub damping: f64,
    /// Mass carried by the gripper, kg.
    pub payload_mass: f64,
    pub envelope: SafetyEnvelope,
    pub dh: DhTable,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            damping: 0.05,
            payload_mass: 0.3,
            envelope: SafetyEnvelope::default(),
            dh: DhTable::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config("dt must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping.is_finite()) {
            return Err(SimError::Config("damping must be positive".into()));
        }
        self.envelope.validate()?;
        Ok(())
    }

    pub fn arm(&self) -> ArmModel {
        ArmModel {
            dh: self.dh.clone(),
            damping: self.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub q: JointVector,
    pub qdot: JointVector,
    /// Always `forward_kinematics(q)`.
    pub ee: Pose,
    pub gripper: GripperState,
    /// Seconds since start.
    pub t: f64,
}

impl SimState {
    /// Upper arm vertical, forearm horizontal, wrist pointing down.
    pub const HOME: JointVector = [
        0.0,
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        -std::f64::consts::FRAC_PI_2,
        -std::f64::consts::FRAC_PI_2,
        0.0,
    ];

    pub fn at(q: JointVector, dh: &DhTable) -> Self {
        Self {
            q,
            qdot: [0.0; 6],
            ee: forward_kinematics(&q, dh),
            gripper: GripperState::Open,
            t: 0.0,
        }
    }

    pub fn home(dh: &DhTable) -> Self {
        Self::at(Self::HOME, dh)
    }

    fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qdot).all(|v| v.is_finite()) && self.t.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: SimState,
    pub verdict: SafetyVerdict,
}

impl StepOutcome {
    /// Whether the step produced anything worth a safety event.
    pub fn has_safety_event(&self) -> bool {
        !self.verdict.reasons.is_empty()
    }
}

/// One explicit-Euler step under `cmd`, filtered through the safety envelope.
pub fn step(state: &SimState, cmd: &JogCommand, config: &SimConfig) -> Result<StepOutcome, SimError> {
    if !state.is_finite() {
        return Err(SimError::NonFinite);
    }
    let arm = config.arm();
    let motion = validate_jog(cmd, &state.q, config.payload_mass, &config.envelope, &arm, config.dt)?;
    let gripper = cmd.gripper_action.map_or(state.gripper, GripperState::from);
    let next = SimState {
        q: motion.next_q,
        qdot: motion.qdot,
        ee: forward_kinematics(&motion.next_q, &config.dh),
        gripper,
        t: state.t + config.dt,
    };
    if !next.is_finite() {
        return Err(SimError::NonFinite);
    }
    Ok(StepOutcome {
        state: next,
        verdict: motion.verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{GripperAction, SafetyReason, SHOULDER_LIFT};

    fn jog(v: [f64; 3]) -> JogCommand {
        JogCommand {
            linear_velocity: v,
            gripper_action: None,
            stamp_ms: 0,
        }
    }

    #[test]
    fn zero_command_only_advances_time() {
        let cfg = SimConfig::default();
        let s0 = SimState::home(&cfg.dh);
        let out = step(&s0, &jog([0.0; 3]), &cfg).unwrap();
        assert_eq!(out.state.q, s0.q);
        assert_eq!(out.state.ee, s0.ee);
        assert_eq!(out.state.t, s0.t + cfg.dt);
        assert_eq!(out.verdict, SafetyVerdict::ok());
    }

    #[test]
    fn idle_arm_never_drifts() {
        let cfg = SimConfig::default();
        let mut s = SimState::home(&cfg.dh);
        for _ in 0..10_000 {
            s = step(&s, &jog([0.0; 3]), &cfg).unwrap().state;
        }
        assert_eq!(s.q, SimState::HOME);
    }

    #[test]
    fn sustained_upward_jog_raises_flange() {
        let cfg = SimConfig::default();
        let mut s = SimState::home(&cfg.dh);
        for _ in 0..100 {
            let next = step(&s, &jog([0.0, 0.0, 0.05]), &cfg).unwrap().state;
            assert!(next.ee.position.z > s.ee.position.z);
            assert_eq!(next.ee, forward_kinematics(&next.q, &cfg.dh));
            s = next;
        }
    }

    #[test]
    fn gripper_follows_action() {
        let cfg = SimConfig::default();
        let s = SimState::home(&cfg.dh);
        let mut c = jog([0.0; 3]);
        c.gripper_action = Some(GripperAction::Close);
        let s = step(&s, &c, &cfg).unwrap().state;
        assert_eq!(s.gripper, GripperState::Closed);
        let s = step(&s, &jog([0.0; 3]), &cfg).unwrap().state;
        assert_eq!(s.gripper, GripperState::Closed);
    }

    #[test]
    fn shoulder_pinned_at_lower_bound() {
        let cfg = SimConfig::default();
        let mut q = SimState::HOME;
        q[SHOULDER_LIFT] = (-182.95f64).to_radians();
        let mut s = SimState::at(q, &cfg.dh);
        // a resolver-independent push: command straight at the joint through the envelope
        let push = |_: &[f64; 3], _: &[f64; 6]| {
            let mut v = [0.0; 6];
            v[SHOULDER_LIFT] = -0.5;
            v
        };
        let m = validate_jog(&jog([0.0, 0.0, -0.05]), &s.q, 0.0, &cfg.envelope, &push, cfg.dt).unwrap();
        assert_eq!(m.verdict.reasons, vec![SafetyReason::JointLimit]);
        s.q = m.next_q;
        assert!((s.q[SHOULDER_LIFT].to_degrees() + 183.0).abs() < 1e-9);
        assert!(s.q[SHOULDER_LIFT].to_degrees() >= -183.0);
    }

    #[test]
    fn non_finite_state_rejected() {
        let cfg = SimConfig::default();
        let mut s = SimState::home(&cfg.dh);
        s.q[0] = f64::NAN;
        assert_eq!(step(&s, &jog([0.0; 3]), &cfg), Err(SimError::NonFinite));
    }
}
