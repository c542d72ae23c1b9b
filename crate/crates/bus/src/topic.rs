use std::fmt;
use std::str::FromStr;

use palmjog_core::arm::SimState;
use palmjog_core::control::{GripperState, JogCommand, SafetyReason, SafetyVerdict};
use palmjog_core::{GestureEvent, LandmarkFrame};

use crate::BusError;

/// The five channels of the node graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Topic {
    Landmarks,
    Gesture,
    Jog,
    RobotState,
    SafetyEvents,
}

impl Topic {
    pub const ALL: [Topic; 5] = [
        Topic::Landmarks,
        Topic::Gesture,
        Topic::Jog,
        Topic::RobotState,
        Topic::SafetyEvents,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Topic::Landmarks => "perception/landmarks",
            Topic::Gesture => "perception/gesture",
            Topic::Jog => "controller/jog",
            Topic::RobotState => "robot/state",
            Topic::SafetyEvents => "safety/events",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topic {
    type Err = BusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Topic::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| BusError::UnknownTopic(s.to_string()))
    }
}

/// Snapshot of the simulated arm as published on `robot/state`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub t_ms: u64,
    pub q: [f64; 6],
    pub qdot: [f64; 6],
    pub ee: [f64; 3],
    /// Row-major flange orientation.
    pub rotation: [f64; 9],
    pub gripper: GripperState,
}

impl RobotState {
    pub fn from_sim(state: &SimState, t_ms: u64) -> Self {
        let p = state.ee.position;
        Self {
            t_ms,
            q: state.q,
            qdot: state.qdot,
            ee: [p.x, p.y, p.z],
            rotation: state.ee.rotation_row_major(),
            gripper: state.gripper,
        }
    }
}

/// A non-trivial safety verdict, published on `safety/events`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyEvent {
    pub t_ms: u64,
    pub accepted: bool,
    pub clamped: bool,
    pub reasons: Vec<SafetyReason>,
}

impl SafetyEvent {
    pub fn from_verdict(v: &SafetyVerdict, t_ms: u64) -> Self {
        Self {
            t_ms,
            accepted: v.accepted,
            clamped: v.clamped,
            reasons: v.reasons.clone(),
        }
    }
}

/// Message body; each variant belongs to exactly one topic.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Landmarks(LandmarkFrame),
    Gesture(GestureEvent),
    Jog(JogCommand),
    State(RobotState),
    Safety(SafetyEvent),
}

impl Payload {
    /// Schema tag: the only topic this payload may be published on.
    pub fn topic(&self) -> Topic {
        match self {
            Payload::Landmarks(_) => Topic::Landmarks,
            Payload::Gesture(_) => Topic::Gesture,
            Payload::Jog(_) => Topic::Jog,
            Payload::State(_) => Topic::RobotState,
            Payload::Safety(_) => Topic::SafetyEvents,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in Topic::ALL {
            assert_eq!(t.name().parse::<Topic>().unwrap(), t);
        }
        assert!(matches!("robot/joints".parse::<Topic>(), Err(BusError::UnknownTopic(_))));
    }
}
