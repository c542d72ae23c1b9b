//! Debounced gesture → jog state machine.
//!
//! `update` is called once per classifier output and once per control tick
//! (with `None`). A label becomes the active command after `debounce_frames`
//! consecutive confident events; a different label restarts the count. While a
//! jog is active a velocity command goes out on every update. When no confident
//! event arrives for longer than `gesture_timeout_ms` the active command is
//! cleared and a single zero-velocity stop is sent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::intent::{CommandIntent, GestureMap, GripperAction, GripperState};
use crate::gesture::{GestureEvent, GestureLabel};

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("time went backwards: {now} ms < {last} ms")]
    TimeRegression { now: u64, last: u64 },
    #[error("invalid controller config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub confidence_threshold: f64,
    pub debounce_frames: u32,
    /// Cartesian jog speed in m/s.
    pub jog_speed: f64,
    pub gesture_timeout_ms: u64,
    #[serde(skip)]
    pub gesture_map: GestureMap,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.8,
            debounce_frames: 3,
            jog_speed: 0.05,
            gesture_timeout_ms: 300,
            gesture_map: GestureMap::default(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.debounce_frames == 0 {
            return Err(ControlError::Config("debounce_frames must be >= 1".into()));
        }
        if !(self.jog_speed > 0.0 && self.jog_speed.is_finite()) {
            return Err(ControlError::Config("jog_speed must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(ControlError::Config("confidence_threshold must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn map_gesture(&self, label: GestureLabel) -> CommandIntent {
        self.gesture_map.lookup(label)
    }
}

/// Cartesian velocity command for the arm, base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JogCommand {
    pub linear_velocity: [f64; 3],
    pub gripper_action: Option<GripperAction>,
    pub stamp_ms: u64,
}

impl JogCommand {
    pub fn stop(stamp_ms: u64) -> Self {
        Self {
            linear_velocity: [0.0; 3],
            gripper_action: None,
            stamp_ms,
        }
    }

    pub fn is_stop(&self) -> bool {
        self.linear_velocity == [0.0; 3] && self.gripper_action.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControllerState {
    pub active: CommandIntent,
    /// Label being debounced and how many consecutive events it has.
    pub candidate: Option<(GestureLabel, u32)>,
    pub last_event_ms: Option<u64>,
    pub last_update_ms: Option<u64>,
    pub gripper: GripperState,
}

impl ControllerState {
    pub fn new() -> Self {
        Self::default()
    }

    fn command_for(&self, intent: CommandIntent, now: u64, config: &ControllerConfig) -> JogCommand {
        let mut cmd = JogCommand::stop(now);
        if let CommandIntent::Jog { axis, positive } = intent {
            cmd.linear_velocity[axis.index()] = if positive { config.jog_speed } else { -config.jog_speed };
        }
        cmd
    }

    /// Advances the state machine. `event` is `None` for a tick without a
    /// classification; events under the confidence threshold are treated the same.
    pub fn update(
        &mut self,
        event: Option<&GestureEvent>,
        now: u64,
        config: &ControllerConfig,
    ) -> Result<Option<JogCommand>, ControlError> {
        if let Some(last) = self.last_update_ms {
            if now < last {
                return Err(ControlError::TimeRegression { now, last });
            }
        }
        self.last_update_ms = Some(now);
        let event = event.filter(|e| e.confidence >= config.confidence_threshold);

        let Some(ev) = event else {
            let expired = self
                .last_event_ms
                .is_some_and(|t| now.saturating_sub(t) > config.gesture_timeout_ms);
            if expired {
                self.candidate = None;
                let previous = std::mem::take(&mut self.active);
                self.last_event_ms = None;
                return Ok(previous.is_jog().then(|| JogCommand::stop(now)));
            }
            return Ok(self
                .active
                .is_jog()
                .then(|| self.command_for(self.active, now, config)));
        };

        self.last_event_ms = Some(now);
        let count = match self.candidate {
            Some((label, n)) if label == ev.label => (n + 1).min(config.debounce_frames),
            _ => 1,
        };
        self.candidate = Some((ev.label, count));

        if count >= config.debounce_frames {
            let intent = config.map_gesture(ev.label);
            if intent != self.active {
                let previous = std::mem::replace(&mut self.active, intent);
                return Ok(match intent {
                    CommandIntent::Jog { .. } => Some(self.command_for(intent, now, config)),
                    CommandIntent::Gripper(action) => {
                        self.gripper = action.into();
                        let mut cmd = JogCommand::stop(now);
                        cmd.gripper_action = Some(action);
                        Some(cmd)
                    }
                    CommandIntent::None => previous.is_jog().then(|| JogCommand::stop(now)),
                });
            }
        }
        Ok(self
            .active
            .is_jog()
            .then(|| self.command_for(self.active, now, config)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::intent::{parse_gesture_map, Axis};

    fn ev(label: GestureLabel, confidence: f64) -> GestureEvent {
        GestureEvent { label, confidence }
    }

    #[test]
    fn debounce_then_jog() {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState::new();
        let up = ev(GestureLabel::POINT_UP, 0.9);
        assert_eq!(s.update(Some(&up), 0, &cfg).unwrap(), None);
        assert_eq!(s.update(Some(&up), 33, &cfg).unwrap(), None);
        let cmd = s.update(Some(&up), 66, &cfg).unwrap().unwrap();
        assert_eq!(cmd.linear_velocity, [0.0, 0.0, 0.05]);
        assert_eq!(s.active, CommandIntent::jog(Axis::Z, true));
        // held: continuous emission, ticks included
        assert!(s.update(Some(&up), 99, &cfg).unwrap().is_some());
        assert!(s.update(None, 105, &cfg).unwrap().is_some());
    }

    #[test]
    fn timeout_stops_once() {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState::new();
        let up = ev(GestureLabel::POINT_UP, 0.9);
        for t in [0, 33, 66] {
            s.update(Some(&up), t, &cfg).unwrap();
        }
        assert!(s.update(None, 366, &cfg).unwrap().unwrap().linear_velocity[2] > 0.0);
        let stop = s.update(None, 367, &cfg).unwrap().unwrap();
        assert!(stop.is_stop());
        assert_eq!(s.active, CommandIntent::None);
        for t in 368..400 {
            assert_eq!(s.update(None, t, &cfg).unwrap(), None);
        }
    }

    #[test]
    fn alternating_labels_never_activate() {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState::new();
        for i in 0..50u64 {
            let l = if i % 2 == 0 { GestureLabel::POINT_UP } else { GestureLabel::POINT_DOWN };
            assert_eq!(s.update(Some(&ev(l, 0.95)), i * 33, &cfg).unwrap(), None);
        }
        assert_eq!(s.active, CommandIntent::None);
    }

    #[test]
    fn low_confidence_counts_as_nothing() {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState::new();
        for t in 0..10 {
            assert_eq!(s.update(Some(&ev(GestureLabel::POINT_UP, 0.5)), t, &cfg).unwrap(), None);
        }
        assert_eq!(s.candidate, None);
    }

    #[test]
    fn gripper_fires_once() {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState::new();
        let fist = ev(GestureLabel::FIST, 0.99);
        let mut emitted = Vec::new();
        for t in 0..10u64 {
            if let Some(c) = s.update(Some(&fist), t * 33, &cfg).unwrap() {
                emitted.push(c);
            }
        }
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].gripper_action, Some(GripperAction::Close));
        assert_eq!(emitted[0].linear_velocity, [0.0; 3]);
        assert_eq!(s.gripper, GripperState::Closed);
    }

    #[test]
    fn new_command_replaces_jog_after_debounce() {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState::new();
        let up = ev(GestureLabel::POINT_UP, 0.9);
        let right = ev(GestureLabel::POINT_RIGHT, 0.9);
        for t in 0..3 {
            s.update(Some(&up), t, &cfg).unwrap();
        }
        // previous jog keeps running while the new label debounces
        assert_eq!(s.update(Some(&right), 3, &cfg).unwrap().unwrap().linear_velocity[2], 0.05);
        assert_eq!(s.update(Some(&right), 4, &cfg).unwrap().unwrap().linear_velocity[2], 0.05);
        let c = s.update(Some(&right), 5, &cfg).unwrap().unwrap();
        assert_eq!(c.linear_velocity, [0.0, 0.05, 0.0]);
    }

    #[test]
    fn unmapped_label_stops_active_jog() {
        let cfg = ControllerConfig {
            gesture_map: parse_gesture_map("6 = none").unwrap(),
            ..Default::default()
        };
        let mut s = ControllerState::new();
        for t in 0..3 {
            s.update(Some(&ev(GestureLabel::POINT_UP, 0.9)), t, &cfg).unwrap();
        }
        let peace = ev(GestureLabel::PEACE, 0.9);
        s.update(Some(&peace), 3, &cfg).unwrap();
        s.update(Some(&peace), 4, &cfg).unwrap();
        assert!(s.update(Some(&peace), 5, &cfg).unwrap().unwrap().is_stop());
        assert_eq!(s.update(Some(&peace), 6, &cfg).unwrap(), None);
    }

    #[test]
    fn time_regression_is_an_error() {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState::new();
        s.update(None, 10, &cfg).unwrap();
        assert_eq!(
            s.update(None, 9, &cfg),
            Err(ControlError::TimeRegression { now: 9, last: 10 })
        );
    }

    #[test]
    fn config_validation() {
        let bad = ControllerConfig {
            debounce_frames: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(ControllerConfig::default().validate().is_ok());
    }
}
