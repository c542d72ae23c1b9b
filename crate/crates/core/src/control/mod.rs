//! Gesture-driven jog control and the safety envelope in front of the arm.

mod intent;
mod machine;
mod safety;

pub use intent::{
    default_gesture_map, parse_gesture_map, Axis, CommandIntent, GestureMap, GestureMapError,
    GripperAction, GripperState,
};
pub use machine::{ControlError, ControllerConfig, ControllerState, JogCommand};
pub use safety::{
    check_payload, clamp_joint_targets, radian_limits, scale_joint_speed, validate_jog,
    SafeMotion, SafetyEnvelope, SafetyError, SafetyReason, SafetyVerdict, VelocityResolver,
    SHOULDER_LIFT,
};
