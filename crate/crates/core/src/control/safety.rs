//! Joint-angle limits, the global speed fraction and the payload cap.
//!
//! Checks run in a fixed order: payload, then speed scaling, then joint limits
//! on the one-step Euler prediction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::machine::JogCommand;

/// Index of the shoulder-lift joint.
pub const SHOULDER_LIFT: usize = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SafetyError {
    #[error("negative payload mass {0} kg")]
    NegativeMass(f64),
    #[error("non-finite input to safety check")]
    NonFinite,
    #[error("invalid safety envelope: {0}")]
    Envelope(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyReason {
    JointLimit,
    SpeedLimit,
    Payload,
}

impl SafetyReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SafetyReason::JointLimit => "joint_limit",
            SafetyReason::SpeedLimit => "speed_limit",
            SafetyReason::Payload => "payload",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub accepted: bool,
    pub clamped: bool,
    pub reasons: Vec<SafetyReason>,
}

impl SafetyVerdict {
    pub fn ok() -> Self {
        Self {
            accepted: true,
            clamped: false,
            reasons: Vec::new(),
        }
    }

    fn flag(&mut self, reason: SafetyReason) {
        self.clamped = true;
        if !self.reasons.contains(&reason) {
            self.reasons.push(reason);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyEnvelope {
    /// `(min, max)` per joint in degrees.
    pub joint_limits_deg: [(f64, f64); 6],
    /// Fraction of `max_joint_speed` any joint may use.
    pub speed_fraction: f64,
    /// Rated joint speeds, rad/s.
    pub max_joint_speed: [f64; 6],
    /// Payload cap in kg (inclusive).
    pub payload_cap: f64,
}

impl Default for SafetyEnvelope {
    fn default() -> Self {
        let mut joint_limits_deg = [(-360.0, 360.0); 6];
        joint_limits_deg[SHOULDER_LIFT] = (-183.0, -13.0);
        Self {
            joint_limits_deg,
            speed_fraction: 0.2,
            max_joint_speed: [PI; 6],
            payload_cap: 1.0,
        }
    }
}

impl SafetyEnvelope {
    pub fn validate(&self) -> Result<(), SafetyError> {
        for (j, (lo, hi)) in self.joint_limits_deg.iter().enumerate() {
            if !(lo < hi) {
                return Err(SafetyError::Envelope(format!("joint {j}: min {lo} >= max {hi}")));
            }
        }
        if !(self.speed_fraction > 0.0 && self.speed_fraction <= 1.0) {
            return Err(SafetyError::Envelope("speed_fraction must be in (0, 1]".into()));
        }
        if self.max_joint_speed.iter().any(|s| !(*s > 0.0)) {
            return Err(SafetyError::Envelope("max_joint_speed must be positive".into()));
        }
        if !(self.payload_cap > 0.0) {
            return Err(SafetyError::Envelope("payload_cap must be positive".into()));
        }
        Ok(())
    }

    /// Per-joint speed cap in rad/s.
    pub fn speed_cap(&self, joint: usize) -> f64 {
        self.speed_fraction * self.max_joint_speed[joint]
    }
}

/// Joint limits in radians, nudged inward so that converting back to degrees
/// never lands outside the configured range.
pub fn radian_limits(envelope: &SafetyEnvelope) -> [(f64, f64); 6] {
    envelope.joint_limits_deg.map(|(lo_deg, hi_deg)| {
        let mut lo = lo_deg.to_radians();
        while lo.to_degrees() < lo_deg {
            lo = lo.next_up();
        }
        let mut hi = hi_deg.to_radians();
        while hi.to_degrees() > hi_deg {
            hi = hi.next_down();
        }
        (lo, hi)
    })
}

/// Clamps each joint (degrees) into its range.
pub fn clamp_joint_targets(q_deg: &[f64; 6], envelope: &SafetyEnvelope) -> ([f64; 6], bool) {
    let mut clamped = false;
    let mut out = *q_deg;
    for (v, (lo, hi)) in out.iter_mut().zip(envelope.joint_limits_deg) {
        let c = v.clamp(lo, hi);
        clamped |= c != *v;
        *v = c;
    }
    (out, clamped)
}

/// Uniformly scales `qdot` so no joint exceeds its cap; the direction is kept.
pub fn scale_joint_speed(qdot: &[f64; 6], envelope: &SafetyEnvelope) -> [f64; 6] {
    let worst = (0..6)
        .map(|j| qdot[j].abs() / envelope.speed_cap(j))
        .fold(0.0f64, f64::max);
    if worst <= 1.0 {
        return *qdot;
    }
    let mut out = qdot.map(|v| v / worst);
    // the division can land an ulp above the cap
    for (j, v) in out.iter_mut().enumerate() {
        let cap = envelope.speed_cap(j);
        *v = v.clamp(-cap, cap);
    }
    out
}

pub fn check_payload(mass: f64, envelope: &SafetyEnvelope) -> Result<SafetyVerdict, SafetyError> {
    if !mass.is_finite() {
        return Err(SafetyError::NonFinite);
    }
    if mass < 0.0 {
        return Err(SafetyError::NegativeMass(mass));
    }
    if mass <= envelope.payload_cap {
        Ok(SafetyVerdict::ok())
    } else {
        Ok(SafetyVerdict {
            accepted: false,
            clamped: false,
            reasons: vec![SafetyReason::Payload],
        })
    }
}

/// Maps a Cartesian linear velocity to joint velocities at `q`.
pub trait VelocityResolver {
    fn joint_velocity(&self, linear_velocity: &[f64; 3], q: &[f64; 6]) -> [f64; 6];
}

impl<F: Fn(&[f64; 3], &[f64; 6]) -> [f64; 6]> VelocityResolver for F {
    fn joint_velocity(&self, v: &[f64; 3], q: &[f64; 6]) -> [f64; 6] {
        self(v, q)
    }
}

/// Outcome of [`validate_jog`]: the verdict, the joint velocity to report and
/// the joint position to move to after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeMotion {
    pub verdict: SafetyVerdict,
    pub qdot: [f64; 6],
    pub next_q: [f64; 6],
}

impl SafeMotion {
    pub fn is_stop(&self) -> bool {
        !self.verdict.accepted
    }
}

/// Runs a jog command through payload, speed and joint-limit checks.
/// Joints whose predicted position would leave their range are pinned at the
/// bound and their reported velocity is zeroed.
pub fn validate_jog<R: VelocityResolver + ?Sized>(
    cmd: &JogCommand,
    q: &[f64; 6],
    payload_mass: f64,
    envelope: &SafetyEnvelope,
    resolver: &R,
    dt: f64,
) -> Result<SafeMotion, SafetyError> {
    if !(cmd.linear_velocity.iter().chain(q).all(|v| v.is_finite()) && dt.is_finite()) {
        return Err(SafetyError::NonFinite);
    }
    let mut verdict = check_payload(payload_mass, envelope)?;
    if !verdict.accepted {
        return Ok(SafeMotion {
            verdict,
            qdot: [0.0; 6],
            next_q: *q,
        });
    }

    let raw = if cmd.linear_velocity == [0.0; 3] {
        [0.0; 6]
    } else {
        resolver.joint_velocity(&cmd.linear_velocity, q)
    };
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(SafetyError::NonFinite);
    }
    let mut qdot = scale_joint_speed(&raw, envelope);
    if qdot != raw {
        verdict.flag(SafetyReason::SpeedLimit);
    }

    let limits = radian_limits(envelope);
    let mut next_q = [0.0; 6];
    for j in 0..6 {
        let (lo, hi) = limits[j];
        let predicted = q[j] + qdot[j] * dt;
        let pinned = predicted.clamp(lo, hi);
        if pinned != predicted {
            qdot[j] = 0.0;
            verdict.flag(SafetyReason::JointLimit);
        }
        next_q[j] = pinned;
    }
    Ok(SafeMotion {
        verdict,
        qdot,
        next_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> SafetyEnvelope {
        SafetyEnvelope::default()
    }

    fn q_with_shoulder(deg: f64) -> [f64; 6] {
        let mut q = [0.0; 6];
        q[SHOULDER_LIFT] = deg;
        q
    }

    #[test]
    fn shoulder_lift_clamp() {
        let (q, c) = clamp_joint_targets(&q_with_shoulder(-200.0), &env());
        assert_eq!((q[SHOULDER_LIFT], c), (-183.0, true));
        let (q, c) = clamp_joint_targets(&q_with_shoulder(-100.0), &env());
        assert_eq!((q[SHOULDER_LIFT], c), (-100.0, false));
        let (q, c) = clamp_joint_targets(&q_with_shoulder(0.0), &env());
        assert_eq!((q[SHOULDER_LIFT], c), (-13.0, true));
    }

    #[test]
    fn radian_limits_round_trip_inside() {
        for ((lo, hi), (lo_deg, hi_deg)) in radian_limits(&env()).iter().zip(env().joint_limits_deg) {
            assert!(lo.to_degrees() >= lo_deg && (lo.to_degrees() - lo_deg).abs() < 1e-12);
            assert!(hi.to_degrees() <= hi_deg && (hi.to_degrees() - hi_deg).abs() < 1e-12);
        }
        let (lo, hi) = radian_limits(&env())[SHOULDER_LIFT];
        assert!(lo.to_degrees() >= -183.0 && hi.to_degrees() <= -13.0);
    }

    #[test]
    fn speed_scaling() {
        let out = scale_joint_speed(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &env());
        assert!((out[0] - 0.2 * PI).abs() < 1e-15);
        assert!((out[0] - 0.62832).abs() < 1e-5);
        let inside = [0.1, -0.2, 0.3, 0.0, 0.5, -0.6];
        assert_eq!(scale_joint_speed(&inside, &env()), inside);
        assert_eq!(scale_joint_speed(&[0.0; 6], &env()), [0.0; 6]);

        let v = [2.0, -1.0, 0.5, 0.0, 0.0, 4.0];
        let out = scale_joint_speed(&v, &env());
        let k = out[5] / v[5];
        for j in 0..6 {
            assert!((out[j] - k * v[j]).abs() < 1e-15);
            assert!(out[j].abs() <= env().speed_cap(j));
        }
        assert_eq!(out[5], env().speed_cap(5));
    }

    #[test]
    fn payload_cap_is_inclusive() {
        assert!(check_payload(0.5, &env()).unwrap().accepted);
        assert!(check_payload(1.0, &env()).unwrap().accepted);
        let v = check_payload(1.2, &env()).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.reasons, vec![SafetyReason::Payload]);
        assert_eq!(check_payload(-0.1, &env()), Err(SafetyError::NegativeMass(-0.1)));
    }

    fn cmd(v: [f64; 3]) -> JogCommand {
        JogCommand {
            linear_velocity: v,
            gripper_action: None,
            stamp_ms: 0,
        }
    }

    #[test]
    fn overweight_payload_stops() {
        let resolver = |_: &[f64; 3], _: &[f64; 6]| [0.1; 6];
        let q = q_with_shoulder((-90f64).to_radians());
        let m = validate_jog(&cmd([0.0, 0.0, 0.05]), &q, 2.0, &env(), &resolver, 0.01).unwrap();
        assert!(m.is_stop());
        assert_eq!(m.verdict.reasons, vec![SafetyReason::Payload]);
        assert_eq!(m.qdot, [0.0; 6]);
        assert_eq!(m.next_q, q);
    }

    #[test]
    fn joint_limit_pins_and_zeroes() {
        // drives shoulder lift toward -190 deg: one Euler step from -182.9 deg overshoots
        let resolver = |_: &[f64; 3], _: &[f64; 6]| {
            let mut v = [0.0; 6];
            v[SHOULDER_LIFT] = -0.6;
            v
        };
        let q = q_with_shoulder((-182.9f64).to_radians());
        let dt = 0.01;
        let predicted = q[SHOULDER_LIFT] + -0.6 * dt;
        assert!(predicted.to_degrees() < -183.0);
        let m = validate_jog(&cmd([0.0, 0.0, -0.05]), &q, 0.0, &env(), &resolver, dt).unwrap();
        assert!(m.verdict.accepted && m.verdict.clamped);
        assert_eq!(m.verdict.reasons, vec![SafetyReason::JointLimit]);
        assert_eq!(m.qdot[SHOULDER_LIFT], 0.0);
        assert!((m.next_q[SHOULDER_LIFT].to_degrees() + 183.0).abs() < 1e-9);
    }

    #[test]
    fn benign_jog_passes_through() {
        let resolver = |_: &[f64; 3], _: &[f64; 6]| [0.01, -0.02, 0.03, 0.0, 0.01, 0.0];
        let q = q_with_shoulder((-90f64).to_radians());
        let m = validate_jog(&cmd([0.05, 0.0, 0.0]), &q, 0.5, &env(), &resolver, 0.01).unwrap();
        assert_eq!(m.verdict, SafetyVerdict::ok());
        assert_eq!(m.qdot, [0.01, -0.02, 0.03, 0.0, 0.01, 0.0]);
        for j in 0..6 {
            assert_eq!(m.next_q[j], q[j] + m.qdot[j] * 0.01);
        }
    }

    #[test]
    fn speed_limit_flagged() {
        let resolver = |_: &[f64; 3], _: &[f64; 6]| [3.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let q = q_with_shoulder((-90f64).to_radians());
        let m = validate_jog(&cmd([0.05, 0.0, 0.0]), &q, 0.0, &env(), &resolver, 0.01).unwrap();
        assert!(m.verdict.accepted);
        assert_eq!(m.verdict.reasons, vec![SafetyReason::SpeedLimit]);
        assert!(m.qdot[0] <= env().speed_cap(0));
    }

    #[test]
    fn rejects_non_finite() {
        let resolver = |_: &[f64; 3], _: &[f64; 6]| [0.0; 6];
        let e = validate_jog(&cmd([f64::NAN, 0.0, 0.0]), &[0.0; 6], 0.0, &env(), &resolver, 0.01);
        assert_eq!(e, Err(SafetyError::NonFinite));
    }

    #[test]
    fn envelope_validation() {
        assert!(env().validate().is_ok());
        let mut bad = env();
        bad.joint_limits_deg[2] = (10.0, -10.0);
        assert!(bad.validate().is_err());
    }
}
