//! Newline-delimited JSON protocol spoken over the service socket.
//!
//! Both sides open with `{"type":"hello","proto":1}`. Clients then send
//! `frame` or `gesture_hold` lines; the server streams `gesture`, `jog`,
//! `state` and `safety` lines and answers bad input with `error`.

use std::fmt;

use palmjog_core::control::{GripperAction, GripperState, SafetyReason};
use palmjog_core::{GestureLabel, Handedness, Landmark, LandmarkFrame};
use serde::{Deserialize, Serialize};

use crate::{Envelope, Payload};

pub const PROTO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Hello {
        proto: u32,
    },
    Frame {
        t: u64,
        #[serde(default)]
        hand: Handedness,
        pts: Vec<[f64; 2]>,
    },
    GestureHold {
        label: u8,
        t: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    Hello {
        proto: u32,
    },
    Gesture {
        t: u64,
        label: u8,
        name: String,
        conf: f64,
    },
    Jog {
        t: u64,
        v: [f64; 3],
        grip: Option<GripperAction>,
    },
    State {
        t: u64,
        q: [f64; 6],
        ee: [f64; 3],
        #[serde(rename = "R")]
        rotation: [f64; 9],
        grip: GripperState,
    },
    Safety {
        t: u64,
        reasons: Vec<SafetyReason>,
        clamped: bool,
    },
    Error {
        code: ErrorCode,
        msg: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadJson,
    BadFrame,
    BadLabel,
    UnknownType,
    UnexpectedType,
    HelloRequired,
    ProtoMismatch,
    LineTooLong,
}

impl ErrorCode {
    /// Whether the server closes the connection after replying.
    pub fn is_fatal(self) -> bool {
        matches!(self, ErrorCode::HelloRequired | ErrorCode::ProtoMismatch | ErrorCode::LineTooLong)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{code:?}: {msg}")]
pub struct WireError {
    pub code: ErrorCode,
    pub msg: String,
}

impl WireError {
    pub fn new(code: ErrorCode, msg: impl fmt::Display) -> Self {
        Self {
            code,
            msg: msg.to_string(),
        }
    }

    pub fn to_outbound(&self) -> Outbound {
        Outbound::Error {
            code: self.code,
            msg: self.msg.clone(),
        }
    }
}

const OUTBOUND_TYPES: [&str; 5] = ["gesture", "jog", "state", "safety", "error"];

/// Parses one client line, mapping every failure to an error code.
pub fn parse_inbound(line: &str) -> Result<Inbound, WireError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| WireError::new(ErrorCode::BadJson, e))?;
    let kind = value
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| WireError::new(ErrorCode::BadJson, "missing string field \"type\""))?
        .to_string();
    let code = match kind.as_str() {
        "hello" => ErrorCode::BadJson,
        "frame" => ErrorCode::BadFrame,
        "gesture_hold" => ErrorCode::BadLabel,
        k if OUTBOUND_TYPES.contains(&k) => {
            return Err(WireError::new(ErrorCode::UnexpectedType, format!("\"{k}\" is server-to-client only")))
        }
        k => return Err(WireError::new(ErrorCode::UnknownType, format!("unknown message type \"{k}\""))),
    };
    let msg: Inbound = serde_json::from_value(value).map_err(|e| WireError::new(code, e))?;
    match &msg {
        Inbound::Frame { t, hand, pts } => {
            frame_from_wire(*t, *hand, pts)?;
        }
        Inbound::GestureHold { label, .. } => {
            GestureLabel::new(*label as usize)
                .ok_or_else(|| WireError::new(ErrorCode::BadLabel, format!("label {label} out of range")))?;
        }
        Inbound::Hello { .. } => {}
    }
    Ok(msg)
}

/// Builds a validated [`LandmarkFrame`] from wire fields.
pub fn frame_from_wire(t: u64, hand: Handedness, pts: &[[f64; 2]]) -> Result<LandmarkFrame, WireError> {
    let points = pts.iter().map(|[x, y]| Landmark::new(*x, *y)).collect();
    let mut frame = LandmarkFrame::new(t, points).map_err(|e| WireError::new(ErrorCode::BadFrame, e))?;
    frame.handedness = hand;
    Ok(frame)
}

/// Wire form of a frame, as a client would send it.
pub fn frame_to_wire(frame: &LandmarkFrame) -> Inbound {
    Inbound::Frame {
        t: frame.timestamp_ms,
        hand: frame.handedness,
        pts: frame.points.iter().map(|p| [p.x, p.y]).collect(),
    }
}

/// Checks the first client line.
pub fn check_hello(line: &str) -> Result<(), WireError> {
    match parse_inbound(line) {
        Ok(Inbound::Hello { proto: PROTO_VERSION }) => Ok(()),
        Ok(Inbound::Hello { proto }) => Err(WireError::new(
            ErrorCode::ProtoMismatch,
            format!("server speaks proto {PROTO_VERSION}, client sent {proto}"),
        )),
        _ => Err(WireError::new(ErrorCode::HelloRequired, "first line must be a hello")),
    }
}

impl Outbound {
    pub fn hello() -> Self {
        Outbound::Hello { proto: PROTO_VERSION }
    }

    /// Client-facing form of a bus message; landmarks are not forwarded.
    pub fn from_envelope(env: &Envelope) -> Option<Self> {
        let t = env.stamp_ms;
        Some(match env.payload.as_ref() {
            Payload::Landmarks(_) => return None,
            Payload::Gesture(ev) => Outbound::Gesture {
                t,
                label: ev.label.id() as u8,
                name: ev.label.name().to_string(),
                conf: ev.confidence,
            },
            Payload::Jog(cmd) => Outbound::Jog {
                t,
                v: cmd.linear_velocity,
                grip: cmd.gripper_action,
            },
            Payload::State(s) => Outbound::State {
                t,
                q: s.q,
                ee: s.ee,
                rotation: s.rotation,
                grip: s.gripper,
            },
            Payload::Safety(s) => Outbound::Safety {
                t,
                reasons: s.reasons.clone(),
                clamped: s.clamped,
            },
        })
    }
}

/// One JSON object per line, without the trailing newline.
pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("wire messages always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(n: usize) -> String {
        let p: Vec<String> = (0..n).map(|i| format!("[{},0.5]", i as f64 / 40.0)).collect();
        format!("[{}]", p.join(","))
    }

    #[test]
    fn hello_is_exact() {
        assert_eq!(encode(&Outbound::hello()), r#"{"type":"hello","proto":1}"#);
        assert!(check_hello(r#"{"type":"hello","proto":1}"#).is_ok());
        assert_eq!(check_hello(r#"{"type":"hello","proto":2}"#).unwrap_err().code, ErrorCode::ProtoMismatch);
        assert_eq!(
            check_hello(&format!(r#"{{"type":"frame","t":0,"pts":{}}}"#, pts(21))).unwrap_err().code,
            ErrorCode::HelloRequired
        );
    }

    #[test]
    fn frame_parses() {
        let line = format!(r#"{{"type":"frame","t":12,"hand":"left","pts":{}}}"#, pts(21));
        match parse_inbound(&line).unwrap() {
            Inbound::Frame { t, hand, pts } => {
                assert_eq!((t, hand, pts.len()), (12, Handedness::Left, 21));
            }
            other => panic!("{other:?}"),
        }
        // hand is optional
        let line = format!(r#"{{"type":"frame","t":12,"pts":{}}}"#, pts(21));
        assert!(parse_inbound(&line).is_ok());
    }

    #[test]
    fn short_frame_is_bad_frame() {
        let line = format!(r#"{{"type":"frame","t":0,"hand":"right","pts":{}}}"#, pts(20));
        assert_eq!(parse_inbound(&line).unwrap_err().code, ErrorCode::BadFrame);
        let line = r#"{"type":"frame","t":0,"pts":"nope"}"#;
        assert_eq!(parse_inbound(line).unwrap_err().code, ErrorCode::BadFrame);
    }

    #[test]
    fn error_codes() {
        let code = |l: &str| parse_inbound(l).unwrap_err().code;
        assert_eq!(code("not json"), ErrorCode::BadJson);
        assert_eq!(code(r#"{"t":1}"#), ErrorCode::BadJson);
        assert_eq!(code(r#"{"type":"teleport"}"#), ErrorCode::UnknownType);
        assert_eq!(code(r#"{"type":"state","t":0}"#), ErrorCode::UnexpectedType);
        assert_eq!(code(r#"{"type":"gesture_hold","label":8,"t":0}"#), ErrorCode::BadLabel);
        assert_eq!(code(r#"{"type":"gesture_hold","label":-1,"t":0}"#), ErrorCode::BadLabel);
        assert!(matches!(
            parse_inbound(r#"{"type":"gesture_hold","label":2,"t":40}"#).unwrap(),
            Inbound::GestureHold { label: 2, t: 40 }
        ));
    }

    #[test]
    fn outbound_shapes() {
        let jog = Outbound::Jog { t: 5, v: [0.0, 0.0, 0.05], grip: None };
        assert_eq!(encode(&jog), r#"{"type":"jog","t":5,"v":[0.0,0.0,0.05],"grip":null}"#);
        let jog = Outbound::Jog { t: 5, v: [0.0; 3], grip: Some(GripperAction::Close) };
        assert!(encode(&jog).ends_with(r#""grip":"close"}"#));
        let st = Outbound::State {
            t: 1,
            q: [0.0; 6],
            ee: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            grip: GripperState::Closed,
        };
        let s = encode(&st);
        assert!(s.contains(r#""R":[1.0,"#) && s.ends_with(r#""grip":"closed"}"#));
        let sf = Outbound::Safety { t: 2, reasons: vec![SafetyReason::JointLimit], clamped: true };
        assert_eq!(encode(&sf), r#"{"type":"safety","t":2,"reasons":["joint_limit"],"clamped":true}"#);
        let e = WireError::new(ErrorCode::BadFrame, "x").to_outbound();
        assert_eq!(encode(&e), r#"{"type":"error","code":"bad_frame","msg":"x"}"#);
        for m in [jog, st, sf, e] {
            assert_eq!(serde_json::from_str::<Outbound>(&encode(&m)).unwrap(), m);
        }
    }
}
