use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gesture::{GestureLabel, GESTURE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GripperAction {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GripperState {
    #[default]
    Open,
    Closed,
}

impl From<GripperAction> for GripperState {
    fn from(a: GripperAction) -> Self {
        match a {
            GripperAction::Open => GripperState::Open,
            GripperAction::Close => GripperState::Closed,
        }
    }
}

/// What a gesture asks the arm to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CommandIntent {
    /// Move along `axis`; `positive` selects the direction.
    Jog { axis: Axis, positive: bool },
    Gripper(GripperAction),
    #[default]
    None,
}

impl CommandIntent {
    pub const fn jog(axis: Axis, positive: bool) -> Self {
        CommandIntent::Jog { axis, positive }
    }

    pub fn is_jog(&self) -> bool {
        matches!(self, CommandIntent::Jog { .. })
    }
}

impl fmt::Display for CommandIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandIntent::Jog { axis, positive } => {
                let a = match axis {
                    Axis::X => 'x',
                    Axis::Y => 'y',
                    Axis::Z => 'z',
                };
                write!(f, "jog {a} {}", if *positive { '+' } else { '-' })
            }
            CommandIntent::Gripper(GripperAction::Open) => f.write_str("gripper open"),
            CommandIntent::Gripper(GripperAction::Close) => f.write_str("gripper close"),
            CommandIntent::None => f.write_str("none"),
        }
    }
}

impl FromStr for CommandIntent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let words: Vec<&str> = s.split_whitespace().collect();
        match words.as_slice() {
            ["none"] => Ok(CommandIntent::None),
            ["gripper", "open"] => Ok(CommandIntent::Gripper(GripperAction::Open)),
            ["gripper", "close"] => Ok(CommandIntent::Gripper(GripperAction::Close)),
            ["jog", axis, dir] => {
                let axis = match *axis {
                    "x" => Axis::X,
                    "y" => Axis::Y,
                    "z" => Axis::Z,
                    other => return Err(format!("unknown axis {other:?}")),
                };
                let positive = match *dir {
                    "+" => true,
                    "-" => false,
                    other => return Err(format!("direction must be + or -, got {other:?}")),
                };
                Ok(CommandIntent::jog(axis, positive))
            }
            _ => Err(format!("unrecognized intent {s:?}")),
        }
    }
}

/// Total table from the 8 gesture ids to intents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GestureMap(pub [CommandIntent; GESTURE_COUNT]);

impl GestureMap {
    pub fn lookup(&self, label: GestureLabel) -> CommandIntent {
        self.0[label.id()]
    }
}

impl Default for GestureMap {
    fn default() -> Self {
        default_gesture_map()
    }
}

impl fmt::Display for GestureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for label in GestureLabel::all() {
            writeln!(f, "{} = {}  # {}", label.id(), self.lookup(label), label.name())?;
        }
        Ok(())
    }
}

pub fn default_gesture_map() -> GestureMap {
    use CommandIntent as C;
    GestureMap([
        C::Gripper(GripperAction::Close), // Fist
        C::Gripper(GripperAction::Open),  // OpenPalm
        C::jog(Axis::Z, true),            // PointUp
        C::jog(Axis::Z, false),           // PointDown
        C::jog(Axis::Y, false),           // PointLeft
        C::jog(Axis::Y, true),            // PointRight
        C::jog(Axis::X, false),           // Peace
        C::jog(Axis::X, true),            // ThumbUp
    ])
}

#[derive(Debug, Error, PartialEq)]
#[error("gesture map line {line}: {msg}")]
pub struct GestureMapError {
    pub line: usize,
    pub msg: String,
}

/// Parses `label_id = intent` lines over the default table; `#` starts a comment.
pub fn parse_gesture_map(text: &str) -> Result<GestureMap, GestureMapError> {
    let mut map = default_gesture_map();
    let mut seen = [false; GESTURE_COUNT];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| GestureMapError { line, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err("expected `label_id = intent`".into()))?;
        let id: usize = key
            .trim()
            .parse()
            .map_err(|_| err(format!("bad label id {:?}", key.trim())))?;
        let label = GestureLabel::new(id).ok_or_else(|| err(format!("label id {id} out of range")))?;
        if std::mem::replace(&mut seen[id], true) {
            return Err(err(format!("label {id} mapped twice")));
        }
        map.0[label.id()] = value.trim().parse().map_err(err)?;
    }
    Ok(map)
}
