use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of gesture classes the system is built around.
pub const GESTURE_COUNT: usize = 8;

const NAMES: [&str; GESTURE_COUNT] = [
    "Fist",
    "OpenPalm",
    "PointUp",
    "PointDown",
    "PointLeft",
    "PointRight",
    "Peace",
    "ThumbUp",
];

/// A gesture class id in `[0, 8)`. Id 0 is `Fist` and id 7 is `ThumbUp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct GestureLabel(u8);

impl GestureLabel {
    pub const FIST: Self = Self(0);
    pub const OPEN_PALM: Self = Self(1);
    pub const POINT_UP: Self = Self(2);
    pub const POINT_DOWN: Self = Self(3);
    pub const POINT_LEFT: Self = Self(4);
    pub const POINT_RIGHT: Self = Self(5);
    pub const PEACE: Self = Self(6);
    pub const THUMB_UP: Self = Self(7);

    pub fn new(id: usize) -> Option<Self> {
        (id < GESTURE_COUNT).then_some(Self(id as u8))
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        NAMES[self.0 as usize]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
            .map(|i| Self(i as u8))
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..GESTURE_COUNT as u8).map(Self)
    }
}

impl TryFrom<u8> for GestureLabel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v as usize).ok_or_else(|| format!("gesture label {v} out of range"))
    }
}

impl From<GestureLabel> for u8 {
    fn from(l: GestureLabel) -> u8 {
        l.0
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifier output for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub label: GestureLabel,
    pub confidence: f64,
}
