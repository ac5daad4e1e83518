use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The six gesture classes, in the fixed label order used for logits,
/// dataset labels (1-based) and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GestureClass {
    ContinuousArmOpen,
    ContinuousArmClose,
    CircleClockwise,
    CircleCounterclockwise,
    Pinch,
    DoublePinch,
}

impl GestureClass {
    pub const COUNT: usize = 6;

    pub const ALL: [GestureClass; 6] = [
        GestureClass::ContinuousArmOpen,
        GestureClass::ContinuousArmClose,
        GestureClass::CircleClockwise,
        GestureClass::CircleCounterclockwise,
        GestureClass::Pinch,
        GestureClass::DoublePinch,
    ];

    /// Zero-based position in logit order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// One-based label as stored in dataset files.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_label(label: u8) -> Option<Self> {
        (label as usize).checked_sub(1).and_then(Self::from_index)
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::ContinuousArmOpen => "continuous-arm-open",
            GestureClass::ContinuousArmClose => "continuous-arm-close",
            GestureClass::CircleClockwise => "circle-clockwise",
            GestureClass::CircleCounterclockwise => "circle-counterclockwise",
            GestureClass::Pinch => "pinch",
            GestureClass::DoublePinch => "double-pinch",
        }
    }

    /// Discrete gestures fire once after completion; the arm gestures are
    /// continuous poses that only drive the cursor.
    pub fn is_discrete(self) -> bool {
        !matches!(self, GestureClass::ContinuousArmOpen | GestureClass::ContinuousArmClose)
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureClass {
    type Err = Error;

    /// Accepts either the kebab-case name or the 1-based label.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(label) = s.parse::<u8>() {
            return Self::from_label(label).ok_or_else(|| Error::Config(format!("gesture label {label} not in 1..=6")));
        }
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown gesture class '{s}'")))
    }
}
