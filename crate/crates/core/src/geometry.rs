//! Landmark frames and their canonicalization into the palm's own frame.
//!
//! A [`LandmarkFrame`] is what a hand tracker emits: 21 ordered 3D points.
//! Canonicalization removes translation (wrist to origin), scale (divide by
//! the wrist to middle-MCP distance) and rotation (express every point in the
//! palm basis), so that hand position, hand size and camera distance drop out
//! before anything is embedded.

use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_LANDMARKS: usize = 21;
pub const POSE_DIM: usize = NUM_LANDMARKS * 3;

pub const WRIST: usize = 0;
pub const THUMB_TIP: usize = 4;
pub const INDEX_MCP: usize = 5;
pub const INDEX_TIP: usize = 8;
pub const MIDDLE_MCP: usize = 9;
pub const PINKY_MCP: usize = 17;

/// Window lengths the models are built for.
pub const SUPPORTED_WINDOWS: [usize; 3] = [1, 2, 8];

const MIN_PALM_AREA: f64 = 1e-9;
const MIN_PALM_SCALE: f64 = 1e-6;

/// One timestamped set of 21 hand landmarks.
///
/// On the wire this is a single JSON object with the fields `t`, `hand`
/// and `source`; parsing validates the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrame")]
pub struct LandmarkFrame {
    #[serde(rename = "t")]
    pub timestamp: f64,
    #[serde(rename = "hand")]
    pub points: [[f64; 3]; NUM_LANDMARKS],
    #[serde(rename = "source")]
    pub source_id: String,
}

#[derive(Deserialize)]
struct RawFrame {
    t: f64,
    hand: Vec<Vec<f64>>,
    source: String,
}

impl TryFrom<RawFrame> for LandmarkFrame {
    type Error = Error;

    fn try_from(raw: RawFrame) -> Result<Self> {
        if raw.hand.len() != NUM_LANDMARKS {
            return Err(Error::InvalidFrame(format!("expected {NUM_LANDMARKS} landmarks, got {}", raw.hand.len())));
        }
        let mut points = [[0.0; 3]; NUM_LANDMARKS];
        for (i, p) in raw.hand.iter().enumerate() {
            if p.len() != 3 {
                return Err(Error::InvalidFrame(format!("landmark {i} has {} components", p.len())));
            }
            points[i] = [p[0], p[1], p[2]];
        }
        LandmarkFrame::new(raw.t, points, raw.source)
    }
}

impl LandmarkFrame {
    pub fn new(timestamp: f64, points: [[f64; 3]; NUM_LANDMARKS], source_id: impl Into<String>) -> Result<Self> {
        let frame = LandmarkFrame { timestamp, points, source_id: source_id.into() };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timestamp.is_finite() || self.timestamp < 0.0 {
            return Err(Error::InvalidFrame(format!("bad timestamp {}", self.timestamp)));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidFrame(format!("landmark {i} is not finite")));
            }
        }
        Ok(())
    }

    pub fn point(&self, index: usize) -> Vector3<f64> {
        Vector3::from(self.points[index])
    }

    /// Re-express a canonical pose as a frame (used for idempotence checks and
    /// latency measurements on already-canonical data).
    pub fn from_pose(timestamp: f64, pose: &CanonicalPose, source_id: impl Into<String>) -> Self {
        let mut points = [[0.0; 3]; NUM_LANDMARKS];
        for (i, p) in points.iter_mut().enumerate() {
            p.copy_from_slice(&pose.values[3 * i..3 * i + 3]);
        }
        LandmarkFrame { timestamp, points, source_id: source_id.into() }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("landmark frames always serialize")
    }
}

impl FromStr for LandmarkFrame {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }
}

/// Palm-anchored coordinate frame of a hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PalmFrame {
    pub origin: Vector3<f64>,
    /// Rotation from palm coordinates to world coordinates, `w >= 0`.
    pub rotation: UnitQuaternion<f64>,
    pub palm_scale: f64,
}

impl PalmFrame {
    /// Quaternion components as `(w, x, y, z)`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }
}

/// 63 values: 21 landmarks in palm coordinates, flattened in landmark order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalPose {
    pub values: [f64; POSE_DIM],
}

impl CanonicalPose {
    pub fn landmark(&self, index: usize) -> Vector3<f64> {
        Vector3::new(self.values[3 * index], self.values[3 * index + 1], self.values[3 * index + 2])
    }

    pub fn linf_distance(&self, other: &CanonicalPose) -> f64 {
        self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Build the palm frame from the wrist, index MCP and pinky MCP.
pub fn palm_frame(frame: &LandmarkFrame) -> Result<PalmFrame> {
    frame.validate()?;
    let wrist = frame.point(WRIST);
    let to_index = frame.point(INDEX_MCP) - wrist;
    let to_pinky = frame.point(PINKY_MCP) - wrist;

    let cross = to_index.cross(&to_pinky);
    let area = 0.5 * cross.norm();
    if !(area > MIN_PALM_AREA) {
        return Err(Error::DegenerateHand(format!("wrist, index MCP and pinky MCP are collinear (area {area:e})")));
    }
    let palm_scale = (frame.point(MIDDLE_MCP) - wrist).norm();
    if !(palm_scale >= MIN_PALM_SCALE) {
        return Err(Error::DegenerateHand(format!("palm scale {palm_scale:e} too small")));
    }

    let u = to_index.normalize();
    let n = u.cross(&to_pinky).normalize();
    let v = n.cross(&u);
    let basis = Matrix3::from_columns(&[u, v, n]);
    let mut rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(basis));
    if rotation.w < 0.0 {
        rotation = UnitQuaternion::new_unchecked(-rotation.into_inner());
    }
    Ok(PalmFrame { origin: wrist, rotation, palm_scale })
}

/// Map every landmark to `R^-1 (p - wrist) / palm_scale`.
pub fn canonicalize(frame: &LandmarkFrame) -> Result<CanonicalPose> {
    let palm = palm_frame(frame)?;
    let inv_scale = 1.0 / palm.palm_scale;
    let mut values = [0.0; POSE_DIM];
    for (i, p) in frame.points.iter().enumerate() {
        let local = palm.rotation.inverse_transform_vector(&((Vector3::from(*p) - palm.origin) * inv_scale));
        values[3 * i..3 * i + 3].copy_from_slice(local.as_slice());
    }
    // The wrist maps to the origin by construction; pin it against rounding.
    values[..3].fill(0.0);
    Ok(CanonicalPose { values })
}

/// How a window of poses is presented to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    /// One `63 * N` vector, oldest frame first, encoded to a single latent.
    #[default]
    Concat,
    /// N separate 63-vectors, each encoded to its own latent point.
    PointSet,
}

impl FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(WindowMode::Concat),
            "point-set" | "pointset" => Ok(WindowMode::PointSet),
            other => Err(Error::Config(format!("unknown window mode '{other}'"))),
        }
    }
}

/// N consecutive canonical poses, flattened oldest first. In point-set mode
/// the same storage is read as N chunks of 63.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowVector {
    pub mode: WindowMode,
    pub frames: usize,
    pub values: Vec<f64>,
}

impl WindowVector {
    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(POSE_DIM)
    }
}

pub fn check_window_length(frames: usize) -> Result<()> {
    if SUPPORTED_WINDOWS.contains(&frames) {
        Ok(())
    } else {
        Err(Error::Config(format!("window length {frames} unsupported, expected one of {SUPPORTED_WINDOWS:?}")))
    }
}

pub fn window_vector(poses: &[CanonicalPose], frames: usize, mode: WindowMode) -> Result<WindowVector> {
    check_window_length(frames)?;
    if poses.len() != frames {
        return Err(Error::WrongWindowLength { expected: frames, got: poses.len() });
    }
    let mut values = Vec::with_capacity(POSE_DIM * frames);
    for pose in poses {
        values.extend_from_slice(&pose.values);
    }
    Ok(WindowVector { mode, frames, values })
}

/// Read a newline-delimited landmark stream. Blank lines are ignored.
pub fn read_stream<R: BufRead>(reader: R) -> Result<Vec<LandmarkFrame>> {
    let mut frames = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { row: i + 1, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let frame = line.parse::<LandmarkFrame>().map_err(|e| Error::Parse { row: i + 1, msg: e.to_string() })?;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn write_stream<W: Write>(mut writer: W, frames: &[LandmarkFrame]) -> std::io::Result<()> {
    for frame in frames {
        writeln!(writer, "{}", frame.to_json_line())?;
    }
    Ok(())
}
