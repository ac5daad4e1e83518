//! Seeded generators for labeled gesture clips and planted track catalogs.
//!
//! Hands are built from a 21-landmark template in a local frame (palm length
//! 1, fingers along +y, palm in the z = 0 plane), articulated per gesture and
//! projected into image coordinates with a per-clip hand size, camera
//! distance, position and in-plane roll. Gaussian jitter is added last.

use std::f64::consts::TAU;

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{self, LandmarkFrame, NUM_LANDMARKS};
use crate::gesture::GestureClass;
use crate::musicspace::{Emotion, TrackProfile, GENRE_COUNT, STYLE_COUNT};
use crate::training::LabeledClip;

/// Palm length of a unit-size hand, in image-relative units.
const BASE_PALM: f64 = 0.18;
/// Index fingertip circle radius, in palm lengths.
const CIRCLE_RADIUS: f64 = 0.45;
/// Full index fingertip orbits per circle clip.
const CIRCLE_TURNS: f64 = 2.0;
/// Fraction of the thumb-index gap closed at the bottom of a pinch.
const PINCH_DEPTH: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub frames_per_clip: usize,
    pub fps: f64,
    /// Per-coordinate Gaussian jitter, image-relative units.
    pub jitter: f64,
    pub hand_scale: (f64, f64),
    /// Half-width of the uniform wrist start offset around the image anchor.
    pub offset_range: f64,
    /// Projected-size factor from camera distance.
    pub depth_scale: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            frames_per_clip: 45,
            fps: 30.0,
            jitter: 0.003,
            hand_scale: (0.7, 1.3),
            offset_range: 0.12,
            depth_scale: (0.8, 1.25),
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi;
        if !(self.jitter >= 0.0) {
            return Err(Error::Config(format!("jitter {} must be >= 0", self.jitter)));
        }
        if self.frames_per_clip < 2 {
            return Err(Error::Config("clips need at least 2 frames".into()));
        }
        if !(self.fps > 0.0) || !(self.offset_range >= 0.0) {
            return Err(Error::Config("fps must be positive and offset range >= 0".into()));
        }
        if !range_ok(self.hand_scale) || !range_ok(self.depth_scale) {
            return Err(Error::Config("scale ranges must be positive and nonempty".into()));
        }
        Ok(())
    }
}

type Local = [Vector3<f64>; NUM_LANDMARKS];

/// Finger chains as landmark indices, base joint first.
const FINGERS: [[usize; 4]; 5] = [[1, 2, 3, 4], [5, 6, 7, 8], [9, 10, 11, 12], [13, 14, 15, 16], [17, 18, 19, 20]];

fn template() -> Local {
    let raw: [[f64; 2]; NUM_LANDMARKS] = [
        [0.0, 0.0],
        [0.26, 0.16],
        [0.46, 0.36],
        [0.60, 0.56],
        [0.72, 0.74],
        [0.30, 0.95],
        [0.34, 1.35],
        [0.36, 1.60],
        [0.38, 1.82],
        [0.04, 1.0],
        [0.04, 1.45],
        [0.04, 1.73],
        [0.04, 1.96],
        [-0.20, 0.95],
        [-0.24, 1.34],
        [-0.26, 1.59],
        [-0.28, 1.79],
        [-0.40, 0.84],
        [-0.47, 1.12],
        [-0.51, 1.31],
        [-0.54, 1.48],
    ];
    let mut pts = [Vector3::zeros(); NUM_LANDMARKS];
    for (p, r) in pts.iter_mut().zip(raw.iter()) {
        *p = Vector3::new(r[0], r[1], 0.0);
    }
    pts
}

/// Bend a finger chain toward the palm side (-z). `curl` in [0, 1].
fn curl_finger(pts: &mut Local, chain: [usize; 4], curl: f64) {
    const MAX_BEND: [f64; 3] = [1.2, 1.5, 1.0];
    let base = pts[chain[0]];
    let mut anchor = base;
    let mut angle = 0.0;
    let rest = template();
    for seg in 0..3 {
        let from = rest[chain[seg]];
        let to = rest[chain[seg + 1]];
        let length = (to - from).norm();
        let dir = (to - from).normalize();
        angle += curl * MAX_BEND[seg];
        let bent = dir * angle.cos() - Vector3::z() * angle.sin();
        anchor += bent * length;
        pts[chain[seg + 1]] = anchor;
    }
}

fn posed(curls: [f64; 5]) -> Local {
    let mut pts = template();
    for (chain, c) in FINGERS.iter().zip(curls) {
        curl_finger(&mut pts, *chain, c);
    }
    pts
}

/// Fan the fingers apart in the palm plane, pivoting at each base joint.
/// `spread` of 1 turns the thumb 40 degrees and the pinky 34.
fn spread_fingers(pts: &mut Local, spread: f64) {
    const FAN: [f64; 5] = [0.7, 0.4, 0.0, -0.3, -0.6];
    for (chain, fan) in FINGERS.iter().zip(FAN) {
        let base = pts[chain[0]];
        let (sin, cos) = (spread * fan).sin_cos();
        for &j in &chain[1..] {
            let d = pts[j] - base;
            pts[j] = base + Vector3::new(cos * d.x - sin * d.y, sin * d.x + cos * d.y, d.z);
        }
    }
}

/// Triangle wave in [0, 1] with `cycles` peaks over `tau` in [0, 1].
fn triangle(cycles: f64, tau: f64) -> f64 {
    let x = (cycles * tau).fract();
    1.0 - (2.0 * x - 1.0).abs()
}

/// Per-clip projection from the local hand frame into the image.
#[derive(Debug, Clone, Copy)]
struct Placement {
    wrist: Vector2<f64>,
    scale: f64,
    roll: f64,
}

impl Placement {
    fn sample<R: Rng + ?Sized>(params: &SynthParams, rng: &mut R) -> Self {
        let (hlo, hhi) = params.hand_scale;
        let (dlo, dhi) = params.depth_scale;
        let hand = if hlo < hhi { rng.random_range(hlo..=hhi) } else { hlo };
        let depth = if dlo < dhi { rng.random_range(dlo..=dhi) } else { dlo };
        let r = params.offset_range;
        let mut offset = || if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let wrist = Vector2::new(0.5 + offset(), 0.72 + offset());
        let roll = rng.random_range(-0.4..=0.4);
        Placement { wrist, scale: BASE_PALM * hand * depth, roll }
    }

    /// Image position of a local point. Image y grows downward.
    fn project(&self, p: &Vector3<f64>, scale_factor: f64, shift: Vector2<f64>) -> Vector3<f64> {
        let s = self.scale * scale_factor;
        let (sin, cos) = self.roll.sin_cos();
        let x = p.x;
        let y = -p.y;
        Vector3::new(
            self.wrist.x + shift.x + s * (cos * x - sin * y),
            self.wrist.y + shift.y + s * (sin * x + cos * y),
            s * p.z,
        )
    }

    fn project_all(&self, pts: &Local, scale_factor: f64, shift: Vector2<f64>) -> [Vector3<f64>; NUM_LANDMARKS] {
        let mut out = [Vector3::zeros(); NUM_LANDMARKS];
        for (o, p) in out.iter_mut().zip(pts.iter()) {
            *o = self.project(p, scale_factor, shift);
        }
        out
    }
}

/// Noise-free image landmarks of one frame at clip phase `tau` in [0, 1].
fn clean_frame(class: GestureClass, tau: f64, place: &Placement, phase: f64) -> [Vector3<f64>; NUM_LANDMARKS] {
    match class {
        GestureClass::ContinuousArmOpen | GestureClass::ContinuousArmClose => {
            // Opening: the hand travels away from the body (shrinking on screen)
            // while the fingers uncurl. Closing is the same path reversed.
            let p = if class == GestureClass::ContinuousArmOpen { tau } else { 1.0 - tau };
            let curl = 1.0 - p;
            let mut pts = posed([0.6 * curl, curl, curl, curl, curl]);
            spread_fingers(&mut pts, p);
            let shift = Vector2::new(0.04 * p, -0.06 * p);
            place.project_all(&pts, 1.0 - 0.3 * p, shift)
        }
        GestureClass::CircleClockwise | GestureClass::CircleCounterclockwise => {
            let pts = posed([0.5, 0.0, 0.85, 0.85, 0.85]);
            let mut img = place.project_all(&pts, 1.0, Vector2::zeros());
            let sign = if class == GestureClass::CircleClockwise { -1.0 } else { 1.0 };
            let theta = phase + sign * TAU * CIRCLE_TURNS * tau;
            let radius = CIRCLE_RADIUS * place.scale;
            // The tip orbits its rest position, starting at a random phase.
            let rest_tip = img[geometry::INDEX_TIP];
            let tip = rest_tip + Vector3::new(radius * theta.cos(), radius * theta.sin(), 0.0);
            let moved = tip - rest_tip;
            img[6] += moved * 0.4;
            img[7] += moved * 0.7;
            img[geometry::INDEX_TIP] = tip;
            img
        }
        GestureClass::Pinch | GestureClass::DoublePinch => {
            let cycles = if class == GestureClass::Pinch { 1.0 } else { 2.0 };
            // Constant closing speed, so a double pinch moves twice as fast throughout.
            let closing = PINCH_DEPTH * triangle(cycles, tau);
            let mut pts = posed([0.1, 0.3, 0.2, 0.2, 0.2]);
            let thumb = pts[geometry::THUMB_TIP];
            let index = pts[geometry::INDEX_TIP];
            // A slow pinch brings both tips to meet halfway; a quick double
            // tap is made by the index finger alone onto a still thumb.
            let meet = if class == GestureClass::Pinch { (thumb + index) * 0.5 } else { thumb };
            let dt = (meet - thumb) * closing;
            let di = (meet - index) * closing;
            pts[geometry::THUMB_TIP] += dt;
            pts[3] += dt * 0.6;
            pts[2] += dt * 0.25;
            pts[geometry::INDEX_TIP] += di;
            pts[7] += di * 0.6;
            pts[6] += di * 0.25;
            place.project_all(&pts, 1.0, Vector2::zeros())
        }
    }
}

/// One labeled clip of `params.frames_per_clip` frames starting at `t0`.
pub fn synth_gesture<R: Rng + ?Sized>(
    class: GestureClass,
    params: &SynthParams,
    t0: f64,
    rng: &mut R,
) -> Result<Vec<LandmarkFrame>> {
    params.validate()?;
    let place = Placement::sample(params, rng);
    let phase = rng.random_range(0.0..TAU);
    let noise = Normal::new(0.0, params.jitter).map_err(|e| Error::Config(e.to_string()))?;
    let last = (params.frames_per_clip - 1) as f64;
    (0..params.frames_per_clip)
        .map(|i| {
            let tau = i as f64 / last;
            let clean = clean_frame(class, tau, &place, phase);
            let mut points = [[0.0; 3]; NUM_LANDMARKS];
            for (out, p) in points.iter_mut().zip(clean.iter()) {
                for axis in 0..3 {
                    let jitter = if params.jitter > 0.0 { noise.sample(rng) } else { 0.0 };
                    out[axis] = p[axis] + jitter;
                }
            }
            LandmarkFrame::new(t0 + i as f64 / params.fps, points, "synth")
        })
        .collect()
}

/// `clips_per_class` clips for each requested class, seeded by `params.seed`.
/// Clip ids are `clip-NNNNN` in generation order (classes interleaved).
pub fn synth_dataset(
    classes: &[GestureClass],
    clips_per_class: usize,
    params: &SynthParams,
) -> Result<Vec<LabeledClip>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
    let mut clips = Vec::with_capacity(classes.len() * clips_per_class);
    for round in 0..clips_per_class {
        for (k, class) in classes.iter().enumerate() {
            let id = round * classes.len() + k;
            clips.push(LabeledClip {
                clip_id: format!("clip-{id:05}"),
                label: *class,
                frames: synth_gesture(*class, params, 0.0, &mut rng)?,
            });
        }
    }
    Ok(clips)
}

/// A continuous stream performing `classes` back to back.
pub fn synth_stream<R: Rng + ?Sized>(
    classes: &[GestureClass],
    params: &SynthParams,
    rng: &mut R,
) -> Result<Vec<LandmarkFrame>> {
    let mut frames = Vec::new();
    let mut t = 0.0;
    for class in classes {
        let clip = synth_gesture(*class, params, t, rng)?;
        t = clip.last().map_or(t, |f| f.timestamp) + 1.0 / params.fps;
        frames.extend(clip);
    }
    Ok(frames)
}

/// A catalog with one planted 2D cluster per emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCatalog {
    pub tracks: Vec<TrackProfile>,
    /// Planted 2D coordinates per track, in the same order as `tracks`.
    pub embedding: Vec<(String, [f64; 2])>,
    /// Distribution mean of each emotion's planted cluster, raw coordinates.
    pub planted_means: [[f64; 2]; Emotion::COUNT],
}

const CLUSTER_SPREAD: f64 = 0.12;

pub fn synth_catalog<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PlantedCatalog> {
    if n < Emotion::COUNT {
        return Err(Error::TooFew { needed: Emotion::COUNT, got: n });
    }
    let mut planted_means = [[0.0; 2]; Emotion::COUNT];
    for (e, m) in planted_means.iter_mut().enumerate() {
        let a = TAU * e as f64 / Emotion::COUNT as f64;
        *m = [a.cos(), a.sin()];
    }
    let spread = Normal::new(0.0, CLUSTER_SPREAD).expect("valid spread");
    let mut tracks = Vec::with_capacity(n);
    let mut embedding = Vec::with_capacity(n);
    for i in 0..n {
        let dominant = i % Emotion::COUNT;
        let mut emotions = [0.0; Emotion::COUNT];
        for (e, v) in emotions.iter_mut().enumerate() {
            *v = if e == dominant { rng.random_range(0.6..=1.0) } else { rng.random_range(0.0..=0.4) };
        }
        let genres: Vec<f64> = (0..GENRE_COUNT).map(|_| rng.random_range(0.0..=1.0)).collect();
        let styles: Vec<f64> = (0..STYLE_COUNT).map(|_| rng.random_range(0.0..=1.0)).collect();
        let track_id = format!("trk-{i:06}");
        let mean = planted_means[dominant];
        embedding.push((track_id.clone(), [mean[0] + spread.sample(rng), mean[1] + spread.sample(rng)]));
        tracks.push(TrackProfile::new(track_id, format!("Synthetic track {i}"), emotions, &genres, &styles)?);
    }
    Ok(PlantedCatalog { tracks, embedding, planted_means })
}
