//! Streaming session state machine.
//!
//! A [`Session`] consumes landmark frames one at a time, keeps the last N
//! canonical poses, and once the window is full runs the model on every
//! frame. Discrete gestures pass through a [`Debouncer`]; in exploring mode
//! each window also moves the music-space cursor.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, CanonicalPose, LandmarkFrame};
use crate::gesture::GestureClass;
use crate::musicspace::{Emotion, MusicSpace};
use crate::nets::JointModel;
use crate::scaling::UnitBounds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Minimum class probability for a window to count toward a trigger.
    pub confidence_threshold: f64,
    /// Consecutive agreeing windows needed to fire.
    pub consecutive_windows: usize,
    /// Minimum time between two triggers, seconds.
    pub cooldown: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { confidence_threshold: 0.8, consecutive_windows: 3, cooldown: 0.5 }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let tau = self.confidence_threshold;
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Config(format!("confidence threshold {tau} must be in (0, 1]")));
        }
        if self.consecutive_windows < 1 {
            return Err(Error::Config("consecutive windows must be at least 1".into()));
        }
        if !(self.cooldown >= 0.0) {
            return Err(Error::Config(format!("cooldown {} must be >= 0", self.cooldown)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Idle,
    Exploring,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Idle => "IDLE",
            Mode::Exploring => "EXPLORING",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InteractionEvent {
    GestureDetected { t: f64, class: GestureClass, confidence: f64 },
    CursorMoved { t: f64, pose_xy: [f64; 2], music_xy: [f64; 2] },
    EmotionHighlighted { t: f64, emotion: Emotion },
    TrackSelected { t: f64, track_id: String },
    ModeChanged { t: f64, mode: Mode },
}

impl InteractionEvent {
    pub fn timestamp(&self) -> f64 {
        match self {
            InteractionEvent::GestureDetected { t, .. }
            | InteractionEvent::CursorMoved { t, .. }
            | InteractionEvent::EmotionHighlighted { t, .. }
            | InteractionEvent::TrackSelected { t, .. }
            | InteractionEvent::ModeChanged { t, .. } => *t,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}

pub fn write_events<W: Write>(mut writer: W, events: &[InteractionEvent]) -> std::io::Result<()> {
    for e in events {
        writer.write_all(e.to_json_line().as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<InteractionEvent>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { row, msg: e.to_string() })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Streak {
    class: GestureClass,
    count: usize,
    /// Set once the streak has produced its trigger; a streak fires at most once.
    fired: bool,
}

/// Turns per-window class probabilities into discrete triggers.
///
/// A trigger fires when one discrete class is the argmax with probability
/// at least the threshold for `k` consecutive windows and the cooldown has
/// elapsed since the previous trigger. A window that changes the argmax or
/// drops below the threshold ends the streak. Each streak fires at most
/// once, so a held gesture does not repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct Debouncer {
    config: EngineConfig,
    streak: Option<Streak>,
    last_trigger: Option<f64>,
}

impl Debouncer {
    pub fn new(config: EngineConfig) -> Self {
        Debouncer { config, streak: None, last_trigger: None }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: EngineConfig) {
        self.config = config;
        self.streak = None;
    }

    pub fn last_trigger(&self) -> Option<f64> {
        self.last_trigger
    }

    /// Current agreement count for the argmax class.
    pub fn streak(&self) -> Option<(GestureClass, usize)> {
        self.streak.map(|s| (s.class, s.count))
    }

    pub fn clear(&mut self) {
        self.streak = None;
        self.last_trigger = None;
    }

    /// Feed one window; returns the class and confidence when it triggers.
    pub fn observe(&mut self, t: f64, probs: &[f64; GestureClass::COUNT]) -> Option<(GestureClass, f64)> {
        let (best, confidence) = argmax(probs);
        let class = GestureClass::from_index(best).expect("index below class count");
        if confidence < self.config.confidence_threshold {
            self.streak = None;
            return None;
        }
        let streak = match self.streak {
            Some(s) if s.class == class => Streak { count: s.count + 1, ..s },
            _ => Streak { class, count: 1, fired: false },
        };
        self.streak = Some(streak);
        let cooled = self.last_trigger.is_none_or(|last| t - last >= self.config.cooldown);
        if class.is_discrete() && !streak.fired && streak.count >= self.config.consecutive_windows && cooled {
            self.streak = Some(Streak { fired: true, ..streak });
            self.last_trigger = Some(t);
            return Some((class, confidence));
        }
        None
    }
}

fn argmax(probs: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    (best, probs[best])
}

/// Store calibration bounds from training-set latents.
pub fn calibrate(latents: &[[f64; 2]]) -> Result<UnitBounds> {
    if latents.len() < 2 {
        return Err(Error::TooFewPoints(format!("calibration needs 2 latents, got {}", latents.len())));
    }
    Ok(UnitBounds::from_points(latents).expect("nonempty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cursor {
    pub pose_xy: [f64; 2],
    pub music_xy: [f64; 2],
}

/// One interactive session. Holds no model; the frozen model and music
/// space are passed to every call and may be shared across sessions.
#[derive(Debug, Clone)]
pub struct Session {
    frames: usize,
    mode: Mode,
    buffer: VecDeque<CanonicalPose>,
    debouncer: Debouncer,
    cursor: Option<Cursor>,
    calibration: Option<UnitBounds>,
    last_emotion: Option<Emotion>,
    skipped: u64,
}

impl Session {
    /// `calibration` of `None` treats latents as already in unit coordinates.
    pub fn new(config: EngineConfig, frames: usize, calibration: Option<UnitBounds>) -> Result<Self> {
        config.validate()?;
        geometry::check_window_length(frames)?;
        Ok(Session {
            frames,
            mode: Mode::Idle,
            buffer: VecDeque::with_capacity(frames),
            debouncer: Debouncer::new(config),
            cursor: None,
            calibration,
            last_emotion: None,
            skipped: 0,
        })
    }

    pub fn for_model(config: EngineConfig, model: &JointModel, calibration: Option<UnitBounds>) -> Result<Self> {
        Session::new(config, model.frames(), calibration)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn cursor(&self) -> Option<Cursor> {
        self.cursor
    }

    pub fn calibration(&self) -> Option<UnitBounds> {
        self.calibration
    }

    pub fn config(&self) -> &EngineConfig {
        self.debouncer.config()
    }

    pub fn debouncer(&self) -> &Debouncer {
        &self.debouncer
    }

    /// Frames dropped because the hand was degenerate.
    pub fn skipped_frames(&self) -> u64 {
        self.skipped
    }

    pub fn set_config(&mut self, config: EngineConfig) -> Result<()> {
        config.validate()?;
        self.debouncer.set_config(config);
        Ok(())
    }

    pub fn calibrate(&mut self, latents: &[[f64; 2]]) -> Result<UnitBounds> {
        let bounds = calibrate(latents)?;
        self.calibration = Some(bounds);
        Ok(bounds)
    }

    /// Back to IDLE with an empty buffer. Calibration and config are kept.
    pub fn reset(&mut self) {
        self.mode = Mode::Idle;
        self.buffer.clear();
        self.debouncer.clear();
        self.cursor = None;
        self.last_emotion = None;
    }

    fn music_xy(&self, pose_xy: [f64; 2]) -> [f64; 2] {
        match &self.calibration {
            Some(b) => b.map_clamped(pose_xy),
            None => [pose_xy[0].clamp(0.0, 1.0), pose_xy[1].clamp(0.0, 1.0)],
        }
    }

    /// Process one frame. Degenerate hands are skipped and leave the buffer
    /// untouched; malformed frames are rejected.
    pub fn push_frame(
        &mut self,
        frame: &LandmarkFrame,
        model: &JointModel,
        space: &MusicSpace,
    ) -> Result<Vec<InteractionEvent>> {
        frame.validate()?;
        if model.frames() != self.frames {
            return Err(Error::ShapeMismatch(format!(
                "session windows have {} frames, model expects {}",
                self.frames,
                model.frames()
            )));
        }
        let pose = match geometry::canonicalize(frame) {
            Ok(p) => p,
            Err(Error::DegenerateHand(why)) => {
                self.skipped += 1;
                log::warn!("skipping frame at t={}: {why}", frame.timestamp);
                return Ok(Vec::new());
            }
            Err(e) => return Err(e),
        };
        if self.buffer.len() == self.frames {
            self.buffer.pop_front();
        }
        self.buffer.push_back(pose);
        if self.buffer.len() < self.frames {
            return Ok(Vec::new());
        }

        let mut window = Vec::with_capacity(self.frames * geometry::POSE_DIM);
        for p in &self.buffer {
            window.extend_from_slice(&p.values);
        }
        let (latent, probs) = model.infer(&window)?;
        let t = frame.timestamp;
        let pose_xy = latent.display_point();
        let cursor = Cursor { pose_xy, music_xy: self.music_xy(pose_xy) };
        self.cursor = Some(cursor);

        let mut events = Vec::new();
        if let Some((class, confidence)) = self.debouncer.observe(t, &probs) {
            events.push(InteractionEvent::GestureDetected { t, class, confidence });
            match class {
                GestureClass::Pinch => {
                    self.mode = match self.mode {
                        Mode::Idle => Mode::Exploring,
                        Mode::Exploring => Mode::Idle,
                    };
                    self.last_emotion = None;
                    events.push(InteractionEvent::ModeChanged { t, mode: self.mode });
                }
                GestureClass::DoublePinch if self.mode == Mode::Exploring => {
                    let (track, _) = space.nearest_track(cursor.music_xy)?;
                    events.push(InteractionEvent::TrackSelected { t, track_id: track.track_id.clone() });
                }
                _ => {}
            }
        }
        if self.mode == Mode::Exploring {
            events.push(InteractionEvent::CursorMoved { t, pose_xy: cursor.pose_xy, music_xy: cursor.music_xy });
            let (emotion, _) = space.nearest_emotion(cursor.music_xy)?;
            if self.last_emotion != Some(emotion) {
                self.last_emotion = Some(emotion);
                events.push(InteractionEvent::EmotionHighlighted { t, emotion });
            }
        }
        Ok(events)
    }
}

/// Run a whole stream through a fresh session.
pub fn replay(
    frames: &[LandmarkFrame],
    model: &JointModel,
    space: &MusicSpace,
    config: EngineConfig,
    calibration: Option<UnitBounds>,
) -> Result<Vec<InteractionEvent>> {
    let mut session = Session::for_model(config, model, calibration)?;
    let mut events = Vec::new();
    for f in frames {
        events.extend(session.push_frame(f, model, space)?);
    }
    Ok(events)
}

/// Check the event-log invariants; returns a description of the first
/// violation. Discrete triggers are the `gesture-detected` events.
pub fn check_event_log(events: &[InteractionEvent], cooldown: f64) -> std::result::Result<(), String> {
    let mut mode = Mode::Idle;
    let mut last_trigger: Option<f64> = None;
    for (i, e) in events.iter().enumerate() {
        match e {
            InteractionEvent::GestureDetected { t, .. } => {
                if let Some(last) = last_trigger {
                    if t - last < cooldown {
                        return Err(format!("event {i}: triggers at {last} and {t} inside the cooldown"));
                    }
                }
                last_trigger = Some(*t);
            }
            InteractionEvent::ModeChanged { mode: m, .. } => mode = *m,
            InteractionEvent::TrackSelected { .. } if mode != Mode::Exploring => {
                return Err(format!("event {i}: track selected outside exploring mode"));
            }
            InteractionEvent::CursorMoved { .. } | InteractionEvent::EmotionHighlighted { .. }
                if mode != Mode::Exploring =>
            {
                return Err(format!("event {i}: cursor event outside exploring mode"));
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WindowMode;
    use crate::musicspace::{build_space, EmbeddingSource, TrackProfile, GENRE_COUNT, STYLE_COUNT};
    use crate::nets::Architecture;
    use proptest::prelude::*;

    /// A model that ignores its input: constant latent, and a near-certain
    /// `class` (or uniform output when `None`).
    fn stub(latent: [f64; 2], class: Option<GestureClass>) -> JointModel {
        let mut model = JointModel::zeros(&Architecture::standard(WindowMode::Concat, 2));
        {
            let mut layers = model.layers_mut();
            layers[3].bias.copy_from_slice(&latent);
            if let Some(c) = class {
                layers.last_mut().unwrap().bias[c.index()] = 12.0;
            }
        }
        model
    }

    fn space() -> MusicSpace {
        let mut profiles = Vec::new();
        let mut coords = Vec::new();
        for (i, e) in [Emotion::Sadness, Emotion::Joy, Emotion::Fear, Emotion::Anger].into_iter().enumerate() {
            let mut emotions = [0.1; 6];
            emotions[e.index()] = 0.9;
            profiles.push(
                TrackProfile::new(
                    format!("t{i}"),
                    format!("Track {i}"),
                    emotions,
                    &[0.5; GENRE_COUNT],
                    &[0.5; STYLE_COUNT],
                )
                .unwrap(),
            );
        }
        coords.extend([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        build_space(&coords, &profiles, EmbeddingSource::Imported).unwrap()
    }

    fn hand(t: f64) -> LandmarkFrame {
        let params = crate::synth::SynthParams { jitter: 0.0, frames_per_clip: 2, ..Default::default() };
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut f = crate::synth::synth_gesture(GestureClass::Pinch, &params, 0.0, &mut rng).unwrap().remove(0);
        f.timestamp = t;
        f
    }

    fn run(session: &mut Session, model: &JointModel, space: &MusicSpace, t0: f64, n: usize) -> Vec<InteractionEvent> {
        let mut out = Vec::new();
        for i in 0..n {
            out.extend(session.push_frame(&hand(t0 + i as f64 / 30.0), model, space).unwrap());
        }
        out
    }

    fn session() -> Session {
        Session::new(EngineConfig::default(), 2, None).unwrap()
    }

    #[test]
    fn no_inference_until_window_fills() {
        let model = stub([0.5, 0.5], Some(GestureClass::Pinch));
        let space = space();
        let cfg = EngineConfig { consecutive_windows: 1, ..EngineConfig::default() };
        let mut s = Session::new(cfg, 2, None).unwrap();
        assert!(s.push_frame(&hand(0.0), &model, &space).unwrap().is_empty());
        assert_eq!(s.buffered(), 1);
        assert!(s.cursor().is_none());
        assert!(!s.push_frame(&hand(0.1), &model, &space).unwrap().is_empty());
        assert_eq!(s.buffered(), 2);
    }

    #[test]
    fn held_pinch_toggles_once() {
        let model = stub([0.2, 0.2], Some(GestureClass::Pinch));
        let space = space();
        let mut s = session();
        // 1 frame to fill the window, then k = 3 windows, then many more.
        let events = run(&mut s, &model, &space, 0.0, 40);
        let triggers: Vec<_> =
            events.iter().filter(|e| matches!(e, InteractionEvent::GestureDetected { .. })).collect();
        assert_eq!(triggers.len(), 1);
        let modes: Vec<_> = events.iter().filter(|e| matches!(e, InteractionEvent::ModeChanged { .. })).collect();
        assert_eq!(modes, vec![&InteractionEvent::ModeChanged { t: 3.0 / 30.0, mode: Mode::Exploring }]);
        assert_eq!(s.mode(), Mode::Exploring);
        check_event_log(&events, 0.5).unwrap();
    }

    #[test]
    fn second_pinch_after_break_returns_to_idle() {
        let pinch = stub([0.2, 0.2], Some(GestureClass::Pinch));
        let unsure = stub([0.2, 0.2], None);
        let space = space();
        let mut s = session();
        run(&mut s, &pinch, &space, 0.0, 5);
        assert_eq!(s.mode(), Mode::Exploring);
        // Break the streak but re-pinch inside the cooldown: the trigger waits.
        run(&mut s, &unsure, &space, 0.2, 1);
        let early = run(&mut s, &pinch, &space, 0.25, 3);
        assert!(early.iter().all(|e| !matches!(e, InteractionEvent::ModeChanged { .. })));
        let later = run(&mut s, &pinch, &space, 0.35, 12);
        let changed: Vec<_> = later.iter().filter(|e| matches!(e, InteractionEvent::ModeChanged { .. })).collect();
        assert_eq!(changed.len(), 1);
        assert_eq!(s.mode(), Mode::Idle);
        let t = s.debouncer().last_trigger().unwrap();
        assert!(t - 0.1 >= 0.5);
    }

    #[test]
    fn double_pinch_selects_only_while_exploring() {
        let space = space();
        let double = stub([0.9, 0.95], Some(GestureClass::DoublePinch));
        let pinch = stub([0.9, 0.95], Some(GestureClass::Pinch));
        let mut s = session();
        let idle = run(&mut s, &double, &space, 0.0, 6);
        assert!(idle.iter().all(|e| !matches!(e, InteractionEvent::TrackSelected { .. })));
        assert_eq!(idle.len(), 1, "only the gesture-detected event: {idle:?}");
        run(&mut s, &pinch, &space, 1.0, 5);
        let events = run(&mut s, &double, &space, 2.0, 5);
        assert!(events.contains(&InteractionEvent::TrackSelected { t: 2.0 + 2.0 / 30.0, track_id: "t3".into() }));
    }

    #[test]
    fn circles_are_reported_without_action() {
        let space = space();
        let model = stub([0.5, 0.5], Some(GestureClass::CircleClockwise));
        let mut s = session();
        let events = run(&mut s, &model, &space, 0.0, 10);
        assert_eq!(events.len(), 1);
        assert!(matches!(events[0], InteractionEvent::GestureDetected { class: GestureClass::CircleClockwise, .. }));
        assert_eq!(s.mode(), Mode::Idle);
        // Continuous classes never trigger.
        let arm = stub([0.5, 0.5], Some(GestureClass::ContinuousArmOpen));
        assert!(run(&mut s, &arm, &space, 5.0, 10).is_empty());
    }

    #[test]
    fn emotion_highlight_follows_nearest_center() {
        let space = space();
        let mut s = session();
        run(&mut s, &stub([0.1, 0.1], Some(GestureClass::Pinch)), &space, 0.0, 4);
        let path = [[0.1, 0.1], [0.2, 0.1], [0.8, 0.1], [0.8, 0.2], [0.9, 0.9], [0.1, 0.9], [0.12, 0.88]];
        let mut expected_prev = Some(Emotion::Sadness);
        for (i, p) in path.iter().enumerate() {
            let events = run(&mut s, &stub(*p, None), &space, 1.0 + i as f64, 1);
            let (want, _) = space.nearest_emotion(*p).unwrap();
            let highlighted: Vec<_> = events
                .iter()
                .filter_map(|e| match e {
                    InteractionEvent::EmotionHighlighted { emotion, .. } => Some(*emotion),
                    _ => None,
                })
                .collect();
            if expected_prev == Some(want) {
                assert!(highlighted.is_empty());
            } else {
                assert_eq!(highlighted, vec![want]);
            }
            expected_prev = Some(want);
            assert!(matches!(events[0], InteractionEvent::CursorMoved { music_xy, .. } if music_xy == *p));
        }
    }

    #[test]
    fn calibration_maps_and_clamps() {
        let b = calibrate(&[[-1.0, -1.0], [1.0, 1.0], [0.0, 0.3]]).unwrap();
        assert_eq!(b.map_clamped([-1.0, -1.0]), [0.0, 0.0]);
        assert_eq!(b.map_clamped([3.0, -7.0]), [1.0, 0.0]);
        let flat = calibrate(&[[2.0, 0.0], [2.0, 1.0]]).unwrap();
        assert_eq!(flat.map_clamped([5.0, 0.5]), [0.5, 0.5]);
        assert!(matches!(calibrate(&[[0.0, 0.0]]), Err(Error::TooFewPoints(_))));

        let space = space();
        let mut s = session();
        s.calibrate(&[[-1.0, -1.0], [1.0, 1.0]]).unwrap();
        run(&mut s, &stub([0.0, 4.0], Some(GestureClass::Pinch)), &space, 0.0, 4);
        assert_eq!(s.cursor().unwrap().music_xy, [0.5, 1.0]);
    }

    #[test]
    fn reset_keeps_calibration() {
        let space = space();
        let model = stub([0.3, 0.3], Some(GestureClass::Pinch));
        let mut s = session();
        let bounds = s.calibrate(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        run(&mut s, &model, &space, 0.0, 6);
        assert_eq!(s.mode(), Mode::Exploring);
        s.reset();
        assert_eq!(s.mode(), Mode::Idle);
        assert_eq!(s.buffered(), 0);
        assert_eq!(s.calibration(), Some(bounds));
        assert!(s.push_frame(&hand(9.0), &model, &space).unwrap().is_empty());
    }

    #[test]
    fn degenerate_frames_are_skipped() {
        let space = space();
        let model = stub([0.3, 0.3], Some(GestureClass::Pinch));
        let mut s = session();
        s.push_frame(&hand(0.0), &model, &space).unwrap();
        let flat = LandmarkFrame::new(0.05, [[0.5, 0.5, 0.0]; 21], "test").unwrap();
        assert!(s.push_frame(&flat, &model, &space).unwrap().is_empty());
        assert_eq!(s.buffered(), 1);
        assert_eq!(s.skipped_frames(), 1);
    }

    #[test]
    fn event_json_shape() {
        let e = InteractionEvent::GestureDetected { t: 1.5, class: GestureClass::DoublePinch, confidence: 0.9 };
        assert_eq!(e.to_json_line(), r#"{"type":"gesture-detected","t":1.5,"class":"double-pinch","confidence":0.9}"#);
        let m = InteractionEvent::ModeChanged { t: 0.0, mode: Mode::Exploring };
        assert_eq!(m.to_json_line(), r#"{"type":"mode-changed","t":0.0,"mode":"EXPLORING"}"#);
        let mut buf = Vec::new();
        write_events(&mut buf, &[e.clone(), m.clone()]).unwrap();
        assert_eq!(read_events(buf.as_slice()).unwrap(), vec![e, m]);
    }

    #[test]
    fn config_bounds() {
        assert!(EngineConfig { confidence_threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(EngineConfig { consecutive_windows: 0, ..Default::default() }.validate().is_err());
        assert!(EngineConfig { cooldown: -1.0, ..Default::default() }.validate().is_err());
        EngineConfig { confidence_threshold: 1.0, ..Default::default() }.validate().unwrap();
    }

    fn probs_for(class: usize, confidence: f64) -> [f64; 6] {
        let mut p = [(1.0 - confidence) / 5.0; 6];
        p[class] = confidence;
        p
    }

    proptest! {
        #[test]
        fn debouncer_invariants(
            seq in prop::collection::vec((0usize..6, 0.1f64..1.0, 0.0f64..0.2), 1..300),
            k in 1usize..5,
            cooldown in 0.0f64..1.0,
        ) {
            let config = EngineConfig { confidence_threshold: 0.8, consecutive_windows: k, cooldown };
            let mut d = Debouncer::new(config);
            let mut t = 0.0;
            let mut history: Vec<(usize, f64)> = Vec::new();
            let mut last: Option<f64> = None;
            for (class, conf, dt) in seq {
                t += dt;
                let fired = d.observe(t, &probs_for(class, conf));
                history.push((class, conf));
                if let Some((c, _)) = fired {
                    prop_assert_eq!(c.index(), class);
                    prop_assert!(c.is_discrete());
                    // The last k windows agree with confidence at or above the threshold.
                    prop_assert!(history.len() >= k);
                    for (hc, hp) in &history[history.len() - k..] {
                        prop_assert_eq!(*hc, class);
                        prop_assert!(*hp >= 0.8);
                    }
                    if let Some(l) = last {
                        prop_assert!(t - l >= cooldown);
                    }
                    last = Some(t);
                }
                // Counter resets whenever the argmax class changes.
                if let Some((c, n)) = d.streak() {
                    prop_assert_eq!(c.index(), class);
                    let run = history.iter().rev().take_while(|(hc, hp)| *hc == class && *hp >= 0.8).count();
                    prop_assert_eq!(n, run);
                }
            }
        }
    }
}
