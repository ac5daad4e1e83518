//! Labeled clips, sliding windows, the joint training loop and evaluation.

mod metrics;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, CanonicalPose, LandmarkFrame, WindowMode, POSE_DIM};
use crate::gesture::GestureClass;
use crate::nets::{AdamConfig, AdamState, Architecture, Checkpoint, JointModel, Sample};
use crate::scaling::UnitBounds;

pub use metrics::{average_precision, mean_average_precision, silhouette};

/// One recorded gesture: consecutive frames with a single label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledClip {
    pub clip_id: String,
    #[serde(with = "label_number")]
    pub label: GestureClass,
    pub frames: Vec<LandmarkFrame>,
}

/// Labels are stored as integers 1..=6.
mod label_number {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::gesture::GestureClass;

    pub fn serialize<S: Serializer>(c: &GestureClass, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(c.label())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GestureClass, D::Error> {
        let label = u8::deserialize(d)?;
        GestureClass::from_label(label).ok_or_else(|| de::Error::custom(format!("gesture label {label} not in 1..=6")))
    }
}

pub fn read_clips<R: BufRead>(reader: R) -> Result<Vec<LabeledClip>> {
    let mut clips = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        clips.push(serde_json::from_str(&line).map_err(|e| Error::Parse { row, msg: e.to_string() })?);
    }
    Ok(clips)
}

pub fn write_clips<W: Write>(mut writer: W, clips: &[LabeledClip]) -> std::io::Result<()> {
    for clip in clips {
        serde_json::to_writer(&mut writer, clip)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn load_clips(path: impl AsRef<Path>) -> Result<Vec<LabeledClip>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_clips(BufReader::new(file))
}

pub fn save_clips(path: impl AsRef<Path>, clips: &[LabeledClip]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_clips(BufWriter::new(file), clips).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub frames: usize,
    pub mode: WindowMode,
    /// Weight of the cross-entropy term.
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Fraction of each class's clips used for training.
    pub split: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            frames: 2,
            mode: WindowMode::Concat,
            lambda: 1.0,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            adam: AdamConfig::default(),
            split: 0.82,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        geometry::check_window_length(self.frames)?;
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split {} must be in (0, 1)", self.split)));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

/// A clip after canonicalization.
#[derive(Debug, Clone)]
pub struct ClipPoses {
    pub clip_id: String,
    pub label: GestureClass,
    pub frames: Vec<LandmarkFrame>,
    pub poses: Vec<CanonicalPose>,
}

/// Start position of one window within a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowRef {
    pub clip: usize,
    pub start: usize,
}

/// Stride-1 windows of `frames` consecutive poses, never crossing clips.
#[derive(Debug, Clone)]
pub struct GestureDataset {
    pub frames: usize,
    pub clips: Vec<ClipPoses>,
    pub windows: Vec<WindowRef>,
}

impl GestureDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn label(&self, w: WindowRef) -> GestureClass {
        self.clips[w.clip].label
    }

    pub fn clip_id(&self, w: WindowRef) -> &str {
        &self.clips[w.clip].clip_id
    }

    pub fn poses(&self, w: WindowRef) -> &[CanonicalPose] {
        &self.clips[w.clip].poses[w.start..w.start + self.frames]
    }

    pub fn raw_frames(&self, w: WindowRef) -> &[LandmarkFrame] {
        &self.clips[w.clip].frames[w.start..w.start + self.frames]
    }

    /// Flattened window, oldest frame first.
    pub fn window_values(&self, w: WindowRef) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.frames * POSE_DIM);
        for p in self.poses(w) {
            out.extend_from_slice(&p.values);
        }
        out
    }

    /// Window counts per class, in label order.
    pub fn class_counts(&self) -> [usize; GestureClass::COUNT] {
        let mut counts = [0; GestureClass::COUNT];
        for w in &self.windows {
            counts[self.label(*w).index()] += 1;
        }
        counts
    }

    /// A dataset restricted to the given clip ids.
    pub fn subset(&self, keep: &BTreeSet<String>) -> GestureDataset {
        let clips: Vec<ClipPoses> = self.clips.iter().filter(|c| keep.contains(&c.clip_id)).cloned().collect();
        GestureDataset::from_poses(clips, self.frames)
    }

    fn from_poses(clips: Vec<ClipPoses>, frames: usize) -> Self {
        let windows = clips
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| {
                let count = (c.poses.len() + 1).saturating_sub(frames);
                (0..count).map(move |start| WindowRef { clip: ci, start })
            })
            .collect();
        GestureDataset { frames, clips, windows }
    }
}

/// Canonicalize every clip and cut stride-1 windows. Clips shorter than
/// `frames` contribute no windows.
pub fn make_windows(clips: &[LabeledClip], frames: usize) -> Result<GestureDataset> {
    geometry::check_window_length(frames)?;
    let canonical = clips
        .iter()
        .map(|clip| {
            let poses = clip
                .frames
                .iter()
                .map(geometry::canonicalize)
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::DegenerateHand(format!("clip {}: {e}", clip.clip_id)))?;
            Ok(ClipPoses { clip_id: clip.clip_id.clone(), label: clip.label, frames: clip.frames.clone(), poses })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GestureDataset::from_poses(canonical, frames))
}

const SPLIT_SALT: u64 = 0x5EED_0000_0000_0001;

/// Clip-level stratified split: per class, a seeded shuffle of its clips
/// with `fraction` of them (rounded, at least one) going to training.
/// Returns (train clip ids, test clip ids).
pub fn split_by_clip(dataset: &GestureDataset, fraction: f64, seed: u64) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    let mut train = BTreeSet::new();
    let mut test = BTreeSet::new();
    for class in GestureClass::ALL {
        let mut ids: Vec<&str> =
            dataset.clips.iter().filter(|c| c.label == class).map(|c| c.clip_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.shuffle(&mut rng);
        let n = ids.len();
        let mut n_train = ((n as f64) * fraction).round() as usize;
        n_train = n_train.clamp(n.min(1), n.saturating_sub(1).max(n.min(1)));
        for (i, id) in ids.into_iter().enumerate() {
            if i < n_train {
                train.insert(id.to_string());
            } else {
                test.insert(id.to_string());
            }
        }
    }
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub reconstruction: f64,
    pub cross_entropy: f64,
    /// Micro-averaged test accuracy in percent; `None` without a test split.
    pub test_precision: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub train_clips: BTreeSet<String>,
    pub test_clips: BTreeSet<String>,
}

impl TrainOutcome {
    pub fn test_set(&self, dataset: &GestureDataset) -> GestureDataset {
        dataset.subset(&self.test_clips)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn accuracy(model: &JointModel, windows: &[(Vec<f64>, GestureClass)]) -> Result<f64> {
    let mut correct = 0usize;
    for (x, label) in windows {
        let logits = model.classify(&model.encode(x)?)?;
        if argmax(&logits) == label.index() {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / windows.len().max(1) as f64)
}

/// Train the shared encoder, decoder and classifier jointly with Adam.
/// Deterministic for a fixed config.
pub fn train_joint(dataset: &GestureDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.frames != config.frames {
        return Err(Error::ShapeMismatch(format!(
            "dataset windows have {} frames, config wants {}",
            dataset.frames, config.frames
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (train_clips, test_clips) = split_by_clip(dataset, config.split, config.seed);
    let materialize = |keep: &BTreeSet<String>| -> Vec<(Vec<f64>, GestureClass)> {
        dataset
            .windows
            .iter()
            .filter(|w| keep.contains(dataset.clip_id(**w)))
            .map(|w| (dataset.window_values(*w), dataset.label(*w)))
            .collect()
    };
    let train = materialize(&train_clips);
    let test = materialize(&test_clips);
    for class in GestureClass::ALL {
        if !train.iter().any(|(_, l)| *l == class) {
            return Err(Error::MissingClass(class.to_string()));
        }
    }

    let arch = Architecture::standard(config.mode, config.frames);
    let mut model = JointModel::new(&arch, config.seed);
    let mut adam = AdamState::for_tensors(config.adam, &model.parameters());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut recon, mut ce) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sample<'_>> =
                chunk.iter().map(|&i| Sample { window: &train[i].0, label: train[i].1 }).collect();
            let report = model.joint_loss(&batch, config.lambda)?;
            let weight = chunk.len() as f64;
            loss += report.loss * weight;
            recon += report.reconstruction * weight;
            ce += report.cross_entropy * weight;
            let grads = report.gradients.tensors();
            adam.update(&mut model.parameters_mut(), &grads)?;
        }
        let n = train.len() as f64;
        let test_precision = if test.is_empty() { None } else { Some(accuracy(&model, &test)?) };
        log::debug!(
            "epoch {} loss {:.5} recon {:.5} ce {:.5} test {:?}",
            epoch + 1,
            loss / n,
            recon / n,
            ce / n,
            test_precision
        );
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: loss / n,
            reconstruction: recon / n,
            cross_entropy: ce / n,
            test_precision,
        });
    }

    let latents = train.iter().map(|(x, _)| model.encode(x).map(|l| l.display_point())).collect::<Result<Vec<_>>>()?;
    let calibration = UnitBounds::from_points(&latents);
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            lambda: config.lambda,
            seed: config.seed,
            calibration,
            held_out_clips: test_clips.iter().cloned().collect(),
        },
        history,
        train_clips,
        test_clips,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub windows: usize,
    /// Per-class precision in percent, label order.
    pub per_class_precision: [f64; GestureClass::COUNT],
    /// Micro-averaged argmax accuracy in percent.
    pub precision: f64,
    /// One-vs-rest average precision averaged over classes, percent.
    pub map: f64,
    /// Rows are true classes, columns predictions.
    pub confusion: [[usize; GestureClass::COUNT]; GestureClass::COUNT],
    pub latency_mean_ms: f64,
    pub latency_p95_ms: f64,
    /// `None` when the latents do not admit a silhouette (fewer than two
    /// classes, or a class with a single window).
    pub silhouette: Option<f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Per-window class probabilities, display latents and latencies in ms.
type WindowScores = (Vec<[f64; GestureClass::COUNT]>, Vec<[f64; 2]>, Vec<f64>);

fn score_windows(model: &JointModel, dataset: &GestureDataset) -> Result<WindowScores> {
    let mut probs = Vec::with_capacity(dataset.len());
    let mut latents = Vec::with_capacity(dataset.len());
    let mut latency_ms = Vec::with_capacity(dataset.len());
    for w in &dataset.windows {
        // Timed path: canonicalize the raw frames, then encode and classify.
        let start = Instant::now();
        let poses = dataset.raw_frames(*w).iter().map(geometry::canonicalize).collect::<Result<Vec<_>>>()?;
        let window = geometry::window_vector(&poses, dataset.frames, model.mode())?;
        let (latent, p) = model.infer(&window.values)?;
        latency_ms.push(start.elapsed().as_secs_f64() * 1e3);
        probs.push(p);
        latents.push(latent.display_point());
    }
    Ok((probs, latents, latency_ms))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Score a frozen model on every window of `dataset`.
pub fn evaluate(checkpoint: &Checkpoint, dataset: &GestureDataset) -> Result<EvalReport> {
    let model = &checkpoint.model;
    if model.frames() != dataset.frames {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint expects {}-frame windows, dataset has {}",
            model.frames(),
            dataset.frames
        )));
    }
    let (probs, latents, mut latency) = score_windows(model, dataset)?;
    let labels: Vec<usize> = dataset.windows.iter().map(|w| dataset.label(*w).index()).collect();
    Ok(report_from_scores(&probs, &labels, &latents, &mut latency))
}

/// Assemble a report from per-window class scores.
pub fn report_from_scores(
    probs: &[[f64; GestureClass::COUNT]],
    labels: &[usize],
    latents: &[[f64; 2]],
    latency_ms: &mut [f64],
) -> EvalReport {
    let mut confusion = [[0usize; GestureClass::COUNT]; GestureClass::COUNT];
    for (p, l) in probs.iter().zip(labels) {
        confusion[*l][argmax(p)] += 1;
    }
    let correct: usize = (0..GestureClass::COUNT).map(|c| confusion[c][c]).sum();
    let mut per_class_precision = [0.0; GestureClass::COUNT];
    for (c, slot) in per_class_precision.iter_mut().enumerate() {
        let predicted: usize = (0..GestureClass::COUNT).map(|r| confusion[r][c]).sum();
        if predicted > 0 {
            *slot = 100.0 * confusion[c][c] as f64 / predicted as f64;
        }
    }
    latency_ms.sort_by(f64::total_cmp);
    let mean = if latency_ms.is_empty() { 0.0 } else { latency_ms.iter().sum::<f64>() / latency_ms.len() as f64 };
    EvalReport {
        windows: labels.len(),
        per_class_precision,
        precision: 100.0 * correct as f64 / labels.len().max(1) as f64,
        map: 100.0 * mean_average_precision(probs, labels),
        confusion,
        latency_mean_ms: mean,
        latency_p95_ms: percentile(latency_ms, 0.95),
        silhouette: silhouette(latents, labels).ok(),
    }
}
