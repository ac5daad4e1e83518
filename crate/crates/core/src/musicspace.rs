//! The 2D music space: track profiles, their planar embedding rescaled to the
//! unit square, per-emotion cluster centers and nearest-neighbor queries.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::UnitBounds;

pub const GENRE_COUNT: usize = 14;
pub const STYLE_COUNT: usize = 14;
pub const FEATURE_COUNT: usize = Emotion::COUNT + GENRE_COUNT + STYLE_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Sadness,
    Joy,
    Fear,
    Erotic,
    Anger,
    Tenderness,
}

impl Emotion {
    pub const COUNT: usize = 6;
    pub const ALL: [Emotion; 6] =
        [Emotion::Sadness, Emotion::Joy, Emotion::Fear, Emotion::Erotic, Emotion::Anger, Emotion::Tenderness];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Sadness => "sadness",
            Emotion::Joy => "joy",
            Emotion::Fear => "fear",
            Emotion::Erotic => "erotic",
            Emotion::Anger => "anger",
            Emotion::Tenderness => "tenderness",
        }
    }

    /// Display hue in degrees.
    pub fn hue(self) -> f64 {
        match self {
            Emotion::Sadness => 220.0,
            Emotion::Joy => 48.0,
            Emotion::Fear => 275.0,
            Emotion::Erotic => 325.0,
            Emotion::Anger => 2.0,
            Emotion::Tenderness => 140.0,
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::Config(format!("unknown emotion '{s}'")))
    }
}

/// 34 features per track: 6 emotions, 14 genres, 14 styles, all in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackProfile {
    pub track_id: String,
    pub title: String,
    pub emotions: [f64; Emotion::COUNT],
    pub genres: [f64; GENRE_COUNT],
    pub styles: [f64; STYLE_COUNT],
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Range(format!("{name} = {v} outside [0, 1]")))
    }
}

impl TrackProfile {
    pub fn new(
        track_id: impl Into<String>,
        title: impl Into<String>,
        emotions: [f64; Emotion::COUNT],
        genres: &[f64],
        styles: &[f64],
    ) -> Result<Self> {
        let track_id = track_id.into();
        if genres.len() != GENRE_COUNT || styles.len() != STYLE_COUNT {
            return Err(Error::ShapeMismatch(format!(
                "track {track_id}: {} genres and {} styles, expected {GENRE_COUNT} each",
                genres.len(),
                styles.len()
            )));
        }
        let mut profile = TrackProfile {
            track_id,
            title: title.into(),
            emotions,
            genres: [0.0; GENRE_COUNT],
            styles: [0.0; STYLE_COUNT],
        };
        profile.genres.copy_from_slice(genres);
        profile.styles.copy_from_slice(styles);
        for (i, v) in profile.features().iter().enumerate() {
            check_unit(&format!("track {} feature {}", profile.track_id, COLUMNS[2 + i]), *v)?;
        }
        Ok(profile)
    }

    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        out[..6].copy_from_slice(&self.emotions);
        out[6..20].copy_from_slice(&self.genres);
        out[20..].copy_from_slice(&self.styles);
        out
    }

    /// Argmax of the emotion scores; ties go to the lowest index.
    pub fn dominant_emotion(&self) -> Emotion {
        let mut best = 0;
        for (i, v) in self.emotions.iter().enumerate() {
            if *v > self.emotions[best] {
                best = i;
            }
        }
        Emotion::ALL[best]
    }

    pub fn emotion_value(&self, emotion: Emotion) -> f64 {
        self.emotions[emotion.index()]
    }
}

const COLUMNS: [&str; 2 + FEATURE_COUNT] = [
    "track_id",
    "title",
    "emo_sadness",
    "emo_joy",
    "emo_fear",
    "emo_erotic",
    "emo_anger",
    "emo_tenderness",
    "genre_00",
    "genre_01",
    "genre_02",
    "genre_03",
    "genre_04",
    "genre_05",
    "genre_06",
    "genre_07",
    "genre_08",
    "genre_09",
    "genre_10",
    "genre_11",
    "genre_12",
    "genre_13",
    "style_00",
    "style_01",
    "style_02",
    "style_03",
    "style_04",
    "style_05",
    "style_06",
    "style_07",
    "style_08",
    "style_09",
    "style_10",
    "style_11",
    "style_12",
    "style_13",
];

pub fn catalog_header() -> &'static [&'static str] {
    &COLUMNS
}

/// Parse a catalog: header row, then one row per track. Row numbers in
/// errors count data rows from 1.
pub fn load_catalog<R: Read>(source: R) -> Result<Vec<TrackProfile>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(source);
    let header = reader.headers().map_err(|e| Error::Parse { row: 0, msg: e.to_string() })?;
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::Parse { row: 0, msg: "unexpected catalog header".into() });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if record.len() != COLUMNS.len() {
            return Err(Error::Parse {
                row,
                msg: format!("{} features, expected {FEATURE_COUNT}", record.len().saturating_sub(2)),
            });
        }
        let mut features = [0.0; FEATURE_COUNT];
        for (j, f) in features.iter_mut().enumerate() {
            let cell = &record[j + 2];
            *f = cell
                .parse::<f64>()
                .map_err(|_| Error::Parse { row, msg: format!("{} = '{cell}' is not a number", COLUMNS[j + 2]) })?;
            if !f.is_finite() || !(0.0..=1.0).contains(f) {
                return Err(Error::Range(format!("row {row}: {} = {f} outside [0, 1]", COLUMNS[j + 2])));
            }
        }
        let mut emotions = [0.0; Emotion::COUNT];
        emotions.copy_from_slice(&features[..6]);
        out.push(TrackProfile::new(&record[0], &record[1], emotions, &features[6..20], &features[20..])?);
    }
    Ok(out)
}

pub fn write_catalog<W: std::io::Write>(sink: W, profiles: &[TrackProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Parse { row: 0, msg: e.to_string() };
    w.write_record(COLUMNS).map_err(csv_err)?;
    for p in profiles {
        let mut row = vec![p.track_id.clone(), p.title.clone()];
        row.extend(p.features().iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse { row: 0, msg: e.to_string() })
}

/// Mean-centered projection onto the top two principal axes of the 34x34
/// covariance. Each axis is signed so its largest-magnitude component is
/// positive.
pub fn pca2(profiles: &[TrackProfile]) -> Result<Vec<[f64; 2]>> {
    if profiles.len() < 3 {
        return Err(Error::TooFewTracks { needed: 3, got: profiles.len() });
    }
    let n = profiles.len();
    let data = DMatrix::from_fn(n, FEATURE_COUNT, |r, c| profiles[r].features()[c]);
    let mean: DVector<f64> = DVector::from_fn(FEATURE_COUNT, |c, _| data.column(c).sum() / n as f64);
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eigen = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..FEATURE_COUNT).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let axes: Vec<DVector<f64>> = order[..2]
        .iter()
        .map(|&k| {
            let v = eigen.eigenvectors.column(k).into_owned();
            let lead = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                -v
            } else {
                v
            }
        })
        .collect();

    Ok(centered.row_iter().map(|row| [row.dot(&axes[0].transpose()), row.dot(&axes[1].transpose())]).collect())
}

/// Adopt externally computed coordinates (`track_id,x,y` with a header),
/// returned in catalog order.
pub fn import_embedding<R: Read>(source: R, profiles: &[TrackProfile]) -> Result<Vec<[f64; 2]>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut coords: HashMap<String, [f64; 2]> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if record.len() != 3 {
            return Err(Error::Parse { row, msg: format!("{} columns, expected 3", record.len()) });
        }
        let parse = |cell: &str| {
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { row, msg: format!("'{cell}' is not a finite number") })
        };
        let xy = [parse(&record[1])?, parse(&record[2])?];
        if coords.insert(record[0].to_string(), xy).is_some() {
            return Err(Error::DuplicateTrack(record[0].to_string()));
        }
    }
    profiles
        .iter()
        .map(|p| coords.get(&p.track_id).copied().ok_or_else(|| Error::MissingTrack(p.track_id.clone())))
        .collect()
}

pub fn write_embedding<W: std::io::Write>(sink: W, rows: &[(String, [f64; 2])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Parse { row: 0, msg: e.to_string() };
    w.write_record(["track_id", "x", "y"]).map_err(csv_err)?;
    for (id, xy) in rows {
        w.write_record([id.clone(), xy[0].to_string(), xy[1].to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse { row: 0, msg: e.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    Pca,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub track_id: String,
    pub title: String,
    pub raw: [f64; 2],
    pub unit: [f64; 2],
    pub dominant: Emotion,
    pub dominant_value: f64,
}

/// Immutable once built; every query is read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MusicSpace {
    pub tracks: Vec<TrackPoint>,
    /// Indexed by emotion; `None` when no track has that dominant emotion.
    pub centers: [Option<[f64; 2]>; Emotion::COUNT],
    pub unit_transform: UnitBounds,
    pub embedding_source: EmbeddingSource,
}

pub fn build_space(coords: &[[f64; 2]], profiles: &[TrackProfile], source: EmbeddingSource) -> Result<MusicSpace> {
    if coords.is_empty() {
        return Err(Error::EmptySpace);
    }
    if coords.len() != profiles.len() {
        return Err(Error::ShapeMismatch(format!("{} coordinates for {} tracks", coords.len(), profiles.len())));
    }
    let unit_transform = UnitBounds::from_points(coords).expect("nonempty");
    let tracks: Vec<TrackPoint> = coords
        .iter()
        .zip(profiles)
        .map(|(raw, p)| {
            let dominant = p.dominant_emotion();
            TrackPoint {
                track_id: p.track_id.clone(),
                title: p.title.clone(),
                raw: *raw,
                unit: unit_transform.map(*raw),
                dominant,
                dominant_value: p.emotion_value(dominant),
            }
        })
        .collect();

    let mut sums = [[0.0; 2]; Emotion::COUNT];
    let mut counts = [0usize; Emotion::COUNT];
    for t in &tracks {
        let e = t.dominant.index();
        sums[e][0] += t.unit[0];
        sums[e][1] += t.unit[1];
        counts[e] += 1;
    }
    let mut centers = [None; Emotion::COUNT];
    for e in 0..Emotion::COUNT {
        if counts[e] > 0 {
            let n = counts[e] as f64;
            centers[e] = Some([sums[e][0] / n, sums[e][1] / n]);
        }
    }
    Ok(MusicSpace { tracks, centers, unit_transform, embedding_source: source })
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl MusicSpace {
    /// Nearest emotion center in the unit square; ties go to the lowest index.
    pub fn nearest_emotion(&self, cursor: [f64; 2]) -> Result<(Emotion, f64)> {
        let mut best: Option<(Emotion, f64)> = None;
        for (e, center) in Emotion::ALL.iter().zip(self.centers.iter()) {
            if let Some(c) = center {
                let d = dist2(cursor, *c);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((*e, d));
                }
            }
        }
        best.map(|(e, d)| (e, d.sqrt())).ok_or(Error::NoCenters)
    }

    /// Nearest track; ties go to the lexicographically smallest id.
    pub fn nearest_track(&self, cursor: [f64; 2]) -> Result<(&TrackPoint, f64)> {
        let mut best: Option<(&TrackPoint, f64)> = None;
        for t in &self.tracks {
            let d = dist2(cursor, t.unit);
            let better = match best {
                None => true,
                Some((bt, bd)) => d < bd || (d == bd && t.track_id < bt.track_id),
            };
            if better {
                best = Some((t, d));
            }
        }
        best.map(|(t, d)| (t, d.sqrt())).ok_or(Error::EmptySpace)
    }

    pub fn center_count(&self) -> usize {
        self.centers.iter().flatten().count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("music spaces always serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Display color in HSL; `lightness` in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Color {
    pub hue: f64,
    pub saturation: f64,
    pub lightness: f64,
}

const LIGHTEST: f64 = 0.88;
const DARKEST: f64 = 0.28;

/// Per-emotion hue; lightness falls linearly from lightest (value 0) to
/// darkest (value 1).
pub fn emotion_color(emotion: Emotion, value: f64) -> Result<Color> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Range(format!("emotion value {value} outside [0, 1]")));
    }
    Ok(Color { hue: emotion.hue(), saturation: 0.75, lightness: LIGHTEST - (LIGHTEST - DARKEST) * value })
}

impl Color {
    pub fn to_rgb(self) -> [u8; 3] {
        let c = (1.0 - (2.0 * self.lightness - 1.0).abs()) * self.saturation;
        let h = self.hue.rem_euclid(360.0) / 60.0;
        let x = c * (1.0 - (h % 2.0 - 1.0).abs());
        let (r, g, b) = match h as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let m = self.lightness - c / 2.0;
        let to8 = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
        [to8(r), to8(g), to8(b)]
    }

    pub fn to_hex(self) -> String {
        let [r, g, b] = self.to_rgb();
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}
