//! Synthetic shape world.
//!
//! Each image holds a single hard-edged shape on a black 100×100 canvas. Shape,
//! colour class and size class are the explicit features; "left" (any shape
//! pixel inside the leftmost 30 columns) is an implicit fourth one. The world
//! hides one regularity: yellow shapes touching the left strip are big, apart
//! from deliberately injected outliers.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

pub const CANVAS: usize = 100;
pub const LEFT_STRIP: i32 = 30;
pub const CHANNELS: usize = 3;
pub const NUM_CLASSES: usize = 27;
pub const BACKGROUND: [u8; 3] = [0, 0, 0];
/// Per-channel jitter applied around a colour's base hue.
pub const COLOR_JITTER: i32 = 25;
/// Outlier counts per kind accepted for rule-violation training sets.
pub const OUTLIER_COUNTS: [u32; 10] = [0, 5, 7, 10, 20, 30, 40, 50, 75, 100];
/// Number of outlier kinds: {medium, small} × {circle, square, triangle}.
pub const OUTLIER_KINDS: usize = 6;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("shape at ({cx}, {cy}) with extent {extent} leaves the canvas")]
    OffCanvas { cx: i32, cy: i32, extent: i32 },
    #[error("sampling constraints can never be satisfied: {0}")]
    Unsatisfiable(&'static str),
    #[error("invalid outlier count {0}; expected one of {OUTLIER_COUNTS:?}")]
    InvalidOutlierCount(u32),
    #[error("unknown {what} '{value}'")]
    UnknownName { what: &'static str, value: String },
    #[error("manifest line {line}: {source}")]
    Manifest {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("image {path}: {reason}")]
    BadImage { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    PngEncode(#[from] png::EncodingError),
    #[error(transparent)]
    PngDecode(#[from] png::DecodingError),
}

pub type Result<T> = std::result::Result<T, WorldError>;

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident, $what:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: [$name; 3] = [$($name::$variant),+];

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = WorldError;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(WorldError::UnknownName { what: $what, value: s.to_string() }),
                }
            }
        }
    };
}

named_enum!(Shape, "shape" { Circle => "circle", Square => "square", Triangle => "triangle" });
named_enum!(ColorClass, "color" { Yellow => "yellow", Magenta => "magenta", Cyan => "cyan" });
named_enum!(SizeClass, "size" { Big => "big", Medium => "medium", Small => "small" });

impl ColorClass {
    pub fn base_rgb(self) -> [u8; 3] {
        match self {
            ColorClass::Yellow => [255, 255, 0],
            ColorClass::Magenta => [255, 0, 255],
            ColorClass::Cyan => [0, 255, 255],
        }
    }
}

impl SizeClass {
    /// Inclusive extent interval in pixels. The intervals do not intersect.
    pub fn extent_range(self) -> (i32, i32) {
        match self {
            SizeClass::Big => (25, 35),
            SizeClass::Medium => (13, 20),
            SizeClass::Small => (5, 10),
        }
    }
}

/// Ground-truth description of one rendered shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub color: ColorClass,
    pub size: SizeClass,
    pub center_x: i32,
    pub center_y: i32,
    /// Radius, half-width, or half-width of the triangle's bounding square.
    pub extent: i32,
    pub rgb: [u8; 3],
}

impl ShapeSpec {
    /// Index in 0..27 over size × shape × colour.
    pub fn class_index(&self) -> usize {
        self.size.index() * 9 + self.shape.index() * 3 + self.color.index()
    }

    pub fn fits_canvas(&self) -> bool {
        let max = CANVAS as i32 - 1;
        self.extent >= 0
            && self.center_x - self.extent >= 0
            && self.center_y - self.extent >= 0
            && self.center_x + self.extent <= max
            && self.center_y + self.extent <= max
    }

    /// Integer-grid membership test.
    pub fn contains(&self, x: i32, y: i32) -> bool {
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let e = self.extent;
        match self.shape {
            Shape::Circle => dx * dx + dy * dy <= e * e,
            Shape::Square => dx.abs() <= e && dy.abs() <= e,
            Shape::Triangle => {
                // Upright equilateral triangle with side 2e, centred vertically
                // inside the bounding square.
                let e = e as f64;
                let h = 3f64.sqrt() * e;
                let t = (dy as f64 + h / 2.0) / h;
                (-1e-9..=1.0 + 1e-9).contains(&t) && (dx.abs() as f64) <= e * t + 1e-9
            }
        }
    }

    /// Smallest column index covered by the shape, if any pixel is covered.
    pub fn min_column(&self) -> Option<i32> {
        let e = self.extent;
        let (x0, x1) = (self.center_x - e, self.center_x + e);
        let (y0, y1) = (self.center_y - e, self.center_y + e);
        (x0..=x1).find(|&x| (y0..=y1).any(|y| self.contains(x, y)))
    }

    pub fn is_left(&self) -> bool {
        self.min_column().is_some_and(|c| c < LEFT_STRIP)
    }

    /// Yellow, not big, touching the left strip: the rule-violating kind.
    pub fn violates_rule(&self) -> bool {
        self.color == ColorClass::Yellow && self.size != SizeClass::Big && self.is_left()
    }

    pub fn render(&self) -> Result<Image> {
        if !self.fits_canvas() {
            return Err(WorldError::OffCanvas {
                cx: self.center_x,
                cy: self.center_y,
                extent: self.extent,
            });
        }
        let mut img = Image::blank();
        let e = self.extent;
        for y in self.center_y - e..=self.center_y + e {
            for x in self.center_x - e..=self.center_x + e {
                if self.contains(x, y) {
                    img.set(x as usize, y as usize, self.rgb);
                }
            }
        }
        Ok(img)
    }
}

/// A 100×100 RGB image stored row-major, channels interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pixels: Vec<u8>,
}

impl Image {
    pub fn blank() -> Self {
        let mut pixels = Vec::with_capacity(CANVAS * CANVAS * CHANNELS);
        for _ in 0..CANVAS * CANVAS {
            pixels.extend_from_slice(&BACKGROUND);
        }
        Image { pixels }
    }

    pub fn from_raw(pixels: Vec<u8>) -> Option<Self> {
        (pixels.len() == CANVAS * CANVAS * CHANNELS).then_some(Image { pixels })
    }

    pub fn raw(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * CANVAS + x) * CHANNELS;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * CANVAS + x) * CHANNELS;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels
            .chunks_exact(CHANNELS)
            .filter(|p| *p != BACKGROUND)
            .count()
    }

    pub fn min_foreground_column(&self) -> Option<usize> {
        (0..CANVAS).find(|&x| (0..CANVAS).any(|y| self.get(x, y) != BACKGROUND))
    }

    pub fn is_left(&self) -> bool {
        self.min_foreground_column()
            .is_some_and(|c| c < LEFT_STRIP as usize)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        let mut enc = png::Encoder::new(file, CANVAS as u32, CANVAS as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&self.pixels)?;
        Ok(())
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let bad = |reason: String| WorldError::BadImage {
            path: path.to_path_buf(),
            reason,
        };
        let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
        let mut reader = decoder.read_info()?;
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader.next_frame(&mut buf)?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(bad(format!("{:?}/{:?}, expected RGB8", info.color_type, info.bit_depth)));
        }
        if info.width as usize != CANVAS || info.height as usize != CANVAS {
            return Err(bad(format!("{}x{}, expected 100x100", info.width, info.height)));
        }
        buf.truncate(info.buffer_size());
        Ok(Image { pixels: buf })
    }
}

/// Attributes a sample is forced to have. `None` leaves the attribute free.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Forced {
    pub shape: Option<Shape>,
    pub color: Option<ColorClass>,
    pub size: Option<SizeClass>,
    pub left: Option<bool>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleConstraints {
    /// Reject yellow medium/small shapes that touch the left strip.
    pub forbid_nonbig_yellow_left: bool,
    pub force: Forced,
}

impl SampleConstraints {
    fn check(&self) -> Result<()> {
        let f = &self.force;
        if self.forbid_nonbig_yellow_left
            && f.color == Some(ColorClass::Yellow)
            && f.left == Some(true)
            && matches!(f.size, Some(SizeClass::Medium | SizeClass::Small))
        {
            return Err(WorldError::Unsatisfiable(
                "forced non-big yellow left shape while the hidden rule is enforced",
            ));
        }
        Ok(())
    }
}

fn pick<T: Copy, R: Rng + ?Sized>(rng: &mut R, forced: Option<T>, all: &[T; 3]) -> T {
    forced.unwrap_or_else(|| all[rng.gen_range(0..3)])
}

/// Draws one shape. Position is uniform over every placement that keeps the
/// shape on the canvas; constraint violations are handled by rejection.
pub fn sample_shape<R: Rng + ?Sized>(rng: &mut R, constraints: &SampleConstraints) -> Result<ShapeSpec> {
    constraints.check()?;
    let f = constraints.force;
    loop {
        let shape = pick(rng, f.shape, &Shape::ALL);
        let color = pick(rng, f.color, &ColorClass::ALL);
        let size = pick(rng, f.size, &SizeClass::ALL);
        let (lo, hi) = size.extent_range();
        let extent = rng.gen_range(lo..=hi);
        let max = CANVAS as i32 - 1 - extent;
        let center_x = rng.gen_range(extent..=max);
        let center_y = rng.gen_range(extent..=max);
        let base = color.base_rgb();
        let mut rgb = [0u8; 3];
        for (c, b) in rgb.iter_mut().zip(base) {
            let v = b as i32 + rng.gen_range(-COLOR_JITTER..=COLOR_JITTER);
            *c = v.clamp(0, 255) as u8;
        }
        let spec = ShapeSpec {
            shape,
            color,
            size,
            center_x,
            center_y,
            extent,
            rgb,
        };
        if f.left.is_some_and(|l| spec.is_left() != l) {
            continue;
        }
        if constraints.forbid_nonbig_yellow_left && spec.violates_rule() {
            continue;
        }
        return Ok(spec);
    }
}

/// Ground truth for one dataset entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageLabel {
    pub spec: ShapeSpec,
    pub is_left: bool,
    pub class_index: usize,
}

impl ImageLabel {
    pub fn new(spec: ShapeSpec) -> Self {
        ImageLabel {
            is_left: spec.is_left(),
            class_index: spec.class_index(),
            spec,
        }
    }

    pub fn is_big(&self) -> bool {
        self.spec.size == SizeClass::Big
    }

    pub fn has_color(&self, c: ColorClass) -> bool {
        self.spec.color == c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    CnnPretrain,
    AanTrain,
    BaselineTest,
    NbylTest,
    AanTrainOutliers(u32),
}

// Stream identifiers for sub-seed derivation. `AanTrain` and every
// `AanTrainOutliers(k)` share the rule-abiding base part and the outlier
// stream, so the sets differ only in how many outliers are appended.
const STREAM_PRETRAIN: u64 = 1;
const STREAM_AAN_BASE: u64 = 2;
const STREAM_BASELINE: u64 = 3;
const STREAM_NBYL: u64 = 4;
const STREAM_OUTLIERS: u64 = 5;

pub const PRETRAIN_PER_CLASS: usize = 900;
pub const REDUCED_PRETRAIN_PER_CLASS: usize = 200;
pub const TRAIN_PER_CLASS: usize = 100;
pub const TEST_PER_CLASS: usize = 100;
pub const DEFAULT_OUTLIERS: u32 = 7;

impl DatasetKind {
    pub fn name(&self) -> String {
        match self {
            DatasetKind::CnnPretrain => "cnn_pretrain".into(),
            DatasetKind::AanTrain => "aan_train".into(),
            DatasetKind::BaselineTest => "baseline_test".into(),
            DatasetKind::NbylTest => "nbyl_test".into(),
            DatasetKind::AanTrainOutliers(k) => format!("aan_train_outliers_{k}"),
        }
    }

    /// Parses a kind name; `outliers` supplies k for `aan_train_outliers`.
    pub fn parse(name: &str, outliers: Option<u32>) -> Result<Self> {
        let kind = match name {
            "cnn_pretrain" => DatasetKind::CnnPretrain,
            "aan_train" => DatasetKind::AanTrain,
            "baseline_test" => DatasetKind::BaselineTest,
            "nbyl_test" => DatasetKind::NbylTest,
            "aan_train_outliers" => DatasetKind::AanTrainOutliers(outliers.unwrap_or(DEFAULT_OUTLIERS)),
            other => match other.strip_prefix("aan_train_outliers_") {
                Some(k) => DatasetKind::AanTrainOutliers(k.parse().map_err(|_| WorldError::UnknownName {
                    what: "dataset kind",
                    value: other.to_string(),
                })?),
                None => {
                    return Err(WorldError::UnknownName {
                        what: "dataset kind",
                        value: other.to_string(),
                    })
                }
            },
        };
        Ok(kind)
    }

    /// Entry count per the dataset table.
    pub fn expected_len(&self) -> usize {
        match *self {
            DatasetKind::CnnPretrain => NUM_CLASSES * PRETRAIN_PER_CLASS,
            DatasetKind::AanTrain => NUM_CLASSES * TRAIN_PER_CLASS + OUTLIER_KINDS * DEFAULT_OUTLIERS as usize,
            DatasetKind::BaselineTest => NUM_CLASSES * TEST_PER_CLASS,
            DatasetKind::NbylTest => OUTLIER_KINDS * TEST_PER_CLASS,
            DatasetKind::AanTrainOutliers(k) => NUM_CLASSES * TRAIN_PER_CLASS + OUTLIER_KINDS * k as usize,
        }
    }
}

/// Outlier fraction among yellow-left training images, assuming the base
/// part contributes `big_yellow_left` rule-abiding yellow-left shapes.
pub fn outlier_fraction(k: u32, big_yellow_left: usize) -> f64 {
    let o = (OUTLIER_KINDS as u32 * k) as f64;
    o / (big_yellow_left as f64 + o)
}

/// (size, shape) of the i-th outlier kind.
pub fn outlier_kind(i: usize) -> (SizeClass, Shape) {
    let size = if i < 3 { SizeClass::Medium } else { SizeClass::Small };
    (size, Shape::ALL[i % 3])
}

fn class_attributes(class: usize) -> (SizeClass, Shape, ColorClass) {
    (SizeClass::ALL[class / 9], Shape::ALL[(class / 3) % 3], ColorClass::ALL[class % 3])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetEntry {
    /// Image path relative to the dataset directory.
    pub path: String,
    pub label: ImageLabel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub kind: DatasetKind,
    pub entries: Vec<DatasetEntry>,
}

fn image_path(i: usize) -> String {
    format!("images/{i:05}.png")
}

fn balanced_part(seed: u64, stream: u64, per_class: usize, out: &mut Vec<ImageLabel>) -> Result<()> {
    for class in 0..NUM_CLASSES {
        let (size, shape, color) = class_attributes(class);
        let constraints = SampleConstraints {
            forbid_nonbig_yellow_left: true,
            force: Forced {
                shape: Some(shape),
                color: Some(color),
                size: Some(size),
                left: None,
            },
        };
        for i in 0..per_class {
            let mut rng = seed::rng(seed, &[stream, class as u64, i as u64]);
            out.push(ImageLabel::new(sample_shape(&mut rng, &constraints)?));
        }
    }
    Ok(())
}

fn violating_part(seed: u64, stream: u64, per_kind: usize, out: &mut Vec<ImageLabel>) -> Result<()> {
    for kind in 0..OUTLIER_KINDS {
        let (size, shape) = outlier_kind(kind);
        let constraints = SampleConstraints {
            forbid_nonbig_yellow_left: false,
            force: Forced {
                shape: Some(shape),
                color: Some(ColorClass::Yellow),
                size: Some(size),
                left: Some(true),
            },
        };
        for i in 0..per_kind {
            let mut rng = seed::rng(seed, &[stream, kind as u64, i as u64]);
            out.push(ImageLabel::new(sample_shape(&mut rng, &constraints)?));
        }
    }
    Ok(())
}

impl DatasetManifest {
    pub fn generate(kind: DatasetKind, seed: u64) -> Result<Self> {
        let mut labels = Vec::with_capacity(kind.expected_len());
        match kind {
            DatasetKind::CnnPretrain => balanced_part(seed, STREAM_PRETRAIN, PRETRAIN_PER_CLASS, &mut labels)?,
            DatasetKind::BaselineTest => balanced_part(seed, STREAM_BASELINE, TEST_PER_CLASS, &mut labels)?,
            DatasetKind::NbylTest => violating_part(seed, STREAM_NBYL, TEST_PER_CLASS, &mut labels)?,
            DatasetKind::AanTrain => {
                balanced_part(seed, STREAM_AAN_BASE, TRAIN_PER_CLASS, &mut labels)?;
                violating_part(seed, STREAM_OUTLIERS, DEFAULT_OUTLIERS as usize, &mut labels)?;
            }
            DatasetKind::AanTrainOutliers(k) => {
                if !OUTLIER_COUNTS.contains(&k) {
                    return Err(WorldError::InvalidOutlierCount(k));
                }
                balanced_part(seed, STREAM_AAN_BASE, TRAIN_PER_CLASS, &mut labels)?;
                violating_part(seed, STREAM_OUTLIERS, k as usize, &mut labels)?;
            }
        }
        Ok(Self::from_labels(kind, seed, labels))
    }

    /// Pretraining set with `per_class` images per class. Entry `i` of class
    /// `c` is the same image for every `per_class`, so a reduced set is a
    /// subset of the full one.
    pub fn generate_pretrain(seed: u64, per_class: usize) -> Result<Self> {
        let mut labels = Vec::with_capacity(NUM_CLASSES * per_class);
        balanced_part(seed, STREAM_PRETRAIN, per_class, &mut labels)?;
        Ok(Self::from_labels(DatasetKind::CnnPretrain, seed, labels))
    }

    fn from_labels(kind: DatasetKind, seed: u64, labels: Vec<ImageLabel>) -> Self {
        let entries = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| DatasetEntry {
                path: image_path(i),
                label,
            })
            .collect();
        DatasetManifest { seed, kind, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<ImageLabel> {
        self.entries.iter().map(|e| e.label).collect()
    }

    /// Renders every entry and writes `images/NNNNN.png` plus `manifest.jsonl`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("images"))?;
        let mut manifest = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
        for entry in &self.entries {
            entry.label.spec.render()?.write_png(&dir.join(&entry.path))?;
            serde_json::to_writer(&mut manifest, &ManifestRecord::from(entry))?;
            manifest.write_all(b"\n")?;
        }
        manifest.flush()?;
        let meta = DatasetMeta {
            kind: self.kind.name(),
            seed: self.seed,
            count: self.len(),
        };
        fs::write(dir.join(META_FILE), serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    /// Reads a dataset directory written by [`DatasetManifest::write_to_dir`].
    pub fn read_from_dir(dir: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_slice(&fs::read(dir.join(META_FILE))?)?;
        let reader = BufReader::new(File::open(dir.join(MANIFEST_FILE))?);
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord =
                serde_json::from_str(&line).map_err(|source| WorldError::Manifest { line: i + 1, source })?;
            entries.push(rec.into_entry()?);
        }
        Ok(DatasetManifest {
            seed: meta.seed,
            kind: DatasetKind::parse(&meta.kind, None)?,
            entries,
        })
    }
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const META_FILE: &str = "dataset.json";

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    kind: String,
    seed: u64,
    count: usize,
}

/// One line of `manifest.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: String,
    pub shape: Shape,
    pub color: ColorClass,
    pub size: SizeClass,
    pub cx: i32,
    pub cy: i32,
    pub extent: i32,
    pub rgb: [u8; 3],
    pub is_left: bool,
    pub class_index: usize,
}

impl From<&DatasetEntry> for ManifestRecord {
    fn from(e: &DatasetEntry) -> Self {
        let s = e.label.spec;
        ManifestRecord {
            path: e.path.clone(),
            shape: s.shape,
            color: s.color,
            size: s.size,
            cx: s.center_x,
            cy: s.center_y,
            extent: s.extent,
            rgb: s.rgb,
            is_left: e.label.is_left,
            class_index: e.label.class_index,
        }
    }
}

impl ManifestRecord {
    fn into_entry(self) -> Result<DatasetEntry> {
        let spec = ShapeSpec {
            shape: self.shape,
            color: self.color,
            size: self.size,
            center_x: self.cx,
            center_y: self.cy,
            extent: self.extent,
            rgb: self.rgb,
        };
        if !spec.fits_canvas() {
            return Err(WorldError::OffCanvas {
                cx: spec.center_x,
                cy: spec.center_y,
                extent: spec.extent,
            });
        }
        Ok(DatasetEntry {
            path: self.path,
            label: ImageLabel {
                spec,
                is_left: self.is_left,
                class_index: self.class_index,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(shape: Shape, cx: i32, cy: i32, extent: i32) -> ShapeSpec {
        ShapeSpec {
            shape,
            color: ColorClass::Cyan,
            size: SizeClass::Medium,
            center_x: cx,
            center_y: cy,
            extent,
            rgb: [10, 240, 250],
        }
    }

    #[test]
    fn circle_center_is_foreground_corner_is_background() {
        let s = spec(Shape::Circle, 50, 50, 10);
        let img = s.render().unwrap();
        assert_eq!(img.get(50, 50), s.rgb);
        assert_eq!(img.get(0, 0), BACKGROUND);
    }

    #[test]
    fn square_pixel_count() {
        let img = spec(Shape::Square, 50, 50, 10).render().unwrap();
        assert_eq!(img.foreground_count(), 441);
    }

    #[test]
    fn circle_area_close_to_pi_r_squared() {
        for r in [5, 10, 13, 20, 25, 35] {
            let img = spec(Shape::Circle, 50, 50, r).render().unwrap();
            // Oracle: brute-force count over the whole canvas.
            let oracle = (0..100i32)
                .flat_map(|y| (0..100i32).map(move |x| (x, y)))
                .filter(|(x, y)| (x - 50).pow(2) + (y - 50).pow(2) <= r * r)
                .count();
            assert_eq!(img.foreground_count(), oracle);
            let area = PI * (r * r) as f64;
            assert!((oracle as f64 - area).abs() / area < 0.05, "r={r}: {oracle} vs {area}");
        }
    }

    #[test]
    fn triangle_stays_within_bounding_square() {
        let s = spec(Shape::Triangle, 40, 60, 20);
        let img = s.render().unwrap();
        for y in 0..100 {
            for x in 0..100 {
                if img.get(x, y) != BACKGROUND {
                    assert!((x as i32 - 40).abs() <= 20 && (y as i32 - 60).abs() <= 20);
                }
            }
        }
        // Equilateral: area ≈ √3 e².
        let area = 3f64.sqrt() * 400.0;
        let n = img.foreground_count() as f64;
        assert!((n - area).abs() / area < 0.1, "{n} vs {area}");
    }

    #[test]
    fn render_rejects_off_canvas() {
        assert!(matches!(
            spec(Shape::Circle, 5, 50, 10).render(),
            Err(WorldError::OffCanvas { .. })
        ));
        assert!(spec(Shape::Square, 89, 89, 10).render().is_ok());
        assert!(spec(Shape::Square, 90, 89, 10).render().is_err());
    }

    #[test]
    fn left_flag_examples() {
        assert!(spec(Shape::Circle, 20, 50, 15).is_left());
        assert_eq!(spec(Shape::Circle, 20, 50, 15).min_column(), Some(5));
        assert!(!spec(Shape::Circle, 70, 50, 15).is_left());
        assert_eq!(spec(Shape::Circle, 70, 50, 15).min_column(), Some(55));
        let boundary = spec(Shape::Square, 44, 50, 15);
        assert_eq!(boundary.min_column(), Some(29));
        assert!(boundary.is_left());
        assert!(!spec(Shape::Square, 45, 50, 15).is_left());
    }

    #[test]
    fn forced_attributes_hold() {
        let mut rng = seed::rng(1, &[]);
        let c = SampleConstraints {
            forbid_nonbig_yellow_left: false,
            force: Forced {
                size: Some(SizeClass::Small),
                color: Some(ColorClass::Yellow),
                left: Some(true),
                shape: None,
            },
        };
        for _ in 0..200 {
            let s = sample_shape(&mut rng, &c).unwrap();
            assert_eq!(s.size, SizeClass::Small);
            assert_eq!(s.color, ColorClass::Yellow);
            assert!(s.min_column().unwrap() < 30);
        }
    }

    #[test]
    fn rejection_enforces_hidden_rule() {
        let mut rng = seed::rng(2, &[]);
        let c = SampleConstraints {
            forbid_nonbig_yellow_left: true,
            ..Default::default()
        };
        for _ in 0..10_000 {
            assert!(!sample_shape(&mut rng, &c).unwrap().violates_rule());
        }
    }

    #[test]
    fn contradictory_constraints_error() {
        let mut rng = seed::rng(3, &[]);
        let c = SampleConstraints {
            forbid_nonbig_yellow_left: true,
            force: Forced {
                size: Some(SizeClass::Small),
                color: Some(ColorClass::Yellow),
                left: Some(true),
                shape: None,
            },
        };
        assert!(matches!(sample_shape(&mut rng, &c), Err(WorldError::Unsatisfiable(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = SampleConstraints::default();
        let mut a = seed::rng(11, &[4]);
        let mut b = seed::rng(11, &[4]);
        for _ in 0..100 {
            assert_eq!(sample_shape(&mut a, &c).unwrap(), sample_shape(&mut b, &c).unwrap());
        }
    }

    #[test]
    fn sampled_specs_respect_intervals() {
        let mut rng = seed::rng(5, &[]);
        for _ in 0..2000 {
            let s = sample_shape(&mut rng, &SampleConstraints::default()).unwrap();
            assert!(s.fits_canvas());
            let (lo, hi) = s.size.extent_range();
            assert!((lo..=hi).contains(&s.extent));
            for (v, b) in s.rgb.iter().zip(s.color.base_rgb()) {
                assert!((*v as i32 - b as i32).abs() <= COLOR_JITTER);
            }
        }
    }

    #[test]
    fn dataset_sizes() {
        assert_eq!(DatasetManifest::generate(DatasetKind::AanTrain, 1).unwrap().len(), 2742);
        assert_eq!(DatasetManifest::generate(DatasetKind::BaselineTest, 1).unwrap().len(), 2700);
        let nbyl = DatasetManifest::generate(DatasetKind::NbylTest, 1).unwrap();
        assert_eq!(nbyl.len(), 600);
        assert!(nbyl.entries.iter().all(|e| e.label.spec.violates_rule()));
        assert_eq!(DatasetKind::CnnPretrain.expected_len(), 24300);
        assert!(matches!(
            DatasetManifest::generate(DatasetKind::AanTrainOutliers(6), 1),
            Err(WorldError::InvalidOutlierCount(6))
        ));
    }

    #[test]
    fn outlier_sets_share_base_and_extend_outliers() {
        let k5 = DatasetManifest::generate(DatasetKind::AanTrainOutliers(5), 3).unwrap();
        let k7 = DatasetManifest::generate(DatasetKind::AanTrainOutliers(7), 3).unwrap();
        let train = DatasetManifest::generate(DatasetKind::AanTrain, 3).unwrap();
        assert_eq!(k7.labels(), train.labels());
        assert_eq!(k5.labels()[..2700], k7.labels()[..2700]);
        let outliers = k7.entries.iter().filter(|e| e.label.spec.violates_rule()).count();
        assert_eq!(outliers, 42);
        assert!((outlier_fraction(7, 246) - 42.0 / 288.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_pretrain_is_subset() {
        let small = DatasetManifest::generate_pretrain(9, 3).unwrap();
        let large = DatasetManifest::generate_pretrain(9, 5).unwrap();
        for class in 0..NUM_CLASSES {
            assert_eq!(small.entries[class * 3].label, large.entries[class * 5].label);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [
            DatasetKind::CnnPretrain,
            DatasetKind::AanTrain,
            DatasetKind::BaselineTest,
            DatasetKind::NbylTest,
            DatasetKind::AanTrainOutliers(40),
        ] {
            assert_eq!(DatasetKind::parse(&kind.name(), None).unwrap(), kind);
        }
        assert_eq!(
            DatasetKind::parse("aan_train_outliers", Some(20)).unwrap(),
            DatasetKind::AanTrainOutliers(20)
        );
    }
}
