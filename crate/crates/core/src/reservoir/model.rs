use std::borrow::Borrow;
use std::fs::File;
use std::hash::{DefaultHasher, Hasher};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::network::{Architecture, Dims, Layer, LayerSpec, Network};
use super::{ReservoirError, FEATURE_DIM};
use crate::binio::{LeReader, LeWriter};
use crate::world::{Image, CANVAS, CHANNELS};

/// Floor for per-feature normalization constants.
pub const NORM_EPSILON: f32 = 1e-6;

const MODEL_MAGIC: &[u8; 4] = b"AANR";
const MODEL_VERSION: u32 = 1;

/// Planar `3 × 100 × 100` input scaled to [0, 1].
pub fn image_to_input(img: &Image) -> Vec<f32> {
    let raw = img.raw();
    let plane = CANVAS * CANVAS;
    let mut out = vec![0.0; CHANNELS * plane];
    for (p, px) in raw.chunks_exact(CHANNELS).enumerate() {
        for c in 0..CHANNELS {
            out[c * plane + p] = px[c] as f32 / 255.0;
        }
    }
    out
}

/// Output of one reservoir forward pass.
#[derive(Clone, Debug)]
pub struct ReservoirOutput {
    /// Post-ReLU output of each convolution layer with its shape.
    pub conv_layers: Vec<(Dims, Vec<f32>)>,
    /// 27 class logits followed by the left/non-left logit.
    pub class_scores: Vec<f32>,
}

impl ReservoirOutput {
    /// Concatenation of the feature layers, unnormalized.
    pub fn raw_features(&self, arch: &Architecture) -> Vec<f32> {
        let feature_flags = arch.layers.iter().filter_map(|l| match l {
            LayerSpec::Conv { feature, .. } => Some(*feature),
            _ => None,
        });
        self.conv_layers
            .iter()
            .zip(feature_flags)
            .filter(|(_, f)| *f)
            .flat_map(|((_, v), _)| v.iter().copied())
            .collect()
    }

    pub fn predicted_class(&self) -> usize {
        let nc = self.class_scores.len() - 1;
        (0..nc)
            .max_by(|&a, &b| self.class_scores[a].total_cmp(&self.class_scores[b]))
            .unwrap_or(0)
    }

    pub fn predicted_left(&self) -> bool {
        *self.class_scores.last().expect("non-empty head") > 0.0
    }
}

/// Trained conv net plus per-feature normalization constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirModel {
    net: Network<f32>,
    /// Per-feature maxima observed on the pretraining set; empty until fitted.
    norm: Vec<f32>,
}

impl ReservoirModel {
    pub fn new(net: Network<f32>) -> Self {
        ReservoirModel { net, norm: Vec::new() }
    }

    pub fn network(&self) -> &Network<f32> {
        &self.net
    }

    pub fn architecture(&self) -> &Architecture {
        self.net.architecture()
    }

    pub fn normalization(&self) -> &[f32] {
        &self.norm
    }

    pub fn is_normalized(&self) -> bool {
        !self.norm.is_empty()
    }

    pub fn forward_input(&self, input: &[f32]) -> Result<ReservoirOutput, ReservoirError> {
        let want = self.architecture().input.len();
        if input.len() != want {
            return Err(ReservoirError::Shape(format!("input has {} values, expected {want}", input.len())));
        }
        let pass = self.net.forward(input);
        let mut conv_layers = Vec::new();
        for (layer, out) in self.net.layers.iter().zip(pass.outputs.iter()) {
            if let Layer::Conv { output, .. } = layer {
                conv_layers.push((*output, out.clone()));
            }
        }
        Ok(ReservoirOutput {
            conv_layers,
            class_scores: pass.logits().to_vec(),
        })
    }

    pub fn forward(&self, img: &Image) -> Result<ReservoirOutput, ReservoirError> {
        self.forward_input(&image_to_input(img))
    }

    pub fn raw_features(&self, img: &Image) -> Result<Vec<f32>, ReservoirError> {
        Ok(self.forward(img)?.raw_features(self.architecture()))
    }

    /// Sets each normalization constant to the feature's maximum over
    /// `images`, floored at [`NORM_EPSILON`].
    pub fn fit_normalization<I, B>(&mut self, images: I) -> Result<(), ReservoirError>
    where
        I: IntoIterator<Item = B>,
        B: Borrow<Image>,
    {
        let dim = self.architecture().feature_dim()?;
        let mut max = vec![NORM_EPSILON; dim];
        for img in images {
            for (m, v) in max.iter_mut().zip(self.raw_features(img.borrow())?) {
                if v > *m {
                    *m = v;
                }
            }
        }
        self.norm = max;
        Ok(())
    }

    pub fn set_normalization(&mut self, norm: Vec<f32>) -> Result<(), ReservoirError> {
        let dim = self.architecture().feature_dim()?;
        if norm.len() != dim || norm.iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(ReservoirError::Shape("normalization constants must be positive, one per feature".into()));
        }
        self.norm = norm;
        Ok(())
    }

    /// Normalizes raw activations in place: divide by the constant, clamp to [0, 1].
    pub fn normalize(&self, raw: &mut [f32]) {
        for (v, &m) in raw.iter_mut().zip(&self.norm) {
            *v = (*v / m).clamp(0.0, 1.0);
        }
    }

    /// Normalized feature-layer activations, each in [0, 1].
    pub fn extract_features(&self, img: &Image) -> Result<Vec<f32>, ReservoirError> {
        if !self.is_normalized() {
            return Err(ReservoirError::Shape("normalization has not been fitted".into()));
        }
        let mut f = self.raw_features(img)?;
        self.normalize(&mut f);
        Ok(f)
    }

    /// Hash of every parameter and normalization constant, bit-exact.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for v in self.net.params().iter().chain(&self.norm) {
            h.write_u32(v.to_bits());
        }
        h.finish()
    }

    pub fn save(&self, path: &Path) -> Result<(), ReservoirError> {
        let mut w = LeWriter::new(BufWriter::new(File::create(path)?));
        w.bytes(MODEL_MAGIC)?;
        w.u32(MODEL_VERSION)?;
        let arch = self.architecture();
        for d in [arch.input.c, arch.input.h, arch.input.w, arch.num_classes] {
            w.u32(d as u32)?;
        }
        w.u32(arch.layers.len() as u32)?;
        for l in &arch.layers {
            match *l {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    feature,
                } => {
                    w.u32(0)?;
                    w.u32(out_channels as u32)?;
                    w.u32(kernel as u32)?;
                    w.u32(feature as u32)?;
                }
                LayerSpec::MaxPool2 => w.u32(1)?,
                LayerSpec::Dense { out } => {
                    w.u32(2)?;
                    w.u32(out as u32)?;
                }
            }
        }
        let net = &self.net;
        for l in &net.layers {
            if let Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } = l {
                w.f32_vec(weight)?;
                w.f32_vec(bias)?;
            }
        }
        w.f32_vec(&self.norm)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ReservoirError> {
        let mut r = LeReader::new(BufReader::new(File::open(path)?));
        if &r.bytes::<4>()? != MODEL_MAGIC {
            return Err(ReservoirError::Format("not a reservoir model file".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(ReservoirError::Format(format!("unsupported model version {version}")));
        }
        let (c, h, w, nc) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let n_layers = r.u32()?;
        if n_layers > 64 {
            return Err(ReservoirError::Format(format!("{n_layers} layers")));
        }
        let mut layers = Vec::new();
        for _ in 0..n_layers {
            layers.push(match r.u32()? {
                0 => LayerSpec::Conv {
                    out_channels: r.u32()? as usize,
                    kernel: r.u32()? as usize,
                    feature: r.u32()? != 0,
                },
                1 => LayerSpec::MaxPool2,
                2 => LayerSpec::Dense { out: r.u32()? as usize },
                t => return Err(ReservoirError::Format(format!("unknown layer tag {t}"))),
            });
        }
        let arch = Architecture {
            input: Dims::new(c as usize, h as usize, w as usize),
            layers,
            num_classes: nc as usize,
        };
        // Initialise with the right shapes, then overwrite every buffer.
        let mut net = Network::<f32>::init(&arch, &mut crate::seed::rng(0, &[]))?;
        for buf in net.param_buffers_mut() {
            let v = r.f32_vec()?;
            if v.len() != buf.len() {
                return Err(ReservoirError::Format("parameter block size mismatch".into()));
            }
            *buf = v;
        }
        let norm = r.f32_vec()?;
        let mut model = ReservoirModel::new(net);
        if !norm.is_empty() {
            model.set_normalization(norm).map_err(|e| ReservoirError::Format(e.to_string()))?;
        }
        Ok(model)
    }

    /// Standard architecture check: the exported feature width must be 4416.
    pub fn has_standard_features(&self) -> bool {
        self.architecture().feature_dim().ok() == Some(FEATURE_DIM)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::world::{ColorClass, Shape, ShapeSpec, SizeClass};

    fn model() -> ReservoirModel {
        let net = Network::init(&Architecture::standard(), &mut seed::rng(1, &[])).unwrap();
        ReservoirModel::new(net)
    }

    fn img(cx: i32, size: SizeClass, extent: i32) -> Image {
        ShapeSpec {
            shape: Shape::Circle,
            color: ColorClass::Magenta,
            size,
            center_x: cx,
            center_y: 50,
            extent,
            rgb: [250, 10, 240],
        }
        .render()
        .unwrap()
    }

    #[test]
    fn fresh_model_shapes_and_finiteness() {
        let m = model();
        let out = m.forward(&img(50, SizeClass::Big, 30)).unwrap();
        assert_eq!(out.conv_layers.len(), 6);
        assert_eq!(out.class_scores.len(), 28);
        assert!(out.class_scores.iter().all(|v| v.is_finite()));
        assert_eq!(out.raw_features(m.architecture()).len(), FEATURE_DIM);
    }

    #[test]
    fn normalization_floor_and_max() {
        let mut m = model();
        let imgs = vec![img(50, SizeClass::Big, 30), img(20, SizeClass::Small, 6)];
        m.fit_normalization(&imgs).unwrap();
        assert!(m.normalization().iter().all(|&v| v >= NORM_EPSILON));
        let raws: Vec<Vec<f32>> = imgs.iter().map(|i| m.raw_features(i).unwrap()).collect();
        for (j, &c) in m.normalization().iter().enumerate() {
            let max = raws.iter().map(|r| r[j]).fold(0.0f32, f32::max);
            if max > NORM_EPSILON {
                assert_eq!(c, max);
            } else {
                assert_eq!(c, NORM_EPSILON);
            }
        }
        for (k, i) in imgs.iter().enumerate() {
            let f = m.extract_features(i).unwrap();
            assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
            // The image that set a feature's maximum maps it to exactly 1.
            for (j, &c) in m.normalization().iter().enumerate() {
                if c > NORM_EPSILON && raws[k][j] == c {
                    assert_eq!(f[j], 1.0);
                }
            }
        }
    }

    #[test]
    fn never_active_feature_is_floored() {
        let mut m = model();
        m.fit_normalization(std::iter::empty::<Image>()).unwrap();
        assert!(m.normalization().iter().all(|&v| v == NORM_EPSILON));
        let mut raw = vec![0.0; FEATURE_DIM];
        m.normalize(&mut raw);
        assert!(raw.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unfitted_model_refuses_to_extract() {
        assert!(model().extract_features(&img(50, SizeClass::Big, 30)).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let mut m = model();
        m.fit_normalization([&img(50, SizeClass::Big, 30)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        m.save(&path).unwrap();
        let back = ReservoirModel::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.checksum(), m.checksum());
    }

    #[test]
    fn load_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"NOPE\x01\0\0\0").unwrap();
        assert!(matches!(ReservoirModel::load(&path), Err(ReservoirError::Format(_))));
        std::fs::write(&path, b"AANR\x01\0").unwrap();
        assert!(matches!(ReservoirModel::load(&path), Err(ReservoirError::Truncated)));
    }
}
