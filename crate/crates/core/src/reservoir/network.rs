//! Plain convolutional network: valid 2-D convolutions with ReLU, 2×2 max
//! pooling, and one linear classifier head. Forward and backward passes are
//! written out by hand; only the matrix products go through `gemm`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::real::{gemm, Mat, Real};
use super::ReservoirError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub const fn new(c: usize, h: usize, w: usize) -> Self {
        Dims { c, h, w }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    /// Valid convolution followed by ReLU. `feature` marks layers whose
    /// activations are exported as reservoir features.
    Conv {
        out_channels: usize,
        kernel: usize,
        feature: bool,
    },
    MaxPool2,
    /// Linear classifier head; must be the last layer.
    Dense { out: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input: Dims,
    pub layers: Vec<LayerSpec>,
    /// Size of the softmax block; one extra logistic output follows it.
    pub num_classes: usize,
}

impl Architecture {
    /// The reservoir used by the agent: six convolutions, three poolings.
    ///
    /// 100×100×3 → 96×96×4 → (pool) → 44×44×32 → (pool) → 18×18×64 → (pool)
    /// → 5×5×128 → 3×3×128 → 1×1×64, features from the last three.
    pub fn standard() -> Self {
        use LayerSpec::*;
        let conv = |out_channels, kernel, feature| Conv {
            out_channels,
            kernel,
            feature,
        };
        Architecture {
            input: Dims::new(3, 100, 100),
            layers: vec![
                conv(4, 5, false),
                MaxPool2,
                conv(32, 5, false),
                MaxPool2,
                conv(64, 5, false),
                MaxPool2,
                conv(128, 5, true),
                conv(128, 3, true),
                conv(64, 3, true),
                Dense { out: 28 },
            ],
            num_classes: 27,
        }
    }

    /// Output dimensions of every layer, validating the stack on the way.
    pub fn output_dims(&self) -> Result<Vec<Dims>, ReservoirError> {
        let mut dims = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            dims = match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    ..
                } => {
                    if kernel == 0 || kernel > dims.h || kernel > dims.w || out_channels == 0 {
                        return Err(ReservoirError::Architecture(format!(
                            "layer {i}: kernel {kernel} does not fit {dims:?}"
                        )));
                    }
                    Dims::new(out_channels, dims.h - kernel + 1, dims.w - kernel + 1)
                }
                LayerSpec::MaxPool2 => {
                    if dims.h < 2 || dims.w < 2 {
                        return Err(ReservoirError::Architecture(format!("layer {i}: cannot pool {dims:?}")));
                    }
                    Dims::new(dims.c, dims.h / 2, dims.w / 2)
                }
                LayerSpec::Dense { out } => {
                    if i + 1 != self.layers.len() {
                        return Err(ReservoirError::Architecture("dense head must be last".into()));
                    }
                    if out != self.num_classes + 1 {
                        return Err(ReservoirError::Architecture(format!(
                            "head has {out} outputs, expected {}",
                            self.num_classes + 1
                        )));
                    }
                    Dims::new(out, 1, 1)
                }
            };
            out.push(dims);
        }
        if !matches!(self.layers.last(), Some(LayerSpec::Dense { .. })) {
            return Err(ReservoirError::Architecture("missing dense head".into()));
        }
        Ok(out)
    }

    /// Output dimensions of the convolution layers, in order.
    pub fn conv_dims(&self) -> Result<Vec<Dims>, ReservoirError> {
        Ok(self
            .output_dims()?
            .into_iter()
            .zip(&self.layers)
            .filter(|(_, l)| matches!(l, LayerSpec::Conv { .. }))
            .map(|(d, _)| d)
            .collect())
    }

    pub fn feature_dim(&self) -> Result<usize, ReservoirError> {
        Ok(self
            .output_dims()?
            .into_iter()
            .zip(&self.layers)
            .filter(|(_, l)| matches!(l, LayerSpec::Conv { feature: true, .. }))
            .map(|(d, _)| d.len())
            .sum())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Layer<T> {
    Conv {
        input: Dims,
        output: Dims,
        kernel: usize,
        feature: bool,
        /// `out_channels × (in_channels·k·k)`, row-major.
        weight: Vec<T>,
        bias: Vec<T>,
    },
    Pool {
        input: Dims,
        output: Dims,
    },
    Dense {
        inputs: usize,
        outputs: usize,
        weight: Vec<T>,
        bias: Vec<T>,
    },
}

/// Weights and biases of a convolutional network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub(crate) arch: Architecture,
    pub(crate) layers: Vec<Layer<T>>,
}

/// Everything the backward pass needs from one forward pass.
pub struct Pass<T> {
    /// Output of every layer (post-ReLU for convolutions, logits for the head).
    pub outputs: Vec<Vec<T>>,
    cols: Vec<Vec<T>>,
    argmax: Vec<Vec<u32>>,
}

impl<T> Pass<T> {
    pub fn logits(&self) -> &[T] {
        self.outputs.last().expect("network has layers")
    }
}

/// Parameter gradients, one `(weight, bias)` pair per layer (empty for pools).
#[derive(Clone, Debug)]
pub struct Grads<T> {
    pub(crate) layers: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Real> Grads<T> {
    pub fn zero_like(net: &Network<T>) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                    (vec![T::zero(); weight.len()], vec![T::zero(); bias.len()])
                }
                Layer::Pool { .. } => (Vec::new(), Vec::new()),
            })
            .collect();
        Grads { layers }
    }

    pub fn clear(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|v| *v = T::zero());
            b.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Flat view in the same order as [`Network::params`].
    pub fn flat(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

fn im2col<T: Real>(input: &[T], d: Dims, k: usize, out: Dims, cols: &mut Vec<T>) {
    let n = out.h * out.w;
    cols.clear();
    cols.resize(d.c * k * k * n, T::zero());
    for c in 0..d.c {
        let plane = &input[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k * k + ky * k + kx) * n;
                let dst = &mut cols[row..row + n];
                for oy in 0..out.h {
                    let src = &plane[(oy + ky) * d.w + kx..(oy + ky) * d.w + kx + out.w];
                    dst[oy * out.w..(oy + 1) * out.w].copy_from_slice(src);
                }
            }
        }
    }
}

fn col2im<T: Real>(dcols: &[T], d: Dims, k: usize, out: Dims, dinput: &mut [T]) {
    let n = out.h * out.w;
    for c in 0..d.c {
        let plane = &mut dinput[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k * k + ky * k + kx) * n;
                let src = &dcols[row..row + n];
                for oy in 0..out.h {
                    let dst = &mut plane[(oy + ky) * d.w + kx..(oy + ky) * d.w + kx + out.w];
                    for (a, &b) in dst.iter_mut().zip(&src[oy * out.w..(oy + 1) * out.w]) {
                        *a = *a + b;
                    }
                }
            }
        }
    }
}

impl<T: Real> Network<T> {
    /// He-normal initialisation, zero biases.
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self, ReservoirError> {
        let dims = arch.output_dims()?;
        let mut input = arch.input;
        let mut layers = Vec::with_capacity(arch.layers.len());
        for (spec, &output) in arch.layers.iter().zip(&dims) {
            let layer = match *spec {
                LayerSpec::Conv { kernel, feature, .. } => {
                    let fan_in = input.c * kernel * kernel;
                    Layer::Conv {
                        input,
                        output,
                        kernel,
                        feature,
                        weight: he_normal(rng, output.c * fan_in, fan_in),
                        bias: vec![T::zero(); output.c],
                    }
                }
                LayerSpec::MaxPool2 => Layer::Pool { input, output },
                LayerSpec::Dense { out } => Layer::Dense {
                    inputs: input.len(),
                    outputs: out,
                    weight: he_normal(rng, out * input.len(), input.len()),
                    bias: vec![T::zero(); out],
                },
            };
            layers.push(layer);
            input = output;
        }
        Ok(Network {
            arch: arch.clone(),
            layers,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn forward(&self, input: &[T]) -> Pass<T> {
        assert_eq!(input.len(), self.arch.input.len(), "input size mismatch");
        let mut outputs: Vec<Vec<T>> = Vec::with_capacity(self.layers.len());
        let mut cols = Vec::with_capacity(self.layers.len());
        let mut argmax = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x: &[T] = outputs.last().map_or(input, |v| v.as_slice());
            let (y, c, a) = match layer {
                Layer::Conv {
                    input: d,
                    output: o,
                    kernel,
                    weight,
                    bias,
                    ..
                } => {
                    let mut col = Vec::new();
                    im2col(x, *d, *kernel, *o, &mut col);
                    let n = o.h * o.w;
                    let kk = d.c * kernel * kernel;
                    let mut y = vec![T::zero(); o.c * n];
                    for (ch, row) in y.chunks_exact_mut(n).enumerate() {
                        row.iter_mut().for_each(|v| *v = bias[ch]);
                    }
                    gemm(Mat::new(weight, o.c, kk), Mat::new(&col, kk, n), T::one(), &mut y);
                    y.iter_mut().for_each(|v| {
                        if *v < T::zero() {
                            *v = T::zero()
                        }
                    });
                    (y, col, Vec::new())
                }
                Layer::Pool { input: d, output: o } => {
                    let mut y = vec![T::zero(); o.len()];
                    let mut idx = vec![0u32; o.len()];
                    for c in 0..o.c {
                        for oy in 0..o.h {
                            for ox in 0..o.w {
                                let mut best = c * d.h * d.w + 2 * oy * d.w + 2 * ox;
                                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                                    let j = c * d.h * d.w + (2 * oy + dy) * d.w + 2 * ox + dx;
                                    if x[j] > x[best] {
                                        best = j;
                                    }
                                }
                                let o_i = c * o.h * o.w + oy * o.w + ox;
                                y[o_i] = x[best];
                                idx[o_i] = best as u32;
                            }
                        }
                    }
                    (y, Vec::new(), idx)
                }
                Layer::Dense {
                    inputs,
                    outputs: n_out,
                    weight,
                    bias,
                } => {
                    let mut y = bias.clone();
                    gemm(Mat::new(weight, *n_out, *inputs), Mat::new(x, *inputs, 1), T::one(), &mut y);
                    (y, Vec::new(), Vec::new())
                }
            };
            outputs.push(y);
            cols.push(c);
            argmax.push(a);
        }
        Pass { outputs, cols, argmax }
    }

    /// Accumulates parameter gradients for one sample into `grads`.
    pub fn backward(&self, input: &[T], pass: &Pass<T>, dlogits: &[T], grads: &mut Grads<T>) {
        let mut delta: Vec<T> = dlogits.to_vec();
        for li in (0..self.layers.len()).rev() {
            let x: &[T] = if li == 0 { input } else { &pass.outputs[li - 1] };
            let need_input_grad = li > 0;
            let (gw, gb) = &mut grads.layers[li];
            match &self.layers[li] {
                Layer::Dense {
                    inputs,
                    outputs: n_out,
                    weight,
                    ..
                } => {
                    gemm(Mat::new(&delta, *n_out, 1), Mat::new(x, 1, *inputs), T::one(), gw);
                    for (g, &d) in gb.iter_mut().zip(&delta) {
                        *g = *g + d;
                    }
                    if need_input_grad {
                        let mut dx = vec![T::zero(); *inputs];
                        gemm(Mat::new(weight, *n_out, *inputs).t(), Mat::new(&delta, *n_out, 1), T::zero(), &mut dx);
                        delta = dx;
                    }
                }
                Layer::Pool { input: d, .. } => {
                    let mut dx = vec![T::zero(); d.len()];
                    for (&j, &g) in pass.argmax[li].iter().zip(&delta) {
                        dx[j as usize] = dx[j as usize] + g;
                    }
                    delta = dx;
                }
                Layer::Conv {
                    input: d,
                    output: o,
                    kernel,
                    weight,
                    ..
                } => {
                    let y = &pass.outputs[li];
                    for (g, &v) in delta.iter_mut().zip(y) {
                        if v <= T::zero() {
                            *g = T::zero();
                        }
                    }
                    let n = o.h * o.w;
                    let kk = d.c * kernel * kernel;
                    let col = &pass.cols[li];
                    gemm(Mat::new(&delta, o.c, n), Mat::new(col, kk, n).t(), T::one(), gw);
                    for (ch, row) in delta.chunks_exact(n).enumerate() {
                        gb[ch] = row.iter().fold(gb[ch], |a, &b| a + b);
                    }
                    if need_input_grad {
                        let mut dcols = vec![T::zero(); kk * n];
                        gemm(Mat::new(weight, o.c, kk).t(), Mat::new(&delta, o.c, n), T::zero(), &mut dcols);
                        let mut dx = vec![T::zero(); d.len()];
                        col2im(&dcols, *d, *kernel, *o, &mut dx);
                        delta = dx;
                    }
                }
            }
        }
    }

    /// Flat copy of all parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => {
                    weight.iter().chain(bias.iter()).copied().collect::<Vec<_>>()
                }
                Layer::Pool { .. } => Vec::new(),
            })
            .collect()
    }

    /// Mutable parameter buffers in the order used by [`Network::params`].
    pub fn param_buffers_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            if let Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } = l {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().len()
    }
}

fn he_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, fan_in: usize) -> Vec<T> {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
    (0..n).map(|_| T::from_f64(normal.sample(rng))).collect()
}

/// Softmax cross-entropy over the class block plus logistic loss on the final
/// left/non-left logit. Returns the loss and writes its gradient to `dlogits`.
pub fn head_loss<T: Real>(logits: &[T], class: usize, left: bool, dlogits: &mut [T]) -> f64 {
    let nc = logits.len() - 1;
    let max = logits[..nc].iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
    let exps: Vec<f64> = logits[..nc].iter().map(|v| (v.as_f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut loss = -(exps[class] / sum).ln();
    for (i, e) in exps.iter().enumerate() {
        let p = e / sum;
        dlogits[i] = T::from_f64(if i == class { p - 1.0 } else { p });
    }
    let z = logits[nc].as_f64();
    let y = if left { 1.0 } else { 0.0 };
    // log(1 + e^z) - y z, written to stay finite for large |z|.
    loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    dlogits[nc] = T::from_f64(1.0 / (1.0 + (-z).exp()) - y);
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    pub(crate) fn tiny_arch() -> Architecture {
        Architecture {
            input: Dims::new(2, 8, 8),
            layers: vec![
                LayerSpec::Conv {
                    out_channels: 3,
                    kernel: 3,
                    feature: false,
                },
                LayerSpec::MaxPool2,
                LayerSpec::Conv {
                    out_channels: 4,
                    kernel: 2,
                    feature: true,
                },
                LayerSpec::Conv {
                    out_channels: 3,
                    kernel: 2,
                    feature: true,
                },
                LayerSpec::Dense { out: 4 },
            ],
            num_classes: 3,
        }
    }

    #[test]
    fn standard_shapes() {
        let dims = Architecture::standard().conv_dims().unwrap();
        let want = [
            Dims::new(4, 96, 96),
            Dims::new(32, 44, 44),
            Dims::new(64, 18, 18),
            Dims::new(128, 5, 5),
            Dims::new(128, 3, 3),
            Dims::new(64, 1, 1),
        ];
        assert_eq!(dims, want);
        assert_eq!(Architecture::standard().feature_dim().unwrap(), 4416);
    }

    #[test]
    fn bad_architectures_rejected() {
        let mut a = tiny_arch();
        a.layers.pop();
        assert!(a.output_dims().is_err());
        let mut a = tiny_arch();
        a.layers[0] = LayerSpec::Conv {
            out_channels: 2,
            kernel: 9,
            feature: false,
        };
        assert!(a.output_dims().is_err());
        let mut a = tiny_arch();
        a.layers[4] = LayerSpec::Dense { out: 3 };
        assert!(a.output_dims().is_err());
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_activations() {
        let mut rng = seed::rng(0, &[]);
        let net: Network<f32> = Network::init(&Architecture::standard(), &mut rng).unwrap();
        let pass = net.forward(&vec![0.0; 30_000]);
        for out in &pass.outputs {
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn conv_matches_direct_convolution() {
        let mut rng = seed::rng(3, &[]);
        let net: Network<f64> = Network::init(&tiny_arch(), &mut rng).unwrap();
        let input: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pass = net.forward(&input);
        let Layer::Conv { weight, bias, .. } = &net.layers[0] else { unreachable!() };
        for oc in 0..3 {
            for oy in 0..6 {
                for ox in 0..6 {
                    let mut s = bias[oc];
                    for ic in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                s += weight[oc * 18 + ic * 9 + ky * 3 + kx] * input[ic * 64 + (oy + ky) * 8 + ox + kx];
                            }
                        }
                    }
                    let got = pass.outputs[0][oc * 36 + oy * 6 + ox];
                    assert!((got - s.max(0.0)).abs() < 1e-12);
                }
            }
        }
    }

    /// Central finite differences over every parameter of a tiny network.
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seed::rng(42, &[]);
        let mut net: Network<f64> = Network::init(&tiny_arch(), &mut rng).unwrap();
        // Positive biases keep most ReLUs away from their kink.
        for buf in net.param_buffers_mut().into_iter().skip(1).step_by(2) {
            buf.iter_mut().for_each(|b| *b = 0.1);
        }
        let input: Vec<f64> = (0..128).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (class, left) = (1, true);
        let loss_of = |net: &Network<f64>| {
            let pass = net.forward(&input);
            let mut d = vec![0.0; 4];
            head_loss(pass.logits(), class, left, &mut d)
        };
        let pass = net.forward(&input);
        let mut dl = vec![0.0; 4];
        head_loss(pass.logits(), class, left, &mut dl);
        let mut grads = Grads::zero_like(&net);
        net.backward(&input, &pass, &dl, &mut grads);
        let analytic = grads.flat();

        let h = 1e-6;
        let mut idx = 0;
        let n_buffers = net.param_buffers_mut().len();
        for b in 0..n_buffers {
            let len = net.param_buffers_mut()[b].len();
            for i in 0..len {
                let orig = net.param_buffers_mut()[b][i];
                net.param_buffers_mut()[b][i] = orig + h;
                let up = loss_of(&net);
                net.param_buffers_mut()[b][i] = orig - h;
                let down = loss_of(&net);
                net.param_buffers_mut()[b][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                assert!(rel <= 1e-4, "param {idx}: analytic {a} numeric {numeric} rel {rel}");
                idx += 1;
            }
        }
        assert_eq!(idx, analytic.len());
    }

    #[test]
    fn head_loss_gradient_sums() {
        let logits = [0.3f64, -1.0, 2.0, 0.5];
        let mut d = [0.0; 4];
        let loss = head_loss(&logits, 2, false, &mut d);
        assert!(loss > 0.0);
        let s: f64 = d[..3].iter().sum();
        assert!(s.abs() < 1e-12);
        assert!((d[3] - 1.0 / (1.0 + (-0.5f64).exp())).abs() < 1e-12);
    }
}
