//! A frozen VGG19-topology feature extractor.
//!
//! Activations are taken after each ReLU, channels-last (H x W x N). The
//! forward pass records enough state (post-activation outputs, pooling
//! argmax choices) to backpropagate a gradient from any selected layer to
//! the input image, which is all the synthesis loop needs; weights are never
//! trained. Convolutions are 3x3, stride 1, zero padding 1, evaluated as
//! nine whole-image GEMMs through a shifted-window gather buffer one ninth
//! the size of a full im2col expansion.
//!
//! Checkpoints use the safetensors format with either `conv1_1.weight` or
//! torchvision `features.0.weight` tensor naming, so genuine pretrained
//! weights drop in unchanged; for fully offline runs a seeded He-initialized
//! checkpoint can be generated (see [`write_random_weights`]).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safetensors::tensor::{Dtype, TensorView};
use safetensors::SafeTensors;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::img::Image;
use crate::num::Real;
use crate::sw::FeatureStack;

/// Channel statistics the backbone was trained under (ImageNet).
pub const INPUT_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const INPUT_STD: [f64; 3] = [0.229, 0.224, 0.225];

struct ConvSpec {
    tag: &'static str,
    torch_index: usize,
    in_ch: usize,
    out_ch: usize,
    pool_after: bool,
}

const VGG19_CONVS: [ConvSpec; 16] = [
    ConvSpec { tag: "conv1_1", torch_index: 0, in_ch: 3, out_ch: 64, pool_after: false },
    ConvSpec { tag: "conv1_2", torch_index: 2, in_ch: 64, out_ch: 64, pool_after: true },
    ConvSpec { tag: "conv2_1", torch_index: 5, in_ch: 64, out_ch: 128, pool_after: false },
    ConvSpec { tag: "conv2_2", torch_index: 7, in_ch: 128, out_ch: 128, pool_after: true },
    ConvSpec { tag: "conv3_1", torch_index: 10, in_ch: 128, out_ch: 256, pool_after: false },
    ConvSpec { tag: "conv3_2", torch_index: 12, in_ch: 256, out_ch: 256, pool_after: false },
    ConvSpec { tag: "conv3_3", torch_index: 14, in_ch: 256, out_ch: 256, pool_after: false },
    ConvSpec { tag: "conv3_4", torch_index: 16, in_ch: 256, out_ch: 256, pool_after: true },
    ConvSpec { tag: "conv4_1", torch_index: 19, in_ch: 256, out_ch: 512, pool_after: false },
    ConvSpec { tag: "conv4_2", torch_index: 21, in_ch: 512, out_ch: 512, pool_after: false },
    ConvSpec { tag: "conv4_3", torch_index: 23, in_ch: 512, out_ch: 512, pool_after: false },
    ConvSpec { tag: "conv4_4", torch_index: 25, in_ch: 512, out_ch: 512, pool_after: true },
    ConvSpec { tag: "conv5_1", torch_index: 28, in_ch: 512, out_ch: 512, pool_after: false },
    ConvSpec { tag: "conv5_2", torch_index: 30, in_ch: 512, out_ch: 512, pool_after: false },
    ConvSpec { tag: "conv5_3", torch_index: 32, in_ch: 512, out_ch: 512, pool_after: false },
    ConvSpec { tag: "conv5_4", torch_index: 34, in_ch: 512, out_ch: 512, pool_after: true },
];

fn conv_index(tag: &str) -> Option<usize> {
    VGG19_CONVS.iter().position(|c| c.tag == tag)
}

/// All convolution tags in network order.
pub fn backbone_tags() -> impl Iterator<Item = &'static str> {
    VGG19_CONVS.iter().map(|c| c.tag)
}

/// Which layers feed the channel term and which feed the height term.
///
/// Defaults: the channel term uses the first 12 convolutions (blocks one
/// through four); the height term uses the first two convolutions of every
/// block, all five blocks included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSelection {
    pub channel_layers: Vec<String>,
    pub height_layers: Vec<String>,
}

impl Default for LayerSelection {
    fn default() -> Self {
        let channel = VGG19_CONVS[..12].iter().map(|c| c.tag.to_owned()).collect();
        let height = VGG19_CONVS
            .iter()
            .filter(|c| c.tag.ends_with("_1") || c.tag.ends_with("_2"))
            .map(|c| c.tag.to_owned())
            .collect();
        LayerSelection {
            channel_layers: channel,
            height_layers: height,
        }
    }
}

impl LayerSelection {
    pub fn validate(&self) -> Result<()> {
        if self.channel_layers.is_empty() || self.height_layers.is_empty() {
            return Err(Error::Config(
                "layer selection lists must be non-empty".into(),
            ));
        }
        for tag in self.channel_layers.iter().chain(&self.height_layers) {
            if conv_index(tag).is_none() {
                return Err(Error::Config(format!(
                    "unknown backbone layer {tag}; valid tags are conv1_1 .. conv5_4"
                )));
            }
        }
        Ok(())
    }

    /// Union of both lists, deduplicated, in network order.
    pub fn union_tags(&self) -> Vec<String> {
        let wanted: BTreeSet<&str> = self
            .channel_layers
            .iter()
            .chain(&self.height_layers)
            .map(String::as_str)
            .collect();
        VGG19_CONVS
            .iter()
            .filter(|c| wanted.contains(c.tag))
            .map(|c| c.tag.to_owned())
            .collect()
    }

    fn deepest_index(&self) -> usize {
        self.union_tags()
            .iter()
            .filter_map(|t| conv_index(t))
            .max()
            .unwrap_or(0)
    }
}

/// One frozen convolution stage.
#[derive(Debug, Clone)]
struct ConvLayer<T> {
    in_ch: usize,
    out_ch: usize,
    /// Nine (in, out) matrices indexed dy * 3 + dx.
    w: Vec<Array2<T>>,
    bias: Array1<T>,
    pool_after: bool,
}

/// Frozen feature extractor: immutable after load, so shared read-only use
/// across threads is safe and repeated extraction is bit-identical.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<T> {
    convs: Vec<ConvLayer<T>>,
    selection: LayerSelection,
    checksum: String,
    backbone: String,
    mean: [T; 3],
    std: [T; 3],
}

/// Saved forward state for one image, consumed by [`FeatureExtractor::backward`].
pub struct ForwardTrace<T> {
    /// Post-activation output of every executed conv stage, pre-pool.
    outputs: Vec<Array3<T>>,
    /// Pool argmax (0..4, dy * 2 + dx) wherever pooling executed.
    pool_arg: Vec<Option<Array3<u8>>>,
    input_dim: (usize, usize, usize),
}

fn conv_forward<T: Real>(input: &Array3<T>, layer: &ConvLayer<T>) -> Array3<T> {
    let (h, w, cin) = input.dim();
    debug_assert_eq!(cin, layer.in_ch);
    let mut padded = Array3::<T>::zeros((h + 2, w + 2, cin));
    padded.slice_mut(s![1..=h, 1..=w, ..]).assign(input);
    let mut out = layer
        .bias
        .broadcast((h * w, layer.out_ch))
        .expect("bias broadcasts over pixels")
        .to_owned();
    // Gather the shifted window once per tap so each tap is a single large
    // matrix product over all pixels; per-row products spend most of their
    // time packing tiny operands.
    let mut win = Array2::<T>::zeros((h * w, cin));
    for dy in 0..3 {
        for dx in 0..3 {
            for y in 0..h {
                win.slice_mut(s![y * w..(y + 1) * w, ..])
                    .assign(&padded.slice(s![y + dy, dx..dx + w, ..]));
            }
            T::gemm(
                T::one(),
                &win.view(),
                &layer.w[dy * 3 + dx].view(),
                T::one(),
                &mut out.view_mut(),
            );
        }
    }
    out.into_shape_with_order((h, w, layer.out_ch))
        .expect("pixel rows regroup into the image grid")
}

fn conv_backward_input<T: Real>(grad_out: &Array3<T>, layer: &ConvLayer<T>) -> Array3<T> {
    let (h, w, cout) = grad_out.dim();
    debug_assert_eq!(cout, layer.out_ch);
    let g = grad_out
        .to_shape((h * w, cout))
        .expect("gradient regroups into pixel rows");
    let mut dpad = Array3::<T>::zeros((h + 2, w + 2, layer.in_ch));
    let mut dwin = Array2::<T>::zeros((h * w, layer.in_ch));
    for dy in 0..3 {
        for dx in 0..3 {
            T::gemm(
                T::one(),
                &g.view(),
                &layer.w[dy * 3 + dx].t(),
                T::zero(),
                &mut dwin.view_mut(),
            );
            for y in 0..h {
                let mut c = dpad.slice_mut(s![y + dy, dx..dx + w, ..]);
                c += &dwin.slice(s![y * w..(y + 1) * w, ..]);
            }
        }
    }
    dpad.slice(s![1..=h, 1..=w, ..]).to_owned()
}

fn relu_inplace<T: Real>(x: &mut Array3<T>) {
    x.mapv_inplace(|v| v.max(T::zero()));
}

/// 2x2 max pooling, stride 2, floor semantics for odd extents. Returns the
/// pooled tensor and the argmax choice per output element; ties keep the
/// first (raster-order) maximum so backprop is reproducible.
fn maxpool2<T: Real>(input: &Array3<T>) -> (Array3<T>, Array3<u8>) {
    let (h, w, c) = input.dim();
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Array3::<T>::zeros((ho, wo, c));
    let mut arg = Array3::<u8>::zeros((ho, wo, c));
    for y in 0..ho {
        for x in 0..wo {
            for ch in 0..c {
                let mut best = input[[2 * y, 2 * x, ch]];
                let mut best_i = 0u8;
                for (i, (dy, dx)) in [(0, 1), (1, 0), (1, 1)].iter().enumerate() {
                    let v = input[[2 * y + dy, 2 * x + dx, ch]];
                    if v > best {
                        best = v;
                        best_i = i as u8 + 1;
                    }
                }
                out[[y, x, ch]] = best;
                arg[[y, x, ch]] = best_i;
            }
        }
    }
    (out, arg)
}

fn maxpool2_backward<T: Real>(
    grad_out: &Array3<T>,
    arg: &Array3<u8>,
    input_dim: (usize, usize, usize),
) -> Array3<T> {
    let (ho, wo, c) = grad_out.dim();
    let mut grad = Array3::<T>::zeros(input_dim);
    for y in 0..ho {
        for x in 0..wo {
            for ch in 0..c {
                let choice = arg[[y, x, ch]] as usize;
                let (dy, dx) = (choice / 2, choice % 2);
                grad[[2 * y + dy, 2 * x + dx, ch]] =
                    grad[[2 * y + dy, 2 * x + dx, ch]] + grad_out[[y, x, ch]];
            }
        }
    }
    grad
}

impl<T: Real> FeatureExtractor<T> {
    pub fn selection(&self) -> &LayerSelection {
        &self.selection
    }

    /// Hex SHA-256 of the weights file, or a seed identifier for in-memory
    /// random initializations.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn backbone(&self) -> &str {
        &self.backbone
    }

    /// Fails unless the loaded weights hash matches.
    pub fn verify_checksum(&self, expected: &str) -> Result<()> {
        if self.checksum.eq_ignore_ascii_case(expected) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "weights checksum mismatch: expected {expected}, loaded {}",
                self.checksum
            )))
        }
    }

    /// Spatial size of a layer's activations for a given input size (the
    /// cumulative pooling stride schedule, with floor semantics).
    pub fn layer_spatial(&self, tag: &str, input: (usize, usize)) -> Result<(usize, usize)> {
        let idx = conv_index(tag)
            .ok_or_else(|| Error::Config(format!("unknown backbone layer {tag}")))?;
        let (mut h, mut w) = input;
        for spec in &VGG19_CONVS[..idx] {
            if spec.pool_after {
                h /= 2;
                w /= 2;
            }
        }
        Ok((h, w))
    }

    /// Smallest square input that keeps every selected layer at least 2x2.
    pub fn min_input_side(&self) -> usize {
        let pools = VGG19_CONVS[..self.selection.deepest_index()]
            .iter()
            .filter(|c| c.pool_after)
            .count();
        2 << pools
    }

    /// Rejects inputs the pooling ladder would shrink past usability before
    /// any work happens.
    pub fn check_min_size(&self, height: usize, width: usize) -> Result<()> {
        for tag in self.selection.union_tags() {
            let (h, w) = self.layer_spatial(&tag, (height, width))?;
            if h < 2 || w < 2 {
                return Err(Error::invalid(format!(
                    "input {height}x{width} leaves layer {tag} at {h}x{w}; every \
                     selected layer needs spatial size >= 2"
                )));
            }
        }
        Ok(())
    }

    /// Normalizes an image into backbone input space. Out-of-range pixels are
    /// clamped first; the count of clamped values is returned alongside.
    pub fn preprocess(&self, img: &Image) -> (Array3<T>, usize) {
        let mut clamped = 0usize;
        let data = img.data();
        let out = Array3::from_shape_fn(data.dim(), |(y, x, c)| {
            let v = data[[y, x, c]];
            if !(0.0..=1.0).contains(&v) {
                clamped += 1;
            }
            (T::of(v.clamp(0.0, 1.0) as f64) - self.mean[c]) / self.std[c]
        });
        (out, clamped)
    }

    /// Inverse of [`preprocess`]: back to [0, 1] pixels, clamping and counting
    /// anything the optimizer pushed out of range.
    pub fn deprocess(&self, x: &Array3<T>) -> (Image, usize) {
        let mut clamped = 0usize;
        let data = Array3::from_shape_fn(x.dim(), |(y, xx, c)| {
            let v = (x[[y, xx, c]] * self.std[c] + self.mean[c])
                .to_f64()
                .unwrap_or(0.0);
            if !(0.0..=1.0).contains(&v) {
                clamped += 1;
            }
            v.clamp(0.0, 1.0) as f32
        });
        (
            Image::new(data).expect("deprocessed values are finite"),
            clamped,
        )
    }

    fn run_forward(&self, x: &Array3<T>) -> (Vec<Array3<T>>, Vec<Option<Array3<u8>>>) {
        let mut outputs = Vec::with_capacity(self.convs.len());
        let mut pool_arg = Vec::with_capacity(self.convs.len());
        let mut cur = x.clone();
        for (i, layer) in self.convs.iter().enumerate() {
            let mut out = conv_forward(&cur, layer);
            relu_inplace(&mut out);
            let pool_now = layer.pool_after && i + 1 < self.convs.len();
            if pool_now {
                let (pooled, arg) = maxpool2(&out);
                cur = pooled;
                pool_arg.push(Some(arg));
            } else {
                if i + 1 < self.convs.len() {
                    cur = out.clone();
                } else {
                    cur = Array3::zeros((0, 0, 0));
                }
                pool_arg.push(None);
            }
            outputs.push(out);
        }
        (outputs, pool_arg)
    }

    fn stack_from_outputs(&self, outputs: &[Array3<T>]) -> Result<FeatureStack<T>> {
        let layers = self
            .selection
            .union_tags()
            .into_iter()
            .map(|tag| {
                let idx = conv_index(&tag).expect("validated at load");
                (tag, outputs[idx].clone())
            })
            .collect();
        FeatureStack::new(layers)
    }

    /// Runs the frozen forward pass and returns the selected layers'
    /// activations. Deterministic: identical inputs give identical stacks.
    pub fn extract(&self, img: &Image) -> Result<FeatureStack<T>> {
        self.check_min_size(img.height(), img.width())?;
        let (x, _) = self.preprocess(img);
        let (outputs, _) = self.run_forward(&x);
        self.stack_from_outputs(&outputs)
    }

    /// [`extract`] on an already-preprocessed tensor, keeping the forward
    /// state needed to backpropagate.
    pub fn extract_trace(&self, x: &Array3<T>) -> Result<(FeatureStack<T>, ForwardTrace<T>)> {
        let (h, w, c) = x.dim();
        if c != 3 {
            return Err(Error::invalid(format!("expected 3 input channels, got {c}")));
        }
        self.check_min_size(h, w)?;
        let (outputs, pool_arg) = self.run_forward(x);
        let stack = self.stack_from_outputs(&outputs)?;
        Ok((
            stack,
            ForwardTrace {
                outputs,
                pool_arg,
                input_dim: (h, w, c),
            },
        ))
    }

    /// Backpropagates per-layer gradients (aligned with the extracted stack's
    /// layer order) down to the preprocessed input tensor.
    pub fn backward(&self, trace: &ForwardTrace<T>, stack_grads: &[Array3<T>]) -> Result<Array3<T>> {
        let tags = self.selection.union_tags();
        if stack_grads.len() != tags.len() {
            return Err(Error::invalid(format!(
                "expected {} gradient tensors, got {}",
                tags.len(),
                stack_grads.len()
            )));
        }
        let mut injected: Vec<Option<&Array3<T>>> = vec![None; self.convs.len()];
        for (tag, grad) in tags.iter().zip(stack_grads) {
            let idx = conv_index(tag).expect("validated at load");
            if grad.dim() != trace.outputs[idx].dim() {
                return Err(Error::invalid(format!(
                    "gradient for {tag} has shape {:?}, activations are {:?}",
                    grad.dim(),
                    trace.outputs[idx].dim()
                )));
            }
            injected[idx] = Some(grad);
        }

        let mut grad_next: Option<Array3<T>> = None;
        for i in (0..self.convs.len()).rev() {
            let out = &trace.outputs[i];
            let mut grad_out = match (&trace.pool_arg[i], grad_next.take()) {
                (Some(arg), Some(g)) => maxpool2_backward(&g, arg, out.dim()),
                (None, Some(g)) => g,
                (_, None) => Array3::zeros(out.dim()),
            };
            if let Some(extra) = injected[i] {
                grad_out += extra;
            }
            grad_out.zip_mut_with(out, |g, &o| {
                if o <= T::zero() {
                    *g = T::zero();
                }
            });
            grad_next = Some(conv_backward_input(&grad_out, &self.convs[i]));
        }
        let grad = grad_next.expect("at least one conv layer");
        debug_assert_eq!(grad.dim(), trace.input_dim);
        Ok(grad)
    }
}

/// Converts a torch-layout kernel `[out][in][3][3]` into the nine (in, out)
/// offset matrices used by the GEMM formulation.
fn offsets_from_torch<T: Real>(raw: &[f32], in_ch: usize, out_ch: usize) -> Vec<Array2<T>> {
    (0..9)
        .map(|off| {
            Array2::from_shape_fn((in_ch, out_ch), |(i, o)| {
                T::of(raw[o * in_ch * 9 + i * 9 + off] as f64)
            })
        })
        .collect()
}

fn he_conv_weights(out_ch: usize, in_ch: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let std = (2.0 / (9.0 * in_ch as f64)).sqrt() as f32;
    (0..out_ch * in_ch * 9)
        .map(|_| f32::standard_normal(rng) * std)
        .collect()
}

fn layer_rng(seed: u64, layer: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64 + 1);
    rng
}

fn build_layers<T: Real>(
    deepest: usize,
    mut weight_of: impl FnMut(&ConvSpec, usize) -> Result<(Vec<f32>, Vec<f32>)>,
) -> Result<Vec<ConvLayer<T>>> {
    VGG19_CONVS[..=deepest]
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let (w, b) = weight_of(spec, i)?;
            Ok(ConvLayer {
                in_ch: spec.in_ch,
                out_ch: spec.out_ch,
                w: offsets_from_torch(&w, spec.in_ch, spec.out_ch),
                bias: Array1::from_iter(b.into_iter().map(|v| T::of(v as f64))),
                pool_after: spec.pool_after,
            })
        })
        .collect()
}

fn f32_tensor(st: &SafeTensors, names: [String; 2], shape: &[usize]) -> Result<Vec<f32>> {
    let view = names
        .iter()
        .find_map(|n| st.tensor(n).ok())
        .ok_or_else(|| {
            Error::Config(format!(
                "checkpoint is missing tensor {} (or {})",
                names[0], names[1]
            ))
        })?;
    if view.dtype() != Dtype::F32 {
        return Err(Error::Config(format!(
            "tensor {} has dtype {:?}, expected F32",
            names[0],
            view.dtype()
        )));
    }
    if view.shape() != shape {
        return Err(Error::Config(format!(
            "tensor {} has shape {:?}, expected {:?}",
            names[0],
            view.shape(),
            shape
        )));
    }
    Ok(view
        .data()
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn normalization<T: Real>() -> ([T; 3], [T; 3]) {
    (
        [T::of(INPUT_MEAN[0]), T::of(INPUT_MEAN[1]), T::of(INPUT_MEAN[2])],
        [T::of(INPUT_STD[0]), T::of(INPUT_STD[1]), T::of(INPUT_STD[2])],
    )
}

/// Loads a frozen extractor from a safetensors checkpoint, keeping only the
/// stages the selection actually needs. Fails fast on missing files
/// (io-error) and on architecture or dtype mismatches (config-error).
pub fn load_extractor<T: Real>(
    weights_path: &Path,
    selection: LayerSelection,
) -> Result<FeatureExtractor<T>> {
    selection.validate()?;
    let bytes =
        std::fs::read(weights_path).map_err(|e| Error::io(weights_path.to_owned(), e))?;
    let checksum = sha256_hex(&bytes);
    let st = SafeTensors::deserialize(&bytes)
        .map_err(|e| Error::Config(format!("unreadable checkpoint: {e}")))?;
    let convs = build_layers(selection.deepest_index(), |spec, _| {
        let w = f32_tensor(
            &st,
            [
                format!("{}.weight", spec.tag),
                format!("features.{}.weight", spec.torch_index),
            ],
            &[spec.out_ch, spec.in_ch, 3, 3],
        )?;
        let b = f32_tensor(
            &st,
            [
                format!("{}.bias", spec.tag),
                format!("features.{}.bias", spec.torch_index),
            ],
            &[spec.out_ch],
        )?;
        Ok((w, b))
    })?;
    let (mean, std) = normalization();
    Ok(FeatureExtractor {
        convs,
        selection,
        checksum,
        backbone: "vgg19".into(),
        mean,
        std,
    })
}

/// Builds an extractor with seeded He-initialized weights entirely in
/// memory; bit-identical to loading a file written by
/// [`write_random_weights`] with the same seed.
pub fn random_extractor<T: Real>(
    selection: LayerSelection,
    seed: u64,
) -> Result<FeatureExtractor<T>> {
    selection.validate()?;
    let convs = build_layers(selection.deepest_index(), |spec, i| {
        let mut rng = layer_rng(seed, i);
        Ok((
            he_conv_weights(spec.out_ch, spec.in_ch, &mut rng),
            vec![0.0; spec.out_ch],
        ))
    })?;
    let (mean, std) = normalization();
    Ok(FeatureExtractor {
        convs,
        selection,
        checksum: format!("he-seed-{seed}"),
        backbone: "vgg19".into(),
        mean,
        std,
    })
}

fn serialize_weights(seed: u64, deepest: usize) -> Result<Vec<u8>> {
    let mut tensors: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
    for (i, spec) in VGG19_CONVS[..=deepest].iter().enumerate() {
        let mut rng = layer_rng(seed, i);
        tensors.push((
            format!("{}.weight", spec.tag),
            vec![spec.out_ch, spec.in_ch, 3, 3],
            he_conv_weights(spec.out_ch, spec.in_ch, &mut rng),
        ));
        tensors.push((
            format!("{}.bias", spec.tag),
            vec![spec.out_ch],
            vec![0.0; spec.out_ch],
        ));
    }
    let bytes: Vec<(String, Vec<usize>, Vec<u8>)> = tensors
        .into_iter()
        .map(|(name, shape, data)| {
            let raw = data.iter().flat_map(|v| v.to_le_bytes()).collect();
            (name, shape, raw)
        })
        .collect();
    let views: Vec<(&str, TensorView)> = bytes
        .iter()
        .map(|(name, shape, raw)| {
            let view = TensorView::new(Dtype::F32, shape.clone(), raw)
                .map_err(|e| Error::Config(format!("tensor construction failed: {e}")))?;
            Ok((name.as_str(), view))
        })
        .collect::<Result<_>>()?;
    safetensors::serialize(views, &None)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))
}

/// Writes a seeded He-initialized VGG19-shaped checkpoint covering stages up
/// to `deepest_tag`. Returns the file's hex SHA-256.
pub fn write_random_weights_through(
    path: &Path,
    seed: u64,
    deepest_tag: &str,
) -> Result<String> {
    let deepest = conv_index(deepest_tag)
        .ok_or_else(|| Error::Config(format!("unknown backbone layer {deepest_tag}")))?;
    let bytes = serialize_weights(seed, deepest)?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path.to_owned(), e))?;
    Ok(sha256_hex(&bytes))
}

/// Writes a full 16-stage seeded checkpoint usable with any layer selection.
pub fn write_random_weights(path: &Path, seed: u64) -> Result<String> {
    write_random_weights_through(path, seed, "conv5_4")
}

/// Returns the path of a seeded checkpoint inside `dir`, generating it on
/// first use. Concurrent callers are safe: generation goes through a
/// temporary file renamed into place, and the content is deterministic.
pub fn ensure_weights_file(dir: &Path, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.to_owned(), e))?;
    let path = dir.join(format!("vgg19-he-{seed}.safetensors"));
    if path.exists() {
        return Ok(path);
    }
    let tmp = dir.join(format!("vgg19-he-{seed}.safetensors.tmp{}", std::process::id()));
    write_random_weights(&tmp, seed)?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(path.to_owned(), e))?;
    Ok(path)
}
