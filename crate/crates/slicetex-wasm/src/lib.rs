//! Browser bindings for the synthesis core. Three interactive pieces, all
//! holding their state on the Rust side and handing JavaScript nothing but
//! flat RGBA buffers and scalar readouts:
//!
//! * [`TextureLab`] synthesizes a texture from a procedural exemplar in
//!   short optimization bursts, one burst per call, so a page can animate
//!   the descent.
//! * [`TransportFlow`] runs plain gradient descent on a 2D point cloud
//!   under the sliced transport loss, which makes the effect of the
//!   direction budget visible: one direction wanders, dozens converge.
//! * [`scan_periodicity`] renders the circular autocorrelation of an image
//!   as a centered heatmap and reports repetition peaks, the same
//!   diagnostic the command-line sweep uses to flag verbatim replicas.
//!
//! Sizes stay small (32 to 64 pixels) because every burst runs the full
//! feature extractor on the main thread.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use slicetex::metrics::{autocorrelation_map, periodicity_diagnostic};
use slicetex::patterns::{generate, tile, PatternKind};
use slicetex::sw::{
    slicing_loss_grad, FeatureStack, LossWeights, SliceCount, SliceCounts, SlicePlan,
};
use slicetex::synth::{default_init, synthesize_single_scale, SynthesisConfig};
use slicetex::vgg::{random_extractor, FeatureExtractor, LayerSelection};
use slicetex::Image;

// Errors cross the boundary as plain strings: JavaScript still sees a thrown
// exception, and native tests can exercise failure paths (a JsValue cannot
// even be constructed off-wasm).
fn js_err(e: slicetex::Error) -> String {
    e.to_string()
}

fn image_from_rgba(rgba: &[u8], height: usize, width: usize) -> Result<Image, String> {
    if rgba.len() != height * width * 4 {
        return Err(format!(
            "expected {} RGBA bytes for {height}x{width}, got {}",
            height * width * 4,
            rgba.len()
        ));
    }
    Image::new(Array3::from_shape_fn((height, width, 3), |(y, x, c)| {
        rgba[(y * width + x) * 4 + c] as f32 / 255.0
    }))
    .map_err(js_err)
}

fn rgba_from_image(img: &Image) -> Vec<u8> {
    let (h, w) = (img.height(), img.width());
    let data = img.data();
    let mut out = Vec::with_capacity(h * w * 4);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out.push((data[[y, x, c]].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
            out.push(255);
        }
    }
    out
}

/// The exemplar patterns the demo can draw, optionally tiled, as canvas
/// pixels. `tiles` of 1 means the bare pattern.
#[wasm_bindgen]
pub fn pattern_rgba(kind: &str, size: u32, seed: u32, tiles: u32) -> Result<Vec<u8>, String> {
    let kind: PatternKind = kind.parse().map_err(js_err)?;
    let img = generate(kind, size as usize, seed as u64).map_err(js_err)?;
    let img = if tiles > 1 {
        tile(&img, tiles as usize, tiles as usize).map_err(js_err)?
    } else {
        img
    };
    Ok(rgba_from_image(&img))
}

fn demo_selection() -> LayerSelection {
    LayerSelection {
        channel_layers: vec!["conv1_1".into(), "conv1_2".into(), "conv2_1".into()],
        height_layers: vec!["conv1_1".into(), "conv2_1".into()],
    }
}

/// An exemplar, a synthesis in progress, and the extractor scoring it.
/// Each [`TextureLab::step`] call runs a short burst of optimizer
/// iterations; direction draws advance with the burst counter so repeated
/// bursts keep exploring new projections.
#[wasm_bindgen]
pub struct TextureLab {
    extractor: FeatureExtractor<f32>,
    reference: Image,
    current: Image,
    cfg: SynthesisConfig<f32>,
    bursts: u32,
    last_loss: f64,
}

#[wasm_bindgen]
impl TextureLab {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, size: u32, seed: u32) -> Result<TextureLab, String> {
        let kind: PatternKind = kind.parse().map_err(js_err)?;
        let reference = generate(kind, size as usize, seed as u64).map_err(js_err)?;
        let sel = demo_selection();
        let extractor = random_extractor::<f32>(sel.clone(), 0).map_err(js_err)?;
        extractor
            .check_min_size(reference.height(), reference.width())
            .map_err(js_err)?;
        let cfg = SynthesisConfig::<f32> {
            iters: 2,
            seed: seed as u64,
            weights: LossWeights::uniform(&sel.channel_layers, &sel.height_layers),
            ..SynthesisConfig::default()
        };
        let current = default_init(
            &reference,
            reference.height(),
            reference.width(),
            cfg.seed,
        );
        Ok(TextureLab {
            extractor,
            reference,
            current,
            cfg,
            bursts: 0,
            last_loss: f64::NAN,
        })
    }

    /// One optimization burst from the current image; returns the loss the
    /// burst ended on.
    pub fn step(&mut self) -> Result<f64, String> {
        let cfg = SynthesisConfig::<f32> {
            seed: self.cfg.seed.wrapping_add(1 + self.bursts as u64),
            ..self.cfg.clone()
        };
        let (img, trace) =
            synthesize_single_scale(&self.reference, &self.current, &self.extractor, &cfg)
                .map_err(js_err)?;
        self.current = img;
        self.last_loss = trace.scales[0].losses.last().copied().unwrap_or(f64::NAN);
        self.bursts += 1;
        Ok(self.last_loss)
    }

    /// Back to fresh noise (a new seed gives a different start).
    pub fn reset(&mut self, seed: u32) {
        self.cfg.seed = seed as u64;
        self.current = default_init(
            &self.reference,
            self.reference.height(),
            self.reference.width(),
            self.cfg.seed,
        );
        self.bursts = 0;
        self.last_loss = f64::NAN;
    }

    pub fn reference_rgba(&self) -> Vec<u8> {
        rgba_from_image(&self.reference)
    }

    pub fn current_rgba(&self) -> Vec<u8> {
        rgba_from_image(&self.current)
    }

    pub fn size(&self) -> u32 {
        self.reference.height() as u32
    }

    pub fn bursts(&self) -> u32 {
        self.bursts
    }

    pub fn loss(&self) -> f64 {
        self.last_loss
    }
}

/// A movable point cloud and a fixed target cloud under the sliced
/// transport loss. [`TransportFlow::step`] projects both clouds onto fresh
/// random directions, differentiates the sorted matching, and moves the
/// points directly; no feature extractor is involved, so the geometry of
/// the loss is undiluted.
#[wasm_bindgen]
pub struct TransportFlow {
    source: Array3<f64>,
    target: FeatureStack<f64>,
    target_flat: Vec<f64>,
    weights: LossWeights<f64>,
    rng: ChaCha8Rng,
}

#[wasm_bindgen]
impl TransportFlow {
    /// `shape` is one of `ring`, `spiral`, or `grid`. Points start in a
    /// Gaussian blob in the unit square's center.
    #[wasm_bindgen(constructor)]
    pub fn new(points: u32, shape: &str, seed: u32) -> Result<TransportFlow, String> {
        let n = points.clamp(4, 512) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let targets: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                match shape {
                    "ring" => {
                        let a = t * std::f64::consts::TAU;
                        [0.5 + 0.38 * a.cos(), 0.5 + 0.38 * a.sin()]
                    }
                    "spiral" => {
                        let a = t * 3.0 * std::f64::consts::TAU;
                        let r = 0.05 + 0.38 * t;
                        [0.5 + r * a.cos(), 0.5 + r * a.sin()]
                    }
                    _ => {
                        let side = (n as f64).sqrt().ceil() as usize;
                        let (gy, gx) = (i / side, i % side);
                        let s = (side.max(2) - 1) as f64;
                        [0.12 + 0.76 * gx as f64 / s, 0.12 + 0.76 * gy as f64 / s]
                    }
                }
            })
            .collect();
        let source = Array3::from_shape_fn((1, n, 2), |(_, _, _)| {
            0.5 + 0.08 * (rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0))
        });
        let target_arr = Array3::from_shape_fn((1, n, 2), |(_, i, c)| targets[i][c]);
        let target_flat = targets.iter().flatten().copied().collect();
        let target =
            FeatureStack::new(vec![("pts".into(), target_arr)]).map_err(js_err)?;
        Ok(TransportFlow {
            source,
            target,
            target_flat,
            weights: LossWeights::channel_only(&["pts"]),
            rng,
        })
    }

    /// One descent step over `directions` fresh projections. The gradient
    /// of the mean sorted matching scales like 1/n, so useful step sizes
    /// run up to roughly the point count.
    pub fn step(&mut self, directions: u32, step_size: f64) -> Result<f64, String> {
        let stack = FeatureStack::new(vec![("pts".into(), self.source.clone())])
            .map_err(js_err)?;
        let counts = SliceCounts {
            channel: SliceCount::Fixed(directions.max(1) as usize),
            ..SliceCounts::default()
        };
        let plan =
            SlicePlan::draw(&stack, &self.weights, &counts, &mut self.rng).map_err(js_err)?;
        let (loss, grads) =
            slicing_loss_grad(&stack, &self.target, &self.weights, &plan).map_err(js_err)?;
        self.source.scaled_add(-step_size, &grads[0]);
        Ok(loss)
    }

    /// Source positions as interleaved x, y pairs in unit coordinates.
    pub fn positions(&self) -> Vec<f64> {
        let n = self.source.dim().1;
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            out.push(self.source[[0, i, 0]]);
            out.push(self.source[[0, i, 1]]);
        }
        out
    }

    pub fn targets(&self) -> Vec<f64> {
        self.target_flat.clone()
    }

    pub fn len(&self) -> u32 {
        self.source.dim().1 as u32
    }

    pub fn is_empty(&self) -> bool {
        self.source.dim().1 == 0
    }
}

/// Correlation rendered as a diverging ramp: warm for positive, cool for
/// negative, black near zero.
fn heat_color(c: f64) -> [u8; 3] {
    let v = c.clamp(-1.0, 1.0);
    let t = v.abs();
    if v >= 0.0 {
        [
            (255.0 * t).round() as u8,
            (170.0 * t * t.sqrt()).round() as u8,
            (48.0 * t * t).round() as u8,
        ]
    } else {
        [
            (48.0 * t * t).round() as u8,
            (130.0 * t * t.sqrt()).round() as u8,
            (255.0 * t).round() as u8,
        ]
    }
}

/// Everything a page needs to draw the periodicity verdict: a heatmap with
/// the zero offset centered, the repetition peaks as flat
/// `dy, dx, correlation` triplets, and the replica flag itself.
#[wasm_bindgen]
pub struct PeriodicityScan {
    heat: Vec<u8>,
    height: u32,
    width: u32,
    degenerate: bool,
    replica: bool,
    max_correlation: f64,
    threshold: f64,
    peaks: Vec<f64>,
}

#[wasm_bindgen]
impl PeriodicityScan {
    pub fn heat_rgba(&self) -> Vec<u8> {
        self.heat.clone()
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn replica(&self) -> bool {
        self.replica
    }

    pub fn max_correlation(&self) -> f64 {
        self.max_correlation
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn peaks(&self) -> Vec<f64> {
        self.peaks.clone()
    }
}

#[wasm_bindgen]
pub fn scan_periodicity(rgba: &[u8], height: u32, width: u32) -> Result<PeriodicityScan, String> {
    let (h, w) = (height as usize, width as usize);
    let img = image_from_rgba(rgba, h, w)?;
    let report = periodicity_diagnostic(&img);
    let heat = match autocorrelation_map(&img) {
        Some(map) => {
            let mut heat = Vec::with_capacity(h * w * 4);
            for y in 0..h {
                for x in 0..w {
                    // Centered display: pixel (h/2, w/2) is offset zero.
                    let sy = (y as isize - (h / 2) as isize).rem_euclid(h as isize) as usize;
                    let sx = (x as isize - (w / 2) as isize).rem_euclid(w as isize) as usize;
                    let [r, g, b] = heat_color(map[[sy, sx]]);
                    heat.extend_from_slice(&[r, g, b, 255]);
                }
            }
            heat
        }
        None => vec![0, 0, 0, 255].repeat(h * w),
    };
    let peaks = report
        .peaks
        .iter()
        .flat_map(|p| [p.dy as f64, p.dx as f64, p.correlation])
        .collect();
    Ok(PeriodicityScan {
        heat,
        height,
        width,
        degenerate: report.degenerate,
        replica: report.replica_flag(),
        max_correlation: report.max_correlation,
        threshold: report.threshold,
        peaks,
    })
}
