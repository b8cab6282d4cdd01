//! Texture synthesis by direct optimization.
//!
//! Single-scale: start from matched Gaussian noise, run a quasi-Newton
//! optimizer on the pixels (in normalized backbone input space) to minimize
//! the slicing loss between the current image's features and the exemplar's.
//! Multi-scale: build an exemplar pyramid, synthesize at the coarsest level
//! first, and 2x-upsample each result to initialize the next finer level,
//! which gives structure a chance to form at low cost before fine detail.
//!
//! Projection directions are redrawn between optimizer steps but frozen
//! within one, so every line-search evaluation of a step sees the same
//! objective. All randomness derives from the config seed: noise comes from
//! stream 0 of the generator, the direction draws of the k-th synthesized
//! scale from stream 1 + k. Fixing (exemplar, config) therefore fixes the
//! output bit for bit, and a one-level pyramid reproduces the single-scale
//! path exactly.

use std::collections::BTreeSet;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::img::{downsample, upsample2, Image};
use crate::lbfgs::Lbfgs;
use crate::num::Real;
use crate::sw::{
    slicing_loss_grad, slicing_loss_grad_interp, FeatureStack, LossWeights, SliceCounts,
    SlicePlan,
};
use crate::vgg::{FeatureExtractor, LayerSelection};

/// Pyramid reduction filter; fixed rather than configurable so results are
/// reproducible across installations.
pub const DOWNSAMPLE_MODE: &str = "bicubic";
/// Pyramid enlargement filter; fixed for the same reason.
pub const UPSAMPLE_MODE: &str = "bilinear";

#[cfg(not(target_arch = "wasm32"))]
mod clock {
    use std::time::Instant;

    pub struct Stopwatch(Instant);

    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch(Instant::now())
        }

        pub fn seconds(&self) -> f64 {
            self.0.elapsed().as_secs_f64()
        }
    }
}

#[cfg(target_arch = "wasm32")]
mod clock {
    /// Monotonic clocks are unavailable on this target; elapsed time reads
    /// as zero and callers that care should time on the host side.
    pub struct Stopwatch;

    impl Stopwatch {
        pub fn start() -> Self {
            Stopwatch
        }

        pub fn seconds(&self) -> f64 {
            0.0
        }
    }
}

/// Everything a synthesis run needs besides the exemplar and the extractor.
#[derive(Debug, Clone)]
pub struct SynthesisConfig<T> {
    /// K: extra pyramid levels below full resolution; 0 means single-scale.
    pub scales: usize,
    /// M: optimizer iterations per scale.
    pub iters: usize,
    /// First-trial step length of the line search.
    pub learning_rate: f64,
    pub weights: LossWeights<T>,
    /// Direction-count policy per term. The height term's published
    /// operating points (16, 64, 256 or one per row) go here.
    pub slice_counts: SliceCounts,
    pub seed: u64,
    /// Recompute exemplar features every evaluation instead of caching them
    /// once per scale. Results are identical; this only trades speed for
    /// memory.
    pub cache_reference_features: bool,
    /// Permit an init whose width differs from the exemplar's, matched via
    /// quantile interpolation. Heights must always agree.
    pub allow_width_resample: bool,
}

impl<T: Real> Default for SynthesisConfig<T> {
    fn default() -> Self {
        let sel = LayerSelection::default();
        SynthesisConfig {
            scales: 1,
            iters: 100,
            learning_rate: 1.0,
            weights: LossWeights::uniform(&sel.channel_layers, &sel.height_layers),
            slice_counts: SliceCounts::default(),
            seed: 0,
            cache_reference_features: true,
            allow_width_resample: false,
        }
    }
}

impl<T: Real> SynthesisConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Record of one optimized scale.
#[derive(Debug, Clone)]
pub struct ScaleTrace {
    pub height: usize,
    pub width: usize,
    /// The loss at the start of each optimizer step, then one final value
    /// evaluated after the last step (absent when no steps ran).
    pub losses: Vec<f64>,
    pub elapsed_seconds: f64,
    pub final_image: Image,
}

/// Per-scale records in synthesis order, coarsest first.
#[derive(Debug, Clone)]
pub struct SynthesisTrace {
    pub scales: Vec<ScaleTrace>,
}

impl SynthesisTrace {
    pub fn total_seconds(&self) -> f64 {
        self.scales.iter().map(|s| s.elapsed_seconds).sum()
    }
}

/// What one optimizer step did, in plain f64 for reporting.
#[derive(Debug, Clone, Copy)]
pub struct IterationReport {
    pub loss: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    pub evals: usize,
    pub moved: bool,
}

/// Independent Gaussian pixels matched to the reference's per-channel mean
/// and standard deviation, clamped to [0,1].
pub fn init_noise<R: Rng + ?Sized>(
    reference: &Image,
    height: usize,
    width: usize,
    rng: &mut R,
) -> Image {
    let mean = reference.channel_means();
    let std = reference.channel_stds();
    Image::from_fn(height, width, |_, _, c| {
        (mean[c] + std[c] * f32::standard_normal(rng)).clamp(0.0, 1.0)
    })
}

/// The noise image a seeded synthesis run starts from (generator stream 0).
pub fn default_init(reference: &Image, height: usize, width: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    init_noise(reference, height, width, &mut rng)
}

fn eval_at<T: Real>(
    ex: &FeatureExtractor<T>,
    reference: &Image,
    cached: Option<&FeatureStack<T>>,
    weights: &LossWeights<T>,
    plan: &SlicePlan<T>,
    interp: bool,
    dim: (usize, usize, usize),
    xf: &Array1<T>,
) -> Result<(T, Array1<T>)> {
    let x3 = xf
        .view()
        .into_shape_with_order(dim)
        .expect("flat buffer matches image dimensions")
        .to_owned();
    let (stack, trace) = ex.extract_trace(&x3)?;
    let fresh;
    let target = match cached {
        Some(s) => s,
        None => {
            fresh = ex.extract(reference)?;
            &fresh
        }
    };
    let (loss, grads) = if interp {
        slicing_loss_grad_interp(&stack, target, weights, plan)?
    } else {
        slicing_loss_grad(&stack, target, weights, plan)?
    };
    let gimg = ex.backward(&trace, &grads)?;
    let flat_grad = gimg
        .into_shape_with_order(dim.0 * dim.1 * dim.2)
        .expect("gradient is standard layout");
    Ok((loss, flat_grad))
}

/// One scale's optimization state, stepped manually. Owns its inputs so it
/// can outlive the caller's frame (interactive front ends hold one across
/// events); the clones it takes are cheap next to a single optimizer step.
pub struct SynthesisSession<T: Real> {
    ex: FeatureExtractor<T>,
    cfg: SynthesisConfig<T>,
    reference: Image,
    ref_stack: FeatureStack<T>,
    dim: (usize, usize, usize),
    flat: Array1<T>,
    opt: Lbfgs<T>,
    dirs_rng: ChaCha8Rng,
    interp: bool,
    losses: Vec<f64>,
    watch: clock::Stopwatch,
}

impl<T: Real> SynthesisSession<T> {
    /// Validates and prepares a run whose direction draws come from
    /// `dirs_stream` of the seeded generator.
    pub fn new(
        ex: &FeatureExtractor<T>,
        reference: &Image,
        init: &Image,
        cfg: &SynthesisConfig<T>,
        dirs_stream: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if init.height() != reference.height() {
            return Err(Error::invalid(format!(
                "init height {} does not match reference height {}",
                init.height(),
                reference.height()
            )));
        }
        let interp = init.width() != reference.width();
        if interp && !cfg.allow_width_resample {
            return Err(Error::invalid(format!(
                "init width {} does not match reference width {}; set \
                 allow_width_resample to synthesize at a different width",
                init.width(),
                reference.width()
            )));
        }
        let ref_stack = ex.extract(reference)?;
        let known: BTreeSet<&str> = ref_stack.tags().collect();
        for (name, map) in [
            ("channel", &cfg.weights.channel_weights),
            ("height", &cfg.weights.height_weights),
            ("width", &cfg.weights.width_weights),
        ] {
            if let Some((tag, _)) = map
                .iter()
                .find(|(tag, w)| **w > T::zero() && !known.contains(tag.as_str()))
            {
                return Err(Error::invalid(format!(
                    "{name} weight names layer {tag}, which the extractor's \
                     selection does not produce"
                )));
            }
        }
        let (x, _) = ex.preprocess(init);
        let dim = x.dim();
        let flat = x
            .into_shape_with_order(dim.0 * dim.1 * dim.2)
            .expect("preprocessed image is standard layout");
        let mut dirs_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        dirs_rng.set_stream(dirs_stream);
        Ok(SynthesisSession {
            ex: ex.clone(),
            cfg: cfg.clone(),
            reference: reference.clone(),
            ref_stack,
            dim,
            flat,
            opt: Lbfgs::new(10, T::of(cfg.learning_rate)),
            dirs_rng,
            interp,
            losses: Vec::new(),
            watch: clock::Stopwatch::start(),
        })
    }

    /// Runs one optimizer step under a fresh direction draw.
    pub fn step(&mut self) -> Result<IterationReport> {
        let plan = SlicePlan::draw(
            &self.ref_stack,
            &self.cfg.weights,
            &self.cfg.slice_counts,
            &mut self.dirs_rng,
        )?;
        let cached = if self.cfg.cache_reference_features {
            Some(&self.ref_stack)
        } else {
            None
        };
        let mut failure: Option<Error> = None;
        let mut eval = |xf: &Array1<T>| -> (T, Array1<T>) {
            match eval_at(
                &self.ex,
                &self.reference,
                cached,
                &self.cfg.weights,
                &plan,
                self.interp,
                self.dim,
                xf,
            ) {
                Ok(pair) => pair,
                Err(e) => {
                    failure = Some(e);
                    (T::nan(), Array1::zeros(xf.len()))
                }
            }
        };
        let report = self.opt.step(&mut self.flat, &mut eval);
        if let Some(e) = failure {
            return Err(e);
        }
        if !report.loss.is_finite() {
            let tail: Vec<f64> = self.losses.iter().rev().take(5).copied().collect();
            return Err(Error::Numerical(format!(
                "loss became non-finite at iteration {}; last finite losses (newest first): {tail:?}",
                self.losses.len()
            )));
        }
        let loss = report.loss.to_f64().unwrap_or(f64::NAN);
        self.losses.push(loss);
        Ok(IterationReport {
            loss,
            grad_norm: report.grad_norm.to_f64().unwrap_or(f64::NAN),
            step_size: report.step_size.to_f64().unwrap_or(0.0),
            evals: report.evals,
            moved: report.moved,
        })
    }

    /// The loss at the current iterate under a fresh direction draw.
    pub fn current_loss(&mut self) -> Result<f64> {
        let plan = SlicePlan::draw(
            &self.ref_stack,
            &self.cfg.weights,
            &self.cfg.slice_counts,
            &mut self.dirs_rng,
        )?;
        let (loss, _) = eval_at(
            &self.ex,
            &self.reference,
            Some(&self.ref_stack),
            &self.cfg.weights,
            &plan,
            self.interp,
            self.dim,
            &self.flat,
        )?;
        loss.to_f64()
            .ok_or_else(|| Error::Numerical("loss does not fit in f64".into()))
    }

    /// The current iterate as a displayable image (clamped to [0,1]).
    pub fn current_image(&self) -> Image {
        let x3 = self
            .flat
            .view()
            .into_shape_with_order(self.dim)
            .expect("flat buffer matches image dimensions")
            .to_owned();
        self.ex.deprocess(&x3).0
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Appends one final loss evaluation and closes the scale.
    pub fn finish(mut self) -> Result<(Image, ScaleTrace)> {
        let final_loss = self.current_loss()?;
        self.losses.push(final_loss);
        let img = self.current_image();
        let trace = ScaleTrace {
            height: self.dim.0,
            width: self.dim.1,
            losses: self.losses,
            elapsed_seconds: self.watch.seconds(),
            final_image: img.clone(),
        };
        Ok((img, trace))
    }
}

fn run_scale<T: Real>(
    ex: &FeatureExtractor<T>,
    reference: &Image,
    init: &Image,
    cfg: &SynthesisConfig<T>,
    dirs_stream: u64,
) -> Result<(Image, ScaleTrace)> {
    if cfg.iters == 0 {
        // Validate inputs exactly as a real run would, then hand back the
        // init untouched, not even a normalization round trip.
        let watch = clock::Stopwatch::start();
        SynthesisSession::new(ex, reference, init, cfg, dirs_stream)?;
        return Ok((
            init.clone(),
            ScaleTrace {
                height: init.height(),
                width: init.width(),
                losses: Vec::new(),
                elapsed_seconds: watch.seconds(),
                final_image: init.clone(),
            },
        ));
    }
    let mut session = SynthesisSession::new(ex, reference, init, cfg, dirs_stream)?;
    for _ in 0..cfg.iters {
        let report = session.step()?;
        if !report.moved && report.grad_norm == 0.0 {
            // Exact stationary point (typically init == reference); further
            // steps cannot move.
            break;
        }
    }
    session.finish()
}

/// Optimizes `init` against `reference` at a single scale. The returned
/// trace holds one segment.
pub fn synthesize_single_scale<T: Real>(
    reference: &Image,
    init: &Image,
    ex: &FeatureExtractor<T>,
    cfg: &SynthesisConfig<T>,
) -> Result<(Image, SynthesisTrace)> {
    let (img, seg) = run_scale(ex, reference, init, cfg, 1)?;
    Ok((
        img,
        SynthesisTrace {
            scales: vec![seg],
        },
    ))
}

/// Coarse-to-fine synthesis: noise at 1/2^K resolution, optimize, upsample,
/// repeat to full size. The trace holds K+1 segments, coarsest first.
pub fn synthesize_multiscale<T: Real>(
    reference: &Image,
    ex: &FeatureExtractor<T>,
    cfg: &SynthesisConfig<T>,
) -> Result<(Image, SynthesisTrace)> {
    cfg.validate()?;
    let k = cfg.scales;
    let div = 1usize
        .checked_shl(k as u32)
        .ok_or_else(|| Error::invalid(format!("2^{k} scales overflows")))?;
    let (h, w) = (reference.height(), reference.width());
    if h % div != 0 || w % div != 0 {
        return Err(Error::invalid(format!(
            "reference {h}x{w} is not divisible by 2^{k} = {div}"
        )));
    }
    // Fail on undersized coarse levels before any optimization happens.
    ex.check_min_size(h / div, w / div)?;

    let mut pyramid = Vec::with_capacity(k + 1);
    pyramid.push(reference.clone());
    for i in 1..=k {
        let next = downsample(&pyramid[i - 1], 2)?;
        pyramid.push(next);
    }

    let coarsest = &pyramid[k];
    let mut current = default_init(
        coarsest,
        coarsest.height(),
        coarsest.width(),
        cfg.seed,
    );
    let mut segments = Vec::with_capacity(k + 1);
    for (order, level) in (0..=k).rev().enumerate() {
        let target = &pyramid[level];
        let (img, seg) = run_scale(ex, target, &current, cfg, 1 + order as u64)?;
        segments.push(seg);
        current = if level > 0 { upsample2(&img) } else { img };
    }
    Ok((current, SynthesisTrace { scales: segments }))
}
