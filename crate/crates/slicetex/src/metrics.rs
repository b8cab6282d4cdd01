//! Distributional quality metrics over image crops.
//!
//! The protocol: cut seeded random crops from the reference and from the
//! synthesis, push both sets through an embedding backend, and compare the
//! two embedding clouds. Two comparisons are provided, the Fréchet distance
//! between Gaussian fits
//!
//!   d² = ‖μ_A − μ_B‖² + tr(Σ_A + Σ_B − 2 (Σ_A Σ_B)^{1/2}),
//!
//! and the unbiased kernel MMD² with k(x, y) = (x·y/d + 1)³, whose unbiased
//! form omits the diagonal and can legitimately go negative. A ground-truth
//! mode scores two disjoint-seed crop sets of the reference against each
//! other, which calibrates the floor of either metric. A perceptual distance
//! hook and an autocorrelation-based periodicity diagnostic (for spotting
//! verbatim replicas) round out the toolbox.

use ndarray::{Array1, Array2, Axis};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::img::Image;
use crate::num::Real;
use crate::vgg::FeatureExtractor;

/// Activation layer whose pooled responses serve as the stock embedding.
pub const EMBEDDING_LAYER: &str = "conv3_2";

/// Autocorrelation level above which an off-origin offset counts as a
/// repetition peak.
pub const PERIODICITY_THRESHOLD: f64 = 0.5;

const MAX_PEAKS: usize = 32;

/// A cloud of embedding vectors (one row per image) plus the identifier of
/// whatever produced them, so clouds from different backends are never
/// compared by accident.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    vectors: Array2<f64>,
    backend: String,
}

impl EmbeddingSet {
    pub fn new(vectors: Array2<f64>, backend: impl Into<String>) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(Error::invalid("embedding set must be non-empty"));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding set contains non-finite values"));
        }
        Ok(EmbeddingSet {
            vectors,
            backend: backend.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn backend(&self) -> &str {
        &self.backend
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }
}

/// Turns a batch of images into one embedding vector each.
pub trait EmbeddingBackend {
    fn id(&self) -> String;
    fn embed(&self, images: &[Image]) -> Result<EmbeddingSet>;
}

/// Global average pooling of one backbone layer's activations.
pub struct VggEmbedding<T: Real> {
    ex: FeatureExtractor<T>,
    tag: String,
}

impl<T: Real> VggEmbedding<T> {
    pub fn new(ex: FeatureExtractor<T>, tag: &str) -> Result<Self> {
        if ex.selection().union_tags().iter().all(|t| t != tag) {
            return Err(Error::Config(format!(
                "embedding layer {tag} is not in the extractor's selection"
            )));
        }
        Ok(VggEmbedding {
            ex,
            tag: tag.to_owned(),
        })
    }
}

impl<T: Real> EmbeddingBackend for VggEmbedding<T> {
    fn id(&self) -> String {
        format!("{}:{}:gap:{}", self.ex.backbone(), self.tag, self.ex.checksum())
    }

    fn embed(&self, images: &[Image]) -> Result<EmbeddingSet> {
        if images.is_empty() {
            return Err(Error::invalid("cannot embed an empty image list"));
        }
        let mut rows: Vec<Array1<f64>> = Vec::with_capacity(images.len());
        for img in images {
            let stack = self.ex.extract(img)?;
            let feat = stack
                .get(&self.tag)
                .expect("tag validated at construction");
            let (h, w, n) = feat.dim();
            let scale = 1.0 / (h * w) as f64;
            let mut row = Array1::<f64>::zeros(n);
            for y in 0..h {
                for x in 0..w {
                    for c in 0..n {
                        row[c] += feat[[y, x, c]].to_f64().unwrap_or(f64::NAN) * scale;
                    }
                }
            }
            rows.push(row);
        }
        let d = rows[0].len();
        let mut vectors = Array2::zeros((rows.len(), d));
        for (i, row) in rows.into_iter().enumerate() {
            vectors.row_mut(i).assign(&row);
        }
        EmbeddingSet::new(vectors, self.id())
    }
}

/// How crops are cut for the crop-based metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropProtocol {
    pub crop_count: usize,
    pub crop_size: usize,
    pub seed: u64,
    /// Score two disjoint-seed crop sets of the reference against each other
    /// instead of reference vs. synthesis.
    pub ground_truth: bool,
}

impl Default for CropProtocol {
    fn default() -> Self {
        CropProtocol {
            crop_count: 64,
            crop_size: 128,
            seed: 0,
            ground_truth: false,
        }
    }
}

/// Cuts `crop_count` square crops at seeded uniform offsets.
pub fn extract_crops(img: &Image, proto: &CropProtocol) -> Result<Vec<Image>> {
    let s = proto.crop_size;
    if s == 0 || proto.crop_count == 0 {
        return Err(Error::invalid("crop protocol needs positive count and size"));
    }
    if img.height() < s || img.width() < s {
        return Err(Error::invalid(format!(
            "image {}x{} is smaller than the {s}x{s} crop size",
            img.height(),
            img.width()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(proto.seed);
    let (ymax, xmax) = (img.height() - s, img.width() - s);
    (0..proto.crop_count)
        .map(|_| {
            let y = rng.gen_range(0..=ymax);
            let x = rng.gen_range(0..=xmax);
            img.crop(y, x, s, s)
        })
        .collect()
}

fn mean_and_cov(x: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = x - &mean;
    let cov = centered.t().dot(&centered) / (n - 1.0);
    (mean, cov)
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_iterator(a.nrows(), a.ncols(), a.iter().cloned())
}

/// Symmetric PSD square root by eigendecomposition; eigenvalues below the
/// floor count as exactly zero (rank deficiency is expected when fitting
/// d-dimensional Gaussians to a few dozen samples). Returns the root and the
/// eigenvalue range for diagnostics.
fn sqrt_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, (f64, f64)) {
    const FLOOR: f64 = 1e-10;
    let eig = SymmetricEigen::new(m.clone());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| {
        if l < FLOOR {
            0.0
        } else {
            l.sqrt()
        }
    }));
    let v = &eig.eigenvectors;
    (v * roots * v.transpose(), (lo, hi))
}

fn check_comparable(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "embedding dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.backend() != b.backend() {
        return Err(Error::invalid(format!(
            "embedding backends differ: {} vs {}",
            a.backend(),
            b.backend()
        )));
    }
    Ok(())
}

/// Fréchet distance between Gaussians fitted to the two clouds (sample
/// covariance with n−1 in the denominator).
pub fn frechet_distance(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64> {
    check_comparable(a, b)?;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(
            "Fréchet statistics need at least 2 samples per set",
        ));
    }
    let (mu_a, cov_a) = mean_and_cov(a.vectors());
    let (mu_b, cov_b) = mean_and_cov(b.vectors());
    let dmu: f64 = mu_a
        .iter()
        .zip(mu_b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let ca = to_dmatrix(&cov_a);
    let cb = to_dmatrix(&cov_b);
    let (ra, range_a) = sqrt_psd(&ca);
    // tr((Σ_A Σ_B)^{1/2}) computed on the symmetrized conjugation
    // √Σ_A Σ_B √Σ_A, which shares its spectrum with Σ_A Σ_B but stays
    // symmetric under floating point.
    let inner = &ra * &cb * &ra;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner);
    let tr_sqrt: f64 = eig
        .eigenvalues
        .iter()
        .map(|l| if *l < 1e-10 { 0.0 } else { l.sqrt() })
        .sum();
    let value = dmu + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "Fréchet distance is non-finite; covariance eigenvalue range \
             [{:.3e}, {:.3e}], mean shift {dmu:.3e}",
            range_a.0, range_a.1
        )));
    }
    // Exact zero can dip microscopically negative through the eigensolver.
    Ok(value.max(0.0))
}

fn poly_kernel(dot: f64, d: f64) -> f64 {
    let t = dot / d + 1.0;
    t * t * t
}

/// Unbiased kernel MMD² with the cubic polynomial kernel. The off-diagonal
/// estimator is unbiased, so values near zero routinely come out negative.
pub fn kid(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64> {
    check_comparable(a, b)?;
    let (n, m) = (a.len(), b.len());
    if n < 2 || m < 2 {
        return Err(Error::invalid(
            "the unbiased kernel estimate needs at least 2 samples per set",
        ));
    }
    let d = a.dim() as f64;
    let va = a.vectors();
    let vb = b.vectors();
    let gaa = va.dot(&va.t());
    let gbb = vb.dot(&vb.t());
    let gab = va.dot(&vb.t());
    let mut saa = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                saa += poly_kernel(gaa[[i, j]], d);
            }
        }
    }
    let mut sbb = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                sbb += poly_kernel(gbb[[i, j]], d);
            }
        }
    }
    let mut sab = 0.0;
    for i in 0..n {
        for j in 0..m {
            sab += poly_kernel(gab[[i, j]], d);
        }
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(saa / (nf * (nf - 1.0)) + sbb / (mf * (mf - 1.0)) - 2.0 * sab / (nf * mf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropMetricKind {
    Fid,
    Kid,
}

impl std::str::FromStr for CropMetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fid" => Ok(CropMetricKind::Fid),
            "kid" => Ok(CropMetricKind::Kid),
            other => Err(Error::invalid(format!(
                "unknown crop metric {other}; expected fid or kid"
            ))),
        }
    }
}

/// Crop-based distributional distance. Normally compares reference crops
/// against synthesis crops cut at the same seeded offsets; in ground-truth
/// mode both sets come from the reference with disjoint seeds (the second
/// set uses seed + 1) and `syn` is ignored.
pub fn crop_metric(
    reference: &Image,
    syn: &Image,
    proto: &CropProtocol,
    which: CropMetricKind,
    backend: &dyn EmbeddingBackend,
) -> Result<f64> {
    let set_a = backend.embed(&extract_crops(reference, proto)?)?;
    let set_b = if proto.ground_truth {
        let second = CropProtocol {
            seed: proto.seed.wrapping_add(1),
            ..*proto
        };
        backend.embed(&extract_crops(reference, &second)?)?
    } else {
        backend.embed(&extract_crops(syn, proto)?)?
    };
    match which {
        CropMetricKind::Fid => frechet_distance(&set_a, &set_b),
        CropMetricKind::Kid => kid(&set_a, &set_b),
    }
}

/// Full-image perceptual distance between two images.
pub trait PerceptualBackend {
    fn id(&self) -> String;
    fn distance(&self, a: &Image, b: &Image) -> Result<f64>;
}

/// Perceptual distance from unit-normalized backbone features: per pixel,
/// each layer's feature vector is scaled to unit length, and the layers'
/// mean squared differences are averaged with uniform weights.
pub struct VggPerceptual<T: Real> {
    ex: FeatureExtractor<T>,
}

impl<T: Real> VggPerceptual<T> {
    pub fn new(ex: FeatureExtractor<T>) -> Self {
        VggPerceptual { ex }
    }
}

impl<T: Real> PerceptualBackend for VggPerceptual<T> {
    fn id(&self) -> String {
        format!("{}:unitfeat:{}", self.ex.backbone(), self.ex.checksum())
    }

    fn distance(&self, a: &Image, b: &Image) -> Result<f64> {
        let sa = self.ex.extract(a)?;
        let sb = self.ex.extract(b)?;
        let eps = T::of(1e-10);
        let mut total = T::zero();
        for ((_, fa), (_, fb)) in sa.layers().iter().zip(sb.layers()) {
            let (h, w, n) = fa.dim();
            let mut layer = T::zero();
            for y in 0..h {
                for x in 0..w {
                    let mut na = T::zero();
                    let mut nb = T::zero();
                    for c in 0..n {
                        na = na + fa[[y, x, c]] * fa[[y, x, c]];
                        nb = nb + fb[[y, x, c]] * fb[[y, x, c]];
                    }
                    let na = na.sqrt() + eps;
                    let nb = nb.sqrt() + eps;
                    for c in 0..n {
                        let diff = fa[[y, x, c]] / na - fb[[y, x, c]] / nb;
                        layer = layer + diff * diff;
                    }
                }
            }
            total = total + layer / T::of((h * w) as f64);
        }
        let score = total / T::of(sa.len() as f64);
        score
            .to_f64()
            .ok_or_else(|| Error::Numerical("perceptual score does not fit in f64".into()))
    }
}

/// Scores two equal-size images with the configured backend; reports a
/// feature-disabled error when none is wired up, leaving other metrics
/// usable.
pub fn perceptual_score(
    reference: &Image,
    syn: &Image,
    backend: Option<&dyn PerceptualBackend>,
) -> Result<f64> {
    let backend = backend.ok_or_else(|| {
        Error::FeatureDisabled(
            "no perceptual backend configured; perceptual scores are unavailable".into(),
        )
    })?;
    if reference.height() != syn.height() || reference.width() != syn.width() {
        return Err(Error::invalid(format!(
            "perceptual score needs equal sizes, got {}x{} vs {}x{}",
            reference.height(),
            reference.width(),
            syn.height(),
            syn.width()
        )));
    }
    backend.distance(reference, syn)
}

/// One repetition offset found by the periodicity diagnostic. Offsets use
/// circular (wrap-around) translation; only the canonical half-plane
/// (dy > 0, or dy = 0 with dx > 0) is reported since correlation is
/// symmetric under negation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicityPeak {
    pub dy: isize,
    pub dx: isize,
    pub correlation: f64,
}

#[derive(Debug, Clone)]
pub struct PeriodicityReport {
    /// The input had (near-)zero variance, so correlation is undefined.
    pub degenerate: bool,
    pub threshold: f64,
    /// Peaks above threshold, strongest first, at most 32.
    pub peaks: Vec<PeriodicityPeak>,
    /// Largest off-origin correlation even when below threshold.
    pub max_correlation: f64,
}

impl PeriodicityReport {
    /// True when any repetition offset clears the threshold, the signature
    /// of a replica texture.
    pub fn replica_flag(&self) -> bool {
        !self.peaks.is_empty()
    }
}

fn fft2(data: &mut Array2<Complex<f64>>, inverse: bool) {
    let (h, w) = data.dim();
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for mut row in data.rows_mut() {
        row_fft.process(row.as_slice_mut().expect("rows are contiguous"));
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut buf = vec![Complex::default(); h];
    for j in 0..w {
        for i in 0..h {
            buf[i] = data[[i, j]];
        }
        col_fft.process(&mut buf);
        for i in 0..h {
            data[[i, j]] = buf[i];
        }
    }
}

/// Circular autocorrelation of the luminance channel, normalized so the
/// origin entry is exactly 1. Index (i, j) holds the correlation at offset
/// (dy, dx) with the usual FFT wrap-around (dy = i for i <= h/2, else
/// i - h). Returns `None` when the image has (near-)zero variance.
pub fn autocorrelation_map(img: &Image) -> Option<Array2<f64>> {
    let (h, w) = (img.height(), img.width());
    let data = img.data();
    let mut gray = Array2::<f64>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            gray[[y, x]] = (data[[y, x, 0]] as f64
                + data[[y, x, 1]] as f64
                + data[[y, x, 2]] as f64)
                / 3.0;
        }
    }
    let mean = gray.mean().unwrap_or(0.0);
    gray.mapv_inplace(|v| v - mean);
    let var = gray.iter().map(|v| v * v).sum::<f64>() / (h * w) as f64;
    if var < 1e-12 {
        return None;
    }

    let mut freq = Array2::from_shape_fn((h, w), |(y, x)| Complex::new(gray[[y, x]], 0.0));
    fft2(&mut freq, false);
    freq.mapv_inplace(|v| Complex::new(v.norm_sqr(), 0.0));
    fft2(&mut freq, true);
    // rustfft leaves the round trip unnormalized; dividing by the origin
    // value cancels that factor along with the variance.
    let origin = freq[[0, 0]].re;
    Some(Array2::from_shape_fn((h, w), |(y, x)| {
        freq[[y, x]].re / origin
    }))
}

/// Scans the circular autocorrelation of the luminance channel for strong
/// off-origin peaks; correlation 1 at offset (dy, dx) means the image equals
/// itself translated by that amount.
pub fn periodicity_diagnostic(img: &Image) -> PeriodicityReport {
    let Some(map) = autocorrelation_map(img) else {
        return PeriodicityReport {
            degenerate: true,
            threshold: PERIODICITY_THRESHOLD,
            peaks: Vec::new(),
            max_correlation: 0.0,
        };
    };
    let (h, w) = map.dim();

    let mut peaks = Vec::new();
    let mut max_corr = 0.0f64;
    for i in 0..h {
        for j in 0..w {
            if i == 0 && j == 0 {
                continue;
            }
            let dy = if i <= h / 2 { i as isize } else { i as isize - h as isize };
            let dx = if j <= w / 2 { j as isize } else { j as isize - w as isize };
            if !(dy > 0 || (dy == 0 && dx > 0)) {
                continue;
            }
            let corr = map[[i, j]];
            max_corr = max_corr.max(corr);
            if corr > PERIODICITY_THRESHOLD {
                peaks.push(PeriodicityPeak {
                    dy,
                    dx,
                    correlation: corr,
                });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.correlation
            .partial_cmp(&a.correlation)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    peaks.truncate(MAX_PEAKS);
    PeriodicityReport {
        degenerate: false,
        threshold: PERIODICITY_THRESHOLD,
        peaks,
        max_correlation: max_corr,
    }
}
