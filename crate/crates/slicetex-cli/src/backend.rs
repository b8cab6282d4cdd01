//! Feature-extractor wiring: weights resolution (explicit path or the seeded
//! cache directory) and the metric backends built on top of it.

use crate::config::RunConfig;
use crate::CmdResult;
use slicetex::metrics::{VggEmbedding, VggPerceptual, EMBEDDING_LAYER};
use slicetex::vgg::{ensure_weights_file, load_extractor, LayerSelection};
use slicetex::FeatureExtractor;
use std::path::PathBuf;

/// Environment variable naming the directory where generated weight files
/// are cached when no explicit `weights_path` is given.
pub const WEIGHTS_DIR_ENV: &str = "SLICETEX_WEIGHTS_DIR";

pub fn weights_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(WEIGHTS_DIR_ENV) {
        return PathBuf::from(dir);
    }
    if let Some(home) = std::env::var_os("HOME") {
        return PathBuf::from(home).join(".cache").join("slicetex");
    }
    std::env::temp_dir().join("slicetex-weights")
}

pub struct Backend {
    pub extractor: FeatureExtractor<f32>,
    pub weights_file: PathBuf,
}

/// Loads the synthesis extractor: the configured weights file if any,
/// otherwise a seeded random checkpoint cached under the weights directory.
pub fn resolve(cfg: &RunConfig) -> CmdResult<Backend> {
    let weights_file = match &cfg.weights_path {
        Some(p) => p.clone(),
        None => ensure_weights_file(&weights_cache_dir(), cfg.backbone_seed)?,
    };
    let extractor = load_extractor::<f32>(&weights_file, LayerSelection::default())?;
    Ok(Backend {
        extractor,
        weights_file,
    })
}

impl Backend {
    /// Embedding backend for distributional metrics: global average pooling
    /// of one mid-depth layer. Built from the same weights file but with a
    /// selection truncated at that layer, so small crops stay legal and the
    /// forward pass stops early.
    pub fn embedding(&self) -> CmdResult<VggEmbedding<f32>> {
        let sel = LayerSelection {
            channel_layers: vec![EMBEDDING_LAYER.to_owned()],
            height_layers: vec![EMBEDDING_LAYER.to_owned()],
        };
        let ex = load_extractor::<f32>(&self.weights_file, sel)?;
        Ok(VggEmbedding::new(ex, EMBEDDING_LAYER)?)
    }

    /// Full-selection perceptual backend.
    pub fn perceptual(&self) -> VggPerceptual<f32> {
        VggPerceptual::new(self.extractor.clone())
    }
}
