//! Flat `key = value` run configuration.
//!
//! One format serves three roles: config files a user writes, the flag
//! overrides layered on top, and the `config.`-prefixed snapshot embedded in
//! every run manifest. A manifest therefore parses as a config file, which
//! is what makes runs replayable from their manifests alone.

use crate::{CmdError, CmdResult};
use slicetex::sw::{LossWeights, SliceCount, SliceCounts};
use slicetex::vgg::LayerSelection;
use slicetex::SynthesisConfig;
use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

/// Direction-count policy for the height term: a fixed published operating
/// point or one direction per profile row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Slices {
    #[default]
    Auto,
    Fixed(usize),
}

pub const FIXED_SLICE_CHOICES: [usize; 3] = [16, 64, 256];

impl fmt::Display for Slices {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slices::Auto => write!(f, "auto"),
            Slices::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for Slices {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Slices::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if FIXED_SLICE_CHOICES.contains(&k) => Ok(Slices::Fixed(k)),
            _ => Err(format!("invalid slice count {s:?}; expected 16, 64, 256 or auto")),
        }
    }
}

/// Every knob a run can carry. Optional paths stay `None` until a flag or
/// config line provides them; `seed` stays `None` until the command resolves
/// it (recording a fresh random value when the user gave none).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub reference: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub scales: usize,
    pub iters: usize,
    pub learning_rate: f64,
    pub seed: Option<u64>,
    pub backbone_seed: u64,
    pub slices: Slices,
    pub height_loss: bool,
    pub width_loss: bool,
    pub weights_path: Option<PathBuf>,
    pub crop_size: usize,
    pub crop_count: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            reference: None,
            out: None,
            scales: 1,
            iters: 100,
            learning_rate: 1.0,
            seed: None,
            backbone_seed: 0,
            slices: Slices::Auto,
            height_loss: true,
            width_loss: false,
            weights_path: None,
            crop_size: 128,
            crop_count: 64,
        }
    }
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> CmdResult<T> {
    value
        .parse()
        .map_err(|_| CmdError::usage(format!("config key {key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> CmdResult<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CmdError::usage(format!(
            "config key {key}: expected true or false, got {value:?}"
        ))),
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> CmdResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses config text. Keys may carry a `config.` prefix (the manifest
    /// form); other dotted keys are manifest plumbing and are ignored, while
    /// unknown plain keys are rejected as typos.
    pub fn parse(text: &str) -> CmdResult<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CmdError::usage(format!(
                    "config line {}: expected key = value, got {line:?}",
                    lineno + 1
                )));
            };
            let mut key = key.trim();
            let value = value.trim();
            if let Some(stripped) = key.strip_prefix("config.") {
                key = stripped;
            } else if key.contains('.') {
                continue;
            }
            if !seen.insert(key.to_owned()) {
                return Err(CmdError::usage(format!(
                    "config line {}: duplicate key {key}",
                    lineno + 1
                )));
            }
            match key {
                "ref" => cfg.reference = Some(PathBuf::from(value)),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "scales" => cfg.scales = parse_field(key, value)?,
                "iters" => cfg.iters = parse_field(key, value)?,
                "learning_rate" => {
                    cfg.learning_rate = parse_field(key, value)?;
                    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
                        return Err(CmdError::usage(format!(
                            "learning_rate must be positive and finite, got {value}"
                        )));
                    }
                }
                "seed" => cfg.seed = Some(parse_field(key, value)?),
                "backbone_seed" => cfg.backbone_seed = parse_field(key, value)?,
                "slices" => {
                    cfg.slices = value.parse().map_err(CmdError::usage)?;
                }
                "height_loss" => cfg.height_loss = parse_bool(key, value)?,
                "width_loss" => cfg.width_loss = parse_bool(key, value)?,
                "weights_path" => cfg.weights_path = Some(PathBuf::from(value)),
                "crop_size" => cfg.crop_size = parse_field(key, value)?,
                "crop_count" => cfg.crop_count = parse_field(key, value)?,
                other => {
                    return Err(CmdError::usage(format!(
                        "unknown config key {other:?} on line {}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    /// Canonical text form; `parse(serialize(c)) == c` for any config.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        if let Some(p) = &self.reference {
            kv("ref", p.display().to_string());
        }
        if let Some(p) = &self.out {
            kv("out", p.display().to_string());
        }
        kv("scales", self.scales.to_string());
        kv("iters", self.iters.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        if let Some(s) = self.seed {
            kv("seed", s.to_string());
        }
        kv("backbone_seed", self.backbone_seed.to_string());
        kv("slices", self.slices.to_string());
        kv("height_loss", self.height_loss.to_string());
        kv("width_loss", self.width_loss.to_string());
        if let Some(p) = &self.weights_path {
            kv("weights_path", p.display().to_string());
        }
        kv("crop_size", self.crop_size.to_string());
        kv("crop_count", self.crop_count.to_string());
        out
    }

    /// Fills in the master seed if the user never chose one, so the manifest
    /// can record the value every stream derives from.
    pub fn resolve_seed(&mut self) {
        if self.seed.is_none() {
            self.seed = Some(rand::random());
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("seed resolved before use")
    }

    /// Maps the run knobs onto the library's synthesis configuration for the
    /// given layer selection.
    pub fn to_synthesis_config(&self, selection: &LayerSelection) -> SynthesisConfig<f32> {
        let mut weights = if self.height_loss {
            LossWeights::uniform(&selection.channel_layers, &selection.height_layers)
        } else {
            LossWeights::channel_only(&selection.channel_layers)
        };
        if self.width_loss {
            // The experimental width term mirrors the height term's layers.
            weights.width_weights = selection
                .height_layers
                .iter()
                .map(|t| (t.clone(), 1.0))
                .collect();
        }
        let slice_counts = match self.slices {
            Slices::Auto => SliceCounts::default(),
            Slices::Fixed(k) => SliceCounts {
                channel: SliceCount::PerLayerDim,
                height: SliceCount::Fixed(k),
                width: SliceCount::Fixed(k),
            },
        };
        SynthesisConfig {
            scales: self.scales,
            iters: self.iters,
            learning_rate: self.learning_rate,
            weights,
            slice_counts,
            seed: self.seed(),
            cache_reference_features: true,
            allow_width_resample: false,
        }
    }
}
