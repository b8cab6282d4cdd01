//! Image file I/O: PNG and JPEG in, PNG out (lossless outputs keep metric
//! scores honest), plus directory scanning for the report command's
//! reference/synthesis pairs.

use crate::{CmdError, CmdResult};
use ndarray::Array3;
use slicetex::Image;
use std::path::{Path, PathBuf};

const INPUT_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn load_image(path: &Path) -> CmdResult<Image> {
    let decoded = image::open(path)
        .map_err(|e| CmdError::runtime(format!("cannot read image {}: {e}", path.display())))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = Array3::from_shape_fn((h as usize, w as usize, 3), |(y, x, c)| {
        f32::from(rgb.get_pixel(x as u32, y as u32)[c]) / 255.0
    });
    Ok(Image::new(data)?)
}

pub fn save_png(path: &Path, img: &Image) -> CmdResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let (h, w) = (img.height(), img.width());
    let data = img.data();
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [0, 1, 2].map(|c| (data[[y, x, c]].clamp(0.0, 1.0) * 255.0).round() as u8);
            buf.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CmdError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// A matched reference/synthesis pair found in a report directory, with an
/// optional baseline arm for the comparison grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEntry {
    pub name: String,
    pub reference: PathBuf,
    pub synthesis: PathBuf,
    pub baseline: Option<PathBuf>,
}

/// Pairs files by stem: `name.png` (or .jpg/.jpeg) is the reference for
/// `name.synth.png`, with `name.baseline.png` as an optional third arm.
/// Returns matched pairs sorted by name plus a list of files that could not
/// be paired, each with the reason.
pub fn scan_pairs(dir: &Path) -> CmdResult<(Vec<PairEntry>, Vec<(PathBuf, String)>)> {
    let mut references = std::collections::BTreeMap::new();
    let mut synths = std::collections::BTreeMap::new();
    let mut baselines = std::collections::BTreeMap::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CmdError::usage(format!("cannot list {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry?.path();
        let Some(ext) = path.extension().and_then(|e| e.to_str()) else {
            continue;
        };
        if !INPUT_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_owned();
        if let Some(name) = stem.strip_suffix(".synth") {
            synths.insert(name.to_owned(), path);
        } else if let Some(name) = stem.strip_suffix(".baseline") {
            baselines.insert(name.to_owned(), path);
        } else {
            references.insert(stem, path);
        }
    }
    if references.is_empty() && synths.is_empty() && baselines.is_empty() {
        return Err(CmdError::usage(format!(
            "no images found under {}",
            dir.display()
        )));
    }
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (name, synth) in &synths {
        match references.remove(name) {
            Some(reference) => pairs.push(PairEntry {
                name: name.clone(),
                reference,
                synthesis: synth.clone(),
                baseline: baselines.remove(name),
            }),
            None => unmatched.push((synth.clone(), "no matching reference".to_owned())),
        }
    }
    for (_, reference) in references {
        unmatched.push((reference, "no matching synthesis".to_owned()));
    }
    for (_, baseline) in baselines {
        unmatched.push((baseline, "baseline without a matched pair".to_owned()));
    }
    unmatched.sort();
    Ok((pairs, unmatched))
}
