//! The `ablate-slices` command: times synthesis under each height-term
//! direction budget (16, 64, 256, one per row, and the term disabled), five
//! runs per setting per texture, and reports mean ± standard deviation in a
//! runtime table.

use crate::config::{RunConfig, Slices};
use crate::manifest::Manifest;
use crate::{backend, io, CmdError, CmdResult};
use slicetex::synthesize_multiscale;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const ARMS: [&str; 5] = ["16", "64", "256", "auto", "none"];
pub const RUNS_PER_ARM: usize = 5;

#[derive(Debug, Clone)]
pub struct AblationCell {
    pub texture: String,
    pub arm: String,
    pub seconds: Vec<f64>,
}

impl AblationCell {
    pub fn mean(&self) -> f64 {
        self.seconds.iter().sum::<f64>() / self.seconds.len() as f64
    }

    /// Sample standard deviation over the runs.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        let n = self.seconds.len();
        if n < 2 {
            return 0.0;
        }
        (self.seconds.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

pub struct AblatePaths {
    pub table: PathBuf,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

fn arm_config(base: &RunConfig, arm: &str) -> RunConfig {
    let mut cfg = base.clone();
    match arm {
        "none" => {
            cfg.height_loss = false;
            cfg.slices = Slices::Auto;
        }
        "auto" => {
            cfg.height_loss = true;
            cfg.slices = Slices::Auto;
        }
        fixed => {
            cfg.height_loss = true;
            cfg.slices = fixed.parse().expect("arm list holds valid slice counts");
        }
    }
    cfg
}

fn texture_label(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("texture")
        .to_owned()
}

pub fn run(
    cfg: &mut RunConfig,
    textures: &[PathBuf],
    out_dir: &Path,
) -> CmdResult<(Vec<AblationCell>, AblatePaths)> {
    if textures.is_empty() {
        return Err(CmdError::usage("ablate-slices needs at least one texture"));
    }
    cfg.resolve_seed();
    std::fs::create_dir_all(out_dir)?;
    let backend = backend::resolve(cfg)?;

    let mut cells = Vec::new();
    for tex in textures {
        let reference = io::load_image(tex)?;
        let label = texture_label(tex);
        for arm in ARMS {
            let arm_cfg = arm_config(cfg, arm);
            let mut seconds = Vec::with_capacity(RUNS_PER_ARM);
            for rep in 0..RUNS_PER_ARM {
                let mut scfg = arm_cfg.to_synthesis_config(backend.extractor.selection());
                scfg.seed = cfg.seed().wrapping_add(rep as u64);
                let clock = Instant::now();
                synthesize_multiscale(&reference, &backend.extractor, &scfg)?;
                seconds.push(clock.elapsed().as_secs_f64());
            }
            cells.push(AblationCell {
                texture: label.clone(),
                arm: arm.to_owned(),
                seconds,
            });
        }
    }

    let csv_path = out_dir.join("ablation.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["texture", "slices", "run", "seconds"])?;
    for cell in &cells {
        for (rep, s) in cell.seconds.iter().enumerate() {
            w.write_record([
                cell.texture.clone(),
                cell.arm.clone(),
                rep.to_string(),
                format!("{s:.6}"),
            ])?;
        }
    }
    w.flush()?;

    // Text table: one row per slice setting, one column per texture.
    let labels: Vec<String> = textures.iter().map(|t| texture_label(t)).collect();
    let mut table = format!("{:<8}", "slices");
    for l in &labels {
        table.push_str(&format!("{l:>22}"));
    }
    table.push('\n');
    for arm in ARMS {
        table.push_str(&format!("{arm:<8}"));
        for l in &labels {
            let cell = cells
                .iter()
                .find(|c| &c.texture == l && c.arm == arm)
                .expect("every (texture, arm) pair was timed");
            table.push_str(&format!(
                "{:>22}",
                format!("{:.3} ± {:.3} s", cell.mean(), cell.std())
            ));
        }
        table.push('\n');
    }
    let table_path = out_dir.join("ablation.txt");
    std::fs::write(&table_path, &table)?;

    let mut man = Manifest::new("ablate-slices");
    man.push("backbone.checksum", backend.extractor.checksum());
    man.push(
        "backbone.weights_file",
        backend.weights_file.display().to_string(),
    );
    man.push_config(cfg);
    for tex in textures {
        man.push("input.texture", tex.display().to_string());
    }
    man.push("output.table", table_path.display().to_string());
    man.push("output.csv", csv_path.display().to_string());
    man.push("runs_per_arm", RUNS_PER_ARM.to_string());
    let manifest_path = out_dir.join("ablation.manifest.txt");
    man.write(&manifest_path)?;

    Ok((
        cells,
        AblatePaths {
            table: table_path,
            csv: csv_path,
            manifest: manifest_path,
        },
    ))
}
