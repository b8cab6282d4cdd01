//! The `multiscale-sweep` command: synthesizes one reference at pyramid depths
//! K = 0..=max, saves each output, and tabulates final loss, runtime, and the
//! autocorrelation replica flag so depth-induced copying is easy to spot.

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::{backend, io, CmdError, CmdResult};
use slicetex::metrics::periodicity_diagnostic;
use slicetex::synthesize_multiscale;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scales: usize,
    /// "ok" or a short reason why this depth was skipped.
    pub status: String,
    pub final_loss: Option<f64>,
    pub seconds: Option<f64>,
    pub replica: Option<bool>,
    pub max_correlation: Option<f64>,
    pub image: Option<PathBuf>,
}

pub struct SweepPaths {
    pub table: PathBuf,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

pub fn run(
    cfg: &mut RunConfig,
    max_scales: usize,
    out_dir: &Path,
) -> CmdResult<(Vec<SweepRow>, SweepPaths)> {
    let reference_path = cfg
        .reference
        .clone()
        .ok_or_else(|| CmdError::usage("multiscale-sweep needs --ref"))?;
    cfg.resolve_seed();
    std::fs::create_dir_all(out_dir)?;
    let reference = io::load_image(&reference_path)?;
    let backend = backend::resolve(cfg)?;

    let mut rows = Vec::new();
    for k in 0..=max_scales {
        let mut scfg = cfg.to_synthesis_config(backend.extractor.selection());
        scfg.scales = k;
        let clock = Instant::now();
        match synthesize_multiscale(&reference, &backend.extractor, &scfg) {
            Ok((out, trace)) => {
                let seconds = clock.elapsed().as_secs_f64();
                let image_path = out_dir.join(format!("scales-{k}.png"));
                io::save_png(&image_path, &out)?;
                let diag = periodicity_diagnostic(&out);
                let final_loss = trace
                    .scales
                    .last()
                    .and_then(|s| s.losses.last())
                    .copied()
                    .unwrap_or(f64::NAN);
                rows.push(SweepRow {
                    scales: k,
                    status: "ok".to_owned(),
                    final_loss: Some(final_loss),
                    seconds: Some(seconds),
                    replica: Some(diag.replica_flag()),
                    max_correlation: Some(diag.max_correlation),
                    image: Some(image_path),
                });
            }
            Err(e) => rows.push(SweepRow {
                scales: k,
                status: e.to_string(),
                final_loss: None,
                seconds: None,
                replica: None,
                max_correlation: None,
                image: None,
            }),
        }
    }

    if rows.iter().all(|r| r.status != "ok") {
        let reasons: Vec<String> = rows
            .iter()
            .map(|r| format!("scales={}: {}", r.scales, r.status))
            .collect();
        return Err(CmdError::runtime(format!(
            "every pyramid depth failed: {}",
            reasons.join("; ")
        )));
    }

    let csv_path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "scales",
        "status",
        "final_loss",
        "seconds",
        "replica",
        "max_correlation",
        "image",
    ])?;
    for r in &rows {
        w.write_record([
            r.scales.to_string(),
            r.status.clone(),
            r.final_loss.map(|v| format!("{v:.6e}")).unwrap_or_default(),
            r.seconds.map(|v| format!("{v:.3}")).unwrap_or_default(),
            r.replica.map(|v| v.to_string()).unwrap_or_default(),
            r.max_correlation
                .map(|v| format!("{v:.4}"))
                .unwrap_or_default(),
            r.image
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut table = format!(
        "{:<8}{:>14}{:>10}{:>9}{:>10}  {}\n",
        "scales", "final_loss", "seconds", "replica", "max_corr", "status"
    );
    for r in &rows {
        table.push_str(&format!(
            "{:<8}{:>14}{:>10}{:>9}{:>10}  {}\n",
            r.scales,
            r.final_loss
                .map(|v| format!("{v:.4e}"))
                .unwrap_or_else(|| "-".into()),
            r.seconds
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into()),
            r.replica
                .map(|v| if v { "yes" } else { "no" }.to_owned())
                .unwrap_or_else(|| "-".into()),
            r.max_correlation
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into()),
            r.status
        ));
    }
    let table_path = out_dir.join("sweep.txt");
    std::fs::write(&table_path, &table)?;

    let mut man = Manifest::new("multiscale-sweep");
    man.push("backbone.checksum", backend.extractor.checksum());
    man.push(
        "backbone.weights_file",
        backend.weights_file.display().to_string(),
    );
    man.push_config(cfg);
    man.push("sweep.max_scales", max_scales.to_string());
    man.push("output.table", table_path.display().to_string());
    man.push("output.csv", csv_path.display().to_string());
    for r in &rows {
        if let Some(img) = &r.image {
            man.push("output.image", img.display().to_string());
        }
    }
    let manifest_path = out_dir.join("sweep.manifest.txt");
    man.write(&manifest_path)?;

    Ok((
        rows,
        SweepPaths {
            table: table_path,
            csv: csv_path,
            manifest: manifest_path,
        },
    ))
}
