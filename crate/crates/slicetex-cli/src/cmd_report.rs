//! The `report` command: scores a directory of reference/synthesis pairs
//! and emits a metric table (plain text plus delimited CSV) and a
//! side-by-side comparison grid.
//!
//! Columns follow the evaluation protocol: a full-image perceptual score,
//! set-level Fréchet and kernel distances over whole-image embeddings, and
//! their crop-based variants (c-FID, c-KID) averaged over pairs. An optional
//! ground-truth row scores each reference against fresh crops of itself,
//! the floor any synthesis method is chasing.

use crate::config::RunConfig;
use crate::io::PairEntry;
use crate::manifest::Manifest;
use crate::{backend, grid, io, CmdError, CmdResult};
use slicetex::metrics::{
    crop_metric, frechet_distance, kid, perceptual_score, CropMetricKind, CropProtocol,
    EmbeddingBackend, PerceptualBackend,
};
use slicetex::Image;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct PairScore {
    pub name: String,
    pub lpips: f64,
    pub crop_fid: f64,
    pub crop_kid: f64,
}

/// One table row: per-pair metrics averaged, set-level metrics as-is (absent
/// below two pairs, where distribution distances are undefined).
#[derive(Debug, Clone)]
pub struct RowSummary {
    pub label: String,
    pub lpips: f64,
    pub fid: Option<f64>,
    pub crop_fid: f64,
    pub kid: Option<f64>,
    pub crop_kid: f64,
}

pub struct ReportResult {
    pub pairs: Vec<PairScore>,
    pub rows: Vec<RowSummary>,
    pub skipped: Vec<(PathBuf, String)>,
    pub table: PathBuf,
    pub csv: PathBuf,
    pub grid: PathBuf,
    pub manifest: PathBuf,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}

fn write_table(path: &Path, rows: &[RowSummary]) -> CmdResult<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14}{:>12}{:>12}{:>12}{:>12}{:>12}\n",
        "method", "LPIPS", "FID", "c-FID", "KID", "c-KID"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<14}{:>12.6}{:>12}{:>12.6}{:>12}{:>12.6}\n",
            r.label,
            r.lpips,
            fmt_opt(r.fid),
            r.crop_fid,
            fmt_opt(r.kid),
            r.crop_kid
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_csv(path: &Path, rows: &[RowSummary], pairs: &[PairScore]) -> CmdResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "name", "lpips", "fid", "c_fid", "kid", "c_kid"])?;
    for r in rows {
        w.write_record([
            "summary",
            &r.label,
            &format!("{:.9}", r.lpips),
            &r.fid.map(|v| format!("{v:.9}")).unwrap_or_default(),
            &format!("{:.9}", r.crop_fid),
            &r.kid.map(|v| format!("{v:.9}")).unwrap_or_default(),
            &format!("{:.9}", r.crop_kid),
        ])?;
    }
    for p in pairs {
        w.write_record([
            "pair",
            &p.name,
            &format!("{:.9}", p.lpips),
            "",
            &format!("{:.9}", p.crop_fid),
            "",
            &format!("{:.9}", p.crop_kid),
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct ScoredPair {
    score: PairScore,
    reference: Image,
    synthesis: Image,
    baseline: Option<Image>,
}

fn score_pair(
    pair: &PairEntry,
    proto: &CropProtocol,
    embed: &dyn EmbeddingBackend,
    perc: &dyn PerceptualBackend,
) -> CmdResult<ScoredPair> {
    let reference = io::load_image(&pair.reference)?;
    let synthesis = io::load_image(&pair.synthesis)?;
    let baseline = pair.baseline.as_deref().map(io::load_image).transpose()?;
    let lpips = perceptual_score(&reference, &synthesis, Some(perc))?;
    let crop_fid = crop_metric(&reference, &synthesis, proto, CropMetricKind::Fid, embed)?;
    let crop_kid = crop_metric(&reference, &synthesis, proto, CropMetricKind::Kid, embed)?;
    Ok(ScoredPair {
        score: PairScore {
            name: pair.name.clone(),
            lpips,
            crop_fid,
            crop_kid,
        },
        reference,
        synthesis,
        baseline,
    })
}

pub fn run(
    cfg: &mut RunConfig,
    dir: &Path,
    out_dir: &Path,
    include_gt: bool,
) -> CmdResult<ReportResult> {
    cfg.resolve_seed();
    let (pair_entries, mut skipped) = io::scan_pairs(dir)?;
    std::fs::create_dir_all(out_dir)?;

    let backend = backend::resolve(cfg)?;
    let embed = backend.embedding()?;
    let perc = backend.perceptual();
    let proto = CropProtocol {
        crop_count: cfg.crop_count,
        crop_size: cfg.crop_size,
        seed: cfg.seed(),
        ground_truth: false,
    };

    let mut scored: Vec<ScoredPair> = Vec::new();
    for pair in &pair_entries {
        match score_pair(pair, &proto, &embed, &perc) {
            Ok(s) => scored.push(s),
            Err(e) => skipped.push((pair.synthesis.clone(), e.to_string())),
        }
    }
    if scored.is_empty() {
        let mut msg = String::from("no pair could be scored");
        for (path, reason) in &skipped {
            msg.push_str(&format!("\n  {}: {reason}", path.display()));
        }
        return Err(CmdError::runtime(msg));
    }

    // Set-level distances over whole-image embeddings need two samples.
    let (fid, kid_v) = if scored.len() >= 2 {
        let refs: Vec<Image> = scored.iter().map(|s| s.reference.clone()).collect();
        let syns: Vec<Image> = scored.iter().map(|s| s.synthesis.clone()).collect();
        let ref_set = embed.embed(&refs)?;
        let syn_set = embed.embed(&syns)?;
        (
            Some(frechet_distance(&ref_set, &syn_set)?),
            Some(kid(&ref_set, &syn_set)?),
        )
    } else {
        (None, None)
    };

    let mut rows = vec![RowSummary {
        label: "synthesis".into(),
        lpips: mean(scored.iter().map(|s| s.score.lpips)),
        fid,
        crop_fid: mean(scored.iter().map(|s| s.score.crop_fid)),
        kid: kid_v,
        crop_kid: mean(scored.iter().map(|s| s.score.crop_kid)),
    }];

    if include_gt {
        let gt_proto = CropProtocol {
            ground_truth: true,
            ..proto
        };
        let mut lpips = Vec::new();
        let mut cfid = Vec::new();
        let mut ckid = Vec::new();
        for s in &scored {
            lpips.push(perceptual_score(&s.reference, &s.reference, Some(&perc))?);
            cfid.push(crop_metric(
                &s.reference,
                &s.reference,
                &gt_proto,
                CropMetricKind::Fid,
                &embed,
            )?);
            ckid.push(crop_metric(
                &s.reference,
                &s.reference,
                &gt_proto,
                CropMetricKind::Kid,
                &embed,
            )?);
        }
        let (gt_fid, gt_kid) = if scored.len() >= 2 {
            let refs: Vec<Image> = scored.iter().map(|s| s.reference.clone()).collect();
            let set = embed.embed(&refs)?;
            (
                Some(frechet_distance(&set, &set)?),
                Some(kid(&set, &set)?),
            )
        } else {
            (None, None)
        };
        rows.push(RowSummary {
            label: "ground-truth".into(),
            lpips: mean(lpips.into_iter()),
            fid: gt_fid,
            crop_fid: mean(cfid.into_iter()),
            kid: gt_kid,
            crop_kid: mean(ckid.into_iter()),
        });
    }

    let table = out_dir.join("report.txt");
    write_table(&table, &rows)?;
    let csv_path = out_dir.join("metrics.csv");
    write_csv(&csv_path, &rows, &scored.iter().map(|s| s.score.clone()).collect::<Vec<_>>())?;

    // Comparison figure: reference | baseline (when present) | synthesis.
    let grid_rows: Vec<Vec<Image>> = scored
        .iter()
        .map(|s| {
            let mut row = vec![s.reference.clone()];
            if let Some(b) = &s.baseline {
                row.push(b.clone());
            }
            row.push(s.synthesis.clone());
            row
        })
        .collect();
    let grid_path = out_dir.join("grid.png");
    io::save_png(&grid_path, &grid::comparison_grid(&grid_rows)?)?;

    let mut man = Manifest::new("report");
    man.push("backbone.checksum", backend.extractor.checksum());
    man.push(
        "backbone.weights_file",
        backend.weights_file.display().to_string(),
    );
    man.push_config(cfg);
    man.push("input.dir", dir.display().to_string());
    man.push("output.table", table.display().to_string());
    man.push("output.csv", csv_path.display().to_string());
    man.push("output.grid", grid_path.display().to_string());
    for s in &scored {
        man.push(
            format!("metric.{}", s.score.name),
            format!(
                "lpips={:.9} c_fid={:.9} c_kid={:.9}",
                s.score.lpips, s.score.crop_fid, s.score.crop_kid
            ),
        );
    }
    for (path, reason) in &skipped {
        man.push("skipped", format!("{}: {reason}", path.display()));
    }
    let manifest_path = out_dir.join("report.manifest.txt");
    man.write(&manifest_path)?;

    Ok(ReportResult {
        pairs: scored.into_iter().map(|s| s.score).collect(),
        rows,
        skipped,
        table,
        csv: csv_path,
        grid: grid_path,
        manifest: manifest_path,
    })
}
