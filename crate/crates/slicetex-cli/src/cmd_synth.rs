//! The `synth` command: one exemplar in, one synthesized texture out, plus a
//! per-iteration loss trace (CSV) and a replayable manifest.

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::{backend, io, CmdError, CmdResult};
use slicetex::synth::SynthesisTrace;
use slicetex::synthesize_multiscale;
use std::path::{Path, PathBuf};

pub struct SynthPaths {
    pub image: PathBuf,
    pub trace: PathBuf,
    pub manifest: PathBuf,
}

/// `out.png` -> `out.<suffix>`; files land next to the synthesized image.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("output");
    out.with_file_name(format!("{stem}.{suffix}"))
}

pub fn write_trace_csv(path: &Path, trace: &SynthesisTrace) -> CmdResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scale", "height", "width", "iteration", "loss"])?;
    for (i, scale) in trace.scales.iter().enumerate() {
        for (iter, loss) in scale.losses.iter().enumerate() {
            w.write_record([
                i.to_string(),
                scale.height.to_string(),
                scale.width.to_string(),
                iter.to_string(),
                format!("{loss:.9e}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn push_trace(man: &mut Manifest, trace: &SynthesisTrace) {
    man.push(
        "trace.total_seconds",
        format!("{:.3}", trace.total_seconds()),
    );
    for (i, s) in trace.scales.iter().enumerate() {
        let first = s.losses.first().copied().unwrap_or(f64::NAN);
        let last = s.losses.last().copied().unwrap_or(f64::NAN);
        man.push(
            format!("trace.scale.{i}"),
            format!(
                "height={} width={} loss_samples={} first_loss={first:.6e} \
                 final_loss={last:.6e} seconds={:.3}",
                s.height,
                s.width,
                s.losses.len(),
                s.elapsed_seconds
            ),
        );
    }
}

pub fn run(cfg: &mut RunConfig) -> CmdResult<SynthPaths> {
    let ref_path = cfg
        .reference
        .clone()
        .ok_or_else(|| CmdError::usage("synth needs --ref (or a config with one)"))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CmdError::usage("synth needs --out (or a config with one)"))?;
    cfg.resolve_seed();

    let reference = io::load_image(&ref_path)?;
    let backend = backend::resolve(cfg)?;
    let synth_cfg = cfg.to_synthesis_config(backend.extractor.selection());
    let (img, trace) = synthesize_multiscale(&reference, &backend.extractor, &synth_cfg)?;

    io::save_png(&out, &img)?;
    let trace_path = sibling(&out, "trace.csv");
    write_trace_csv(&trace_path, &trace)?;

    let mut man = Manifest::new("synth");
    man.push("backbone.checksum", backend.extractor.checksum());
    man.push(
        "backbone.weights_file",
        backend.weights_file.display().to_string(),
    );
    man.push_config(cfg);
    if cfg.scales >= 2 {
        man.push(
            "note.replica_risk",
            "pyramid depth 2+ tends to reproduce the exemplar verbatim; \
             check the periodicity diagnostic on the output",
        );
    }
    man.push("output.image", out.display().to_string());
    man.push("output.trace", trace_path.display().to_string());
    push_trace(&mut man, &trace);
    let manifest_path = sibling(&out, "manifest.txt");
    man.write(&manifest_path)?;

    Ok(SynthPaths {
        image: out,
        trace: trace_path,
        manifest: manifest_path,
    })
}
