use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use irsr::data::{save_image, save_map, BitDepth, MAP_EXT, SIDECAR};
use irsr::detectors::{detect, Candidate, Detector, DetectorParams, Resolution};
use rayon::prelude::*;
use serde::Serialize;

use crate::util::{create_dir, preview, require_file, write_json, write_text, DetectorArg, NamedFrames, ResolutionArg};

pub const CANDIDATES: &str = "candidates.csv";
pub const DETECT_REPORT: &str = "detect_report.json";
pub const PREVIEW_DIR: &str = "preview";

#[derive(Args, Debug, Clone)]
pub struct DetectArgs {
    /// Frames to run the detector on.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub detector: DetectorArg,
    /// `key = value` parameter file (e.g. `ipi.block = 15`).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Resolution class selecting the default parameters [default: hr].
    #[arg(long, value_enum)]
    pub resolution: Option<ResolutionArg>,
    /// Absolute candidate threshold; defaults to mean + k·std of each target image.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub k_sigma: f64,
    #[arg(long, default_value_t = 1)]
    pub min_area: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct FrameInfo {
    name: String,
    threshold: Option<f64>,
    converged: bool,
    iterations: usize,
    residual: f64,
    candidates: usize,
}

#[derive(Serialize)]
struct DetectReport {
    detector: Detector,
    params: DetectorParams,
    frames: Vec<FrameInfo>,
}

/// Mean plus `k` population standard deviations, or `None` for a flat map.
pub fn adaptive_threshold(data: &[f64], k: f64) -> Option<f64> {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (var > 0.0).then(|| mean + k * var.sqrt())
}

pub fn resolve_params(a: &DetectArgs) -> Result<DetectorParams> {
    let forced: Option<Resolution> = a.resolution.map(Into::into);
    match &a.params {
        Some(p) => {
            require_file(p, "detector params")?;
            Ok(DetectorParams::load(p, forced)?)
        }
        None => Ok(DetectorParams::preset(forced.unwrap_or(Resolution::Hr))),
    }
}

pub fn detect_cmd(a: &DetectArgs) -> Result<()> {
    let params = resolve_params(a)?;
    let input = NamedFrames::load(&a.input)?;
    let detector: Detector = a.detector.into();
    let results = input
        .seq
        .frames()
        .par_iter()
        .enumerate()
        .map(|(i, f)| detect(f, detector, &params).with_context(|| format!("{detector} on {}", input.names[i])))
        .collect::<Result<Vec<_>>>()?;

    create_dir(&a.out)?;
    create_dir(&a.out.join(PREVIEW_DIR))?;
    let mut csv = String::from("frame,x,y,score,area\n");
    let mut frames = Vec::new();
    for (name, r) in input.names.iter().zip(&results) {
        save_map(&r.target_image, &a.out.join(format!("{name}.{MAP_EXT}")))?;
        save_image(&preview(&r.target_image), &a.out.join(PREVIEW_DIR).join(format!("{name}.png")), BitDepth::Eight)?;
        let threshold = a.threshold.or_else(|| adaptive_threshold(r.target_image.data(), a.k_sigma));
        let cands: Vec<Candidate> = threshold.map_or_else(Vec::new, |t| r.candidates(t, a.min_area));
        for c in &cands {
            csv.push_str(&format!("{name},{},{},{},{}\n", c.x, c.y, c.score, c.area));
        }
        frames.push(FrameInfo {
            name: name.clone(),
            threshold,
            converged: r.converged,
            iterations: r.iterations,
            residual: r.residual,
            candidates: cands.len(),
        });
    }
    write_text(&a.out.join(CANDIDATES), &csv)?;
    let sidecar = a.input.join(SIDECAR);
    if sidecar.exists() {
        fs::copy(&sidecar, a.out.join(SIDECAR)).with_context(|| format!("copying {}", sidecar.display()))?;
    }
    write_json(&a.out.join(DETECT_REPORT), &DetectReport { detector, params, frames })?;
    eprintln!("{detector}: wrote {} target images to {}", results.len(), a.out.display());
    Ok(())
}
