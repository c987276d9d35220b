use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use indexmap::IndexMap;
use irsr::data::io::parse_sidecar;
use irsr::data::{list_maps, load_map, TargetAnnotation, SIDECAR};
use irsr::detectors::INTENSITY_SCALE;
use irsr::metrics::{default_sweep, default_tau, neighborhood_stats, roc, DetectionGains, MetricReport, NeighborhoodSpec, RocCurve};
use irsr::numerics::Tensor;
use serde::Serialize;

use crate::commands::eval_sr::{spec_key, specs_or_default};
use crate::util::{create_dir, file_stem, parse_neighborhood, require_dir, write_json, write_text, NamedFrames, ResolutionArg};

pub const GAINS_JSON: &str = "gains.json";
pub const GAINS_CSV: &str = "gains.csv";
pub const ROC_CSV: &str = "roc.csv";
pub const ROC_JSON: &str = "roc.json";

#[derive(Args, Debug, Clone)]
pub struct EvalDetectArgs {
    /// Low-resolution input frames (before SR) with their sidecar.
    #[arg(long)]
    pub lr: PathBuf,
    /// Detector output directory (`.tmap` target images plus sidecar).
    #[arg(long)]
    pub targets: PathBuf,
    /// Resolution class of the target images.
    #[arg(long, value_enum, default_value = "sr4x")]
    pub resolution: ResolutionArg,
    /// Resolution class of the LR frames.
    #[arg(long, value_enum, default_value = "lr")]
    pub lr_resolution: ResolutionArg,
    /// Target-image neighbourhoods `a,b,d` (repeatable; paired with --lr-neighborhood).
    #[arg(long, value_parser = parse_neighborhood)]
    pub neighborhood: Vec<NeighborhoodSpec>,
    #[arg(long, value_parser = parse_neighborhood)]
    pub lr_neighborhood: Vec<NeighborhoodSpec>,
    /// Matching distance in target-image pixels [default: by resolution class].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Explicit descending thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    /// Number of evenly spaced thresholds when none are given.
    #[arg(long, default_value_t = 50)]
    pub sweep: usize,
    #[arg(long, default_value_t = 1)]
    pub min_area: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct RocSummary<'a> {
    tau: f64,
    auc: f64,
    monotone: bool,
    curve: &'a RocCurve,
}

pub struct EvalDetectOutcome {
    pub gains: MetricReport,
    pub roc: RocCurve,
}

struct Targets {
    names: Vec<String>,
    maps: Vec<Tensor<f64>>,
    annotations: Vec<Vec<TargetAnnotation>>,
}

fn load_targets(dir: &std::path::Path) -> Result<Targets> {
    require_dir(dir, "target image")?;
    let files = list_maps(dir)?;
    if files.is_empty() {
        bail!("no target images in {}", dir.display());
    }
    let maps = files.iter().map(|p| load_map(p)).collect::<irsr::Result<Vec<_>>>()?;
    let sidecar = dir.join(SIDECAR);
    let text = fs::read_to_string(&sidecar).with_context(|| format!("target annotations {}", sidecar.display()))?;
    let annotations = parse_sidecar(&text, maps.len(), &sidecar)?;
    Ok(Targets {
        names: files.iter().map(|p| file_stem(p)).collect(),
        maps,
        annotations,
    })
}

pub fn eval_detect(a: &EvalDetectArgs) -> Result<EvalDetectOutcome> {
    let lr = NamedFrames::load(&a.lr)?;
    let targets = load_targets(&a.targets)?;
    let out_specs = specs_or_default(&a.neighborhood, a.resolution);
    let lr_specs = specs_or_default(&a.lr_neighborhood, a.lr_resolution);
    if out_specs.len() != lr_specs.len() {
        bail!("{} target neighbourhoods but {} LR neighbourhoods", out_specs.len(), lr_specs.len());
    }

    let mut gains = MetricReport::new();
    for (k, name) in targets.names.iter().enumerate() {
        let Some(j) = lr.index_of(name) else {
            bail!("no LR frame named {name} in {}", a.lr.display());
        };
        let lr_ann = lr.annotations(j).unwrap_or(&[]);
        let out_ann = &targets.annotations[k];
        if lr_ann.len() != out_ann.len() {
            bail!("frame {name}: {} LR targets but {} target-image targets", lr_ann.len(), out_ann.len());
        }
        if out_ann.is_empty() {
            continue;
        }
        let lr_img = lr.frame(j).scale(INTENSITY_SCALE);
        let mut m = IndexMap::new();
        for (ls, os) in lr_specs.iter().zip(&out_specs) {
            let mut acc = [0.0; 4];
            for (la, oa) in lr_ann.iter().zip(out_ann) {
                let g = DetectionGains::from_stats(
                    &neighborhood_stats(&lr_img, la, ls)?,
                    &neighborhood_stats(&targets.maps[k], oa, os)?,
                );
                for (slot, v) in acc.iter_mut().zip([g.snrg, g.bsf, g.scrg, g.cg]) {
                    *slot += v;
                }
            }
            let n = out_ann.len() as f64;
            for (key, v) in ["snrg", "bsf", "scrg", "cg"].iter().zip(acc) {
                m.insert(format!("{key}@{}", spec_key(os)), v / n);
            }
        }
        gains.push(name.clone(), m);
    }

    let tau = a.tau.unwrap_or_else(|| default_tau(a.resolution.into()));
    let sweep = if a.thresholds.is_empty() {
        default_sweep(&targets.maps, a.sweep)
    } else {
        a.thresholds.clone()
    };
    let curve = roc(&targets.maps, &targets.annotations, tau, &sweep, a.min_area)?;

    create_dir(&a.out)?;
    write_text(&a.out.join(GAINS_JSON), &(gains.to_json() + "\n"))?;
    write_text(&a.out.join(GAINS_CSV), &gains.to_csv())?;
    write_text(&a.out.join(ROC_CSV), &curve.to_csv())?;
    write_json(
        &a.out.join(ROC_JSON),
        &RocSummary {
            tau,
            auc: curve.auc(),
            monotone: curve.is_monotone(),
            curve: &curve,
        },
    )?;
    Ok(EvalDetectOutcome { gains, roc: curve })
}
