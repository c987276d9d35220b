use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use indexmap::IndexMap;
use irsr::data::TargetAnnotation;
use irsr::detectors::INTENSITY_SCALE;
use irsr::metrics::{local_cr, local_snr, neighborhood_stats, psnr, ssim, MetricReport, NeighborhoodSpec};
use irsr::numerics::Tensor;

use crate::util::{parse_neighborhood, write_text, NamedFrames, ResolutionArg};

#[derive(Args, Debug, Clone)]
pub struct EvalSrArgs {
    /// Super-resolved frames.
    #[arg(long)]
    pub sr: PathBuf,
    /// Ground-truth frames (matched by file name) with their annotation sidecar.
    #[arg(long)]
    pub gt: PathBuf,
    /// PSNR/SSIM dynamic range of the `[0, 1]` images.
    #[arg(long, default_value_t = 1.0)]
    pub peak: f64,
    /// Resolution class selecting the default neighbourhoods.
    #[arg(long, value_enum, default_value = "hr")]
    pub resolution: ResolutionArg,
    /// Neighbourhood `a,b,d`; repeat for several. Replaces the resolution class defaults.
    #[arg(long, value_parser = parse_neighborhood)]
    pub neighborhood: Vec<NeighborhoodSpec>,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV copy of the report.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn spec_key(s: &NeighborhoodSpec) -> String {
    format!("{}x{}x{}", s.a, s.b, s.d)
}

pub fn specs_or_default(given: &[NeighborhoodSpec], res: ResolutionArg) -> Vec<NeighborhoodSpec> {
    if given.is_empty() {
        NeighborhoodSpec::presets(res.into()).to_vec()
    } else {
        given.to_vec()
    }
}

/// Mean SNR and CR over the annotated targets of one 8-bit-scale frame.
fn target_metrics(img: &Tensor<f64>, ann: &[TargetAnnotation], spec: &NeighborhoodSpec) -> Result<(f64, f64)> {
    let (mut snr, mut cr) = (0.0, 0.0);
    for t in ann {
        let s = neighborhood_stats(img, t, spec)?;
        snr += local_snr(&s);
        cr += local_cr(&s);
    }
    let n = ann.len() as f64;
    Ok((snr / n, cr / n))
}

pub fn eval_sr(a: &EvalSrArgs) -> Result<MetricReport> {
    let sr = NamedFrames::load(&a.sr)?;
    let gt = NamedFrames::load(&a.gt)?;
    let specs = specs_or_default(&a.neighborhood, a.resolution);
    let mut report = MetricReport::new();
    for (i, name) in sr.names.iter().enumerate() {
        let Some(j) = gt.index_of(name) else {
            bail!("no ground-truth frame named {name} in {}", a.gt.display());
        };
        let (x, y) = (sr.frame(i), gt.frame(j));
        let mut m = IndexMap::new();
        m.insert("psnr".to_string(), psnr(x, y, a.peak)?);
        m.insert("ssim".to_string(), ssim(x, y, a.peak)?);
        if let Some(ann) = gt.annotations(j).filter(|l| !l.is_empty()) {
            let scaled = x.scale(INTENSITY_SCALE);
            for s in &specs {
                let (snr, cr) = target_metrics(&scaled, ann, s).with_context(|| format!("frame {name}"))?;
                m.insert(format!("snr@{}", spec_key(s)), snr);
                m.insert(format!("cr@{}", spec_key(s)), cr);
            }
        }
        report.push(name.clone(), m);
    }
    if report.rows.is_empty() {
        bail!("{} holds no frames", a.sr.display());
    }
    write_text(&a.out, &(report.to_json() + "\n"))?;
    if let Some(c) = &a.csv {
        write_text(c, &report.to_csv())?;
    }
    Ok(report)
}
