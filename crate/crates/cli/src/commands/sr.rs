use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use irsr::data::io::format_sidecar;
use irsr::data::{save_image, BitDepth, SIDECAR};
use irsr::network::{Checkpoint, MoCoPnet};
use irsr::numerics::{Bound, ParamStore, Tape, Tensor, Var};
use rayon::prelude::*;

use crate::util::{create_dir, preview, require_file, write_text, NamedFrames};

#[derive(Args, Debug, Clone)]
pub struct SrArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Low-resolution sequence directory.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write attention maps and channel-wise L2 norms of features under this directory.
    #[arg(long)]
    pub dump_internals: Option<PathBuf>,
}

/// Channel L2 norm of a `[1, C, H, W]` feature.
fn channel_l2(t: &Tensor<f64>) -> Tensor<f64> {
    let (_, c, h, w) = t.dims4().expect("4-d feature");
    Tensor::from_fn(&[1, 1, h, w], |i| {
        (0..c).map(|k| t.at(0, k, i[2], i[3]).powi(2)).sum::<f64>().sqrt()
    })
}

fn plane(t: &Tensor<f64>, k: usize) -> Tensor<f64> {
    t.narrow_channels(k, 1).expect("channel in range")
}

/// Files are named by frame offset from the reference (`t-1`, `t+2`, …).
fn dump(net: &MoCoPnet, params: &ParamStore<f64>, frames: &[Tensor<f64>], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut tape = Tape::new();
    let bound = Bound::frozen(&mut tape, params);
    let vars: Vec<Var> = frames.iter().map(|f| tape.constant(f.clone())).collect();
    let trace = net.forward_trace(&mut tape, &bound, &vars)?;
    let rel = |i: usize| i as i64 - net.cfg.centre() as i64;
    for (i, &f) in trace.features.iter().enumerate() {
        let p = dir.join(format!("feature_l2_t{:+}.png", rel(i)));
        save_image(&preview(&channel_l2(tape.value(f))), &p, BitDepth::Sixteen)?;
    }
    for &(i, a1, a2) in &trace.attention {
        for (stage, a) in [(1, a1), (2, a2)] {
            let attn = tape.value(a);
            for k in 0..attn.shape()[1] {
                let p = dir.join(format!("attention{stage}_t{:+}_tap{k}.png", rel(i)));
                save_image(&plane(attn, k), &p, BitDepth::Sixteen)?;
            }
        }
    }
    for &(i, v) in &trace.aligned {
        let p = dir.join(format!("aligned_l2_t{:+}.png", rel(i)));
        save_image(&preview(&channel_l2(tape.value(v))), &p, BitDepth::Sixteen)?;
    }
    Ok(())
}

pub fn sr(a: &SrArgs) -> Result<()> {
    require_file(&a.checkpoint, "checkpoint")?;
    let input = NamedFrames::load(&a.input)?;
    let ckpt = Checkpoint::<f64>::load(&a.checkpoint)?;
    let (net, params) = ckpt.network()?;
    let t = net.cfg.frames;
    let n = input.seq.len();
    if n < t {
        bail!("{} has {n} frames but the network needs {t}", a.input.display());
    }
    let half = t / 2;
    let centres: Vec<usize> = (half..n - half).collect();
    let frames = input.seq.frames();
    let outputs = centres
        .par_iter()
        .map(|&c| net.infer(&params, &frames[c - half..=c + half]))
        .collect::<irsr::Result<Vec<_>>>()?;

    create_dir(&a.out)?;
    for (&c, sr) in centres.iter().zip(&outputs) {
        save_image(sr, &a.out.join(format!("{}.png", input.names[c])), BitDepth::Sixteen)?;
    }
    if let Some(ann) = input.seq.annotations() {
        let s = net.cfg.scale as f64;
        let scaled = centres.iter().map(|&c| ann[c].iter().map(|x| x.scaled_up(s)).collect()).collect::<Vec<_>>();
        write_text(&a.out.join(SIDECAR), &format_sidecar(&scaled))?;
    }
    if let Some(dir) = &a.dump_internals {
        for &c in &centres {
            dump(&net, &params, &frames[c - half..=c + half], &dir.join(&input.names[c]))?;
        }
    }
    eprintln!("wrote {} SR frames to {}", centres.len(), a.out.display());
    Ok(())
}
