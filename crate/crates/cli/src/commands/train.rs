use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use irsr::data::{load_manifest, load_sequence};
use irsr::network::{Checkpoint, Dataset, LossRecord, MoCoPnetCfg, TrainCfg, Trainer};
use irsr::Real;
use serde::{Deserialize, Serialize};

use crate::util::{create_dir, overlay, read_toml, require_dir, require_file, write_json, write_text};

pub const CHECKPOINT: &str = "checkpoint.ckpt";
pub const LOSS_CSV: &str = "loss.csv";
pub const RUN_ECHO: &str = "run_config.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    /// C = 16, every residual group (1, 2, 8).
    Toy,
    /// C = 64 reference architecture.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleArg {
    /// Whole clip, batch 1, 2000 iterations, no augmentation.
    ToyOverfit,
    /// 64-pixel crops, batch 12, 100k iterations, flips and rotations.
    Standard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Manifest of `split path` lines; `train` entries are HR sequence directories.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with optional `[model]` and `[train]` tables overriding the presets.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "toy")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "toy-overfit")]
    pub schedule: ScheduleArg,
    /// Input frames per clip.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub log_every: Option<usize>,
    /// Continue from this checkpoint; its iteration counter carries on.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: Precision,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunFile {
    model: Option<toml::Table>,
    train: Option<toml::Table>,
}

#[derive(Serialize)]
struct RunEcho<'a> {
    model: &'a MoCoPnetCfg,
    train: &'a TrainCfg,
    precision: Precision,
    resumed_from: Option<&'a Path>,
    start_iteration: usize,
}

fn training_sequences(manifest: &Path) -> Result<Vec<PathBuf>> {
    let entries = load_manifest(manifest)?;
    let dirs: Vec<PathBuf> = entries.into_iter().filter(|e| e.split == "train").map(|e| e.path).collect();
    if dirs.is_empty() {
        bail!("manifest {} lists no `train` sequences", manifest.display());
    }
    for d in &dirs {
        require_dir(d, "training sequence")?;
    }
    Ok(dirs)
}

pub fn loss_csv(history: &[LossRecord]) -> String {
    let mut s = String::from("iteration,loss,lr,best\n");
    for r in history {
        s.push_str(&format!("{},{},{},{}\n", r.iteration, r.loss, r.lr, r.best));
    }
    s
}

pub fn train(a: &TrainArgs) -> Result<()> {
    require_file(&a.manifest, "manifest")?;
    if let Some(c) = &a.config {
        require_file(c, "config")?;
    }
    if let Some(r) = &a.resume {
        require_file(r, "checkpoint")?;
    }
    let dirs = training_sequences(&a.manifest)?;
    let file: RunFile = match &a.config {
        Some(p) => read_toml(p)?,
        None => RunFile::default(),
    };
    match a.precision {
        Precision::F32 => run::<f32>(a, file, &dirs),
        Precision::F64 => run::<f64>(a, file, &dirs),
    }
}

fn run<T: Real>(a: &TrainArgs, file: RunFile, dirs: &[PathBuf]) -> Result<()> {
    let resume = a.resume.as_deref().map(Checkpoint::<T>::load).transpose()?;

    let model_base = match (&resume, a.model) {
        (Some(c), _) => c.cfg.clone(),
        (None, ModelArg::Toy) => MoCoPnetCfg::toy(),
        (None, ModelArg::Full) => MoCoPnetCfg::full(),
    };
    let mut cfg: MoCoPnetCfg = overlay(&model_base, file.model, "model")?;
    if let Some(f) = a.frames {
        cfg.frames = f;
    }
    let train_base = match (resume.as_ref().and_then(|c| c.meta.train.clone()), a.schedule) {
        (Some(t), _) => t,
        (None, ScheduleArg::ToyOverfit) => TrainCfg::toy_overfit(),
        (None, ScheduleArg::Standard) => TrainCfg::default(),
    };
    let mut tcfg: TrainCfg = overlay(&train_base, file.train, "train")?;
    if let Some(v) = a.iterations {
        tcfg.iterations = v;
    }
    if let Some(v) = a.seed {
        tcfg.seed = v;
    }
    if let Some(v) = a.lr {
        tcfg.lr = v;
    }
    if let Some(v) = a.log_every {
        tcfg.log_every = v;
    }
    cfg.validate()?;
    tcfg.validate()?;

    let seqs = dirs
        .iter()
        .map(|d| load_sequence(d).with_context(|| format!("loading {}", d.display())))
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset::from_hr(&seqs, cfg.frames, cfg.scale)?;
    if data.is_empty() {
        bail!("no sequence has {} frames", cfg.frames);
    }

    let mut trainer = match resume {
        Some(c) => {
            if c.cfg != cfg {
                bail!("model settings differ from the checkpoint's");
            }
            Trainer::resume(c, tcfg.clone())?
        }
        None => Trainer::<T>::new(cfg.clone(), tcfg.clone())?,
    };
    create_dir(&a.out)?;
    write_json(
        &a.out.join(RUN_ECHO),
        &RunEcho {
            model: &cfg,
            train: &tcfg,
            precision: a.precision,
            resumed_from: a.resume.as_deref(),
            start_iteration: trainer.iteration,
        },
    )?;
    let every = (tcfg.iterations / tcfg.log_every.max(1) / 20).max(1);
    let mut n = 0usize;
    trainer.run(&data, |r| {
        if n.is_multiple_of(every) {
            eprintln!("iter {:>7}  loss {:.6e}  lr {:.2e}", r.iteration, r.loss, r.lr);
        }
        n += 1;
    })?;
    trainer.checkpoint().save(&a.out.join(CHECKPOINT))?;
    write_text(&a.out.join(LOSS_CSV), &loss_csv(&trainer.history))?;
    if let (Some(first), Some(last)) = (trainer.history.first(), trainer.history.last()) {
        eprintln!(
            "trained {} -> {} iterations, loss {:.4e} -> {:.4e}",
            first.iteration,
            trainer.iteration,
            first.loss,
            last.loss
        );
    }
    Ok(())
}
