use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use irsr::data::{degrade, load_sequence, save_sequence, synth_sequence, BitDepth, ImageFormat, SynthSpec};

use crate::util::{read_toml, require_dir, require_file, write_text};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Png,
    Pgm,
}

impl From<FormatArg> for ImageFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Png => ImageFormat::Png,
            FormatArg::Pgm => ImageFormat::Pgm,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ImageOut {
    /// Output image container.
    #[arg(long, value_enum, default_value = "png")]
    pub format: FormatArg,
    /// Use 8-bit samples instead of 16-bit.
    #[arg(long)]
    pub eight_bit: bool,
}

impl ImageOut {
    pub fn depth(&self) -> BitDepth {
        if self.eight_bit {
            BitDepth::Eight
        } else {
            BitDepth::Sixteen
        }
    }
}

/// Spec echo written next to generated frames.
pub const SPEC_ECHO: &str = "synth_spec.toml";

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// Named scenario: moving-square, point-shift or clutter.
    #[arg(long, default_value = "moving-square")]
    pub preset: String,
    /// TOML scenario file; replaces the preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the frame count.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub image: ImageOut,
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            require_file(p, "scenario")?;
            read_toml::<SynthSpec>(p)?
        }
        None => SynthSpec::preset(&a.preset, a.seed.unwrap_or(0))?,
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(f) = a.frames {
        spec.frames = f;
    }
    let seq = synth_sequence(&spec)?;
    save_sequence(&seq, &a.out, a.image.depth(), a.image.format.into())?;
    write_text(&a.out.join(SPEC_ECHO), &toml::to_string(&spec)?)?;
    eprintln!("wrote {} frames to {}", seq.len(), a.out.display());
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub image: ImageOut,
}

pub fn degrade_cmd(a: &DegradeArgs) -> Result<()> {
    require_dir(&a.input, "input")?;
    let hr = load_sequence(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
    let lr = degrade(&hr, a.scale)?;
    save_sequence(&lr, &a.out, a.image.depth(), a.image.format.into())?;
    eprintln!("wrote {} frames to {}", lr.len(), a.out.display());
    Ok(())
}
