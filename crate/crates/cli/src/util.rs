use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use irsr::data::{list_frames, load_sequence, FrameSequence, TargetAnnotation};
use irsr::detectors::{Detector, Resolution};
use irsr::metrics::NeighborhoodSpec;
use irsr::numerics::Tensor;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ResolutionArg {
    Hr,
    Sr4x,
    Lr,
}

impl From<ResolutionArg> for Resolution {
    fn from(r: ResolutionArg) -> Self {
        match r {
            ResolutionArg::Hr => Resolution::Hr,
            ResolutionArg::Sr4x => Resolution::Sr4x,
            ResolutionArg::Lr => Resolution::Lr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DetectorArg {
    Tophat,
    Ilcm,
    Ipi,
}

impl From<DetectorArg> for Detector {
    fn from(d: DetectorArg) -> Self {
        match d {
            DetectorArg::Tophat => Detector::Tophat,
            DetectorArg::Ilcm => Detector::Ilcm,
            DetectorArg::Ipi => Detector::Ipi,
        }
    }
}

/// `a,b,d` on the command line.
pub fn parse_neighborhood(s: &str) -> std::result::Result<NeighborhoodSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, d] = parts[..] else {
        return Err(format!("expected a,b,d but got {s:?}"));
    };
    let num = |v: &str| v.parse::<usize>().map_err(|_| format!("{v:?} is not a positive integer"));
    NeighborhoodSpec::new(num(a)?, num(b)?, num(d)?).map_err(|e| e.to_string())
}

pub fn require_dir(p: &Path, what: &str) -> Result<()> {
    if !p.is_dir() {
        bail!("{what} directory {} does not exist", p.display());
    }
    Ok(())
}

pub fn require_file(p: &Path, what: &str) -> Result<()> {
    if !p.is_file() {
        bail!("{what} file {} does not exist", p.display());
    }
    Ok(())
}

pub fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()))
}

pub fn write_text(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))
}

pub fn write_json(p: &Path, value: &impl Serialize) -> Result<()> {
    write_text(p, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn file_stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

/// A frame directory with each frame's file stem.
pub struct NamedFrames {
    pub names: Vec<String>,
    pub seq: FrameSequence,
}

impl NamedFrames {
    pub fn load(dir: &Path) -> Result<Self> {
        require_dir(dir, "frame")?;
        let names = list_frames(dir)?.iter().map(|p| file_stem(p)).collect();
        let seq = load_sequence(dir).with_context(|| format!("loading {}", dir.display()))?;
        Ok(Self { names, seq })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn frame(&self, i: usize) -> &Tensor<f64> {
        self.seq.frame(i)
    }

    pub fn annotations(&self, i: usize) -> Option<&[TargetAnnotation]> {
        self.seq.annotations().map(|a| a[i].as_slice())
    }
}

/// Deserializes `base` overlaid with a config-file table (tables merge key by key).
pub fn overlay<T: Serialize + DeserializeOwned>(base: &T, overlay: Option<toml::Table>, what: &str) -> Result<T> {
    let mut v = serde_json::to_value(base)?;
    if let Some(over) = overlay {
        merge(&mut v, serde_json::to_value(over)?);
    }
    serde_json::from_value(v).with_context(|| format!("invalid {what} settings"))
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn read_toml<T: DeserializeOwned>(p: &Path) -> Result<T> {
    let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
    toml::from_str(&text).with_context(|| format!("malformed config {}", p.display()))
}

/// Rescales to `[0, 1]` by the maximum for previews; non-positive images become black.
pub fn preview(img: &Tensor<f64>) -> Tensor<f64> {
    let m = img.max();
    if m > 0.0 {
        img.map(|v| (v / m).clamp(0.0, 1.0))
    } else {
        Tensor::zeros(img.shape())
    }
}
