//! Classical single-frame small-target detectors: top-hat, ILCM and IPI.

pub mod ilcm;
pub mod ipi;
pub mod morphology;
pub mod segment;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub use ilcm::ilcm;
pub use ipi::{ipi, Decomposition, IpiParams, IpiResult, PatchImageModel};
pub use morphology::tophat;
pub use segment::{segment, Candidate};

/// Detectors operate on 8-bit-scale intensities.
pub const INTENSITY_SCALE: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detector {
    Tophat,
    Ilcm,
    Ipi,
}

impl Detector {
    pub const ALL: [Detector; 3] = [Detector::Tophat, Detector::Ilcm, Detector::Ipi];

    pub fn name(self) -> &'static str {
        match self {
            Detector::Tophat => "tophat",
            Detector::Ilcm => "ilcm",
            Detector::Ipi => "ipi",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tophat" | "top-hat" => Ok(Detector::Tophat),
            "ilcm" => Ok(Detector::Ilcm),
            "ipi" => Ok(Detector::Ipi),
            other => Err(Error::invalid(
                "detector",
                format!("unknown detector {other:?} (expected tophat, ilcm or ipi)"),
            )),
        }
    }
}

/// Image resolution class; selects the default detector geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    /// Native high-resolution imagery.
    Hr,
    /// 4× super-resolved imagery: all sizes four times larger.
    Sr4x,
    /// 4× downsampled imagery.
    Lr,
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hr" => Ok(Resolution::Hr),
            "sr4x" | "sr" => Ok(Resolution::Sr4x),
            "lr" | "downsampled" => Ok(Resolution::Lr),
            other => Err(Error::invalid("resolution", format!("unknown class {other:?} (hr, sr4x, lr)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TophatParams {
    pub se: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlcmParams {
    pub cell: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub tophat: TophatParams,
    pub ilcm: IlcmParams,
    pub ipi: IpiParams,
}

impl DetectorParams {
    pub fn preset(res: Resolution) -> Self {
        let (se, cell, block, stride) = match res {
            Resolution::Hr => (5, 5, 50, 10),
            Resolution::Sr4x => (20, 20, 200, 40),
            Resolution::Lr => (3, 3, 15, 3),
        };
        Self {
            tophat: TophatParams { se },
            ilcm: IlcmParams { cell },
            ipi: IpiParams {
                block,
                stride,
                ..IpiParams::default()
            },
        }
    }

    /// Parses `key = value` lines (dotted keys such as `ipi.block = 15`). The base preset is
    /// `preset` when given, else the file's `preset = "hr" | "sr4x" | "lr"` key, else `hr`;
    /// the remaining keys override it.
    pub fn parse(text: &str, origin: &Path, preset: Option<Resolution>) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::MalformedConfig {
            kind: "detector params",
            path: origin.to_path_buf(),
            line,
            msg,
        };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            bad(line, e.message().to_string())
        })?;
        let from_file = match table.remove("preset") {
            Some(toml::Value::String(s)) => Some(s.parse().map_err(|e: Error| bad(0, e.to_string()))?),
            Some(other) => return Err(bad(0, format!("preset must be a string, got {other}"))),
            None => None,
        };
        let preset = preset.or(from_file).unwrap_or(Resolution::Hr);
        let mut base = toml::Value::try_from(Self::preset(preset)).expect("params serialize");
        merge(&mut base, toml::Value::Table(table));
        let params: Self = base.try_into().map_err(|e: toml::de::Error| bad(0, e.message().to_string()))?;
        params.validate().map_err(|e| bad(0, e.to_string()))?;
        Ok(params)
    }

    pub fn load(path: &Path, preset: Option<Resolution>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path, preset)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tophat.se < 3 || self.ilcm.cell < 3 {
            return Err(Error::invalid("detector params", "top-hat and ILCM sizes must be >= 3"));
        }
        self.ipi.validate()
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
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

/// Output of one detector on one image.
#[derive(Clone, Debug)]
pub struct DetectionResult {
    pub target_image: Tensor<f64>,
    /// IPI only: whether the feasibility tolerance was reached.
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl DetectionResult {
    pub fn candidates(&self, threshold: f64, min_area: usize) -> Vec<Candidate> {
        segment(&self.target_image, threshold, min_area)
    }
}

/// Runs `detector` on a `[0, 1]` image rescaled to `[0, 255]`.
pub fn detect(img: &Tensor<f64>, detector: Detector, params: &DetectorParams) -> Result<DetectionResult> {
    let scaled = img.scale(INTENSITY_SCALE);
    let simple = |t| DetectionResult {
        target_image: t,
        converged: true,
        iterations: 1,
        residual: 0.0,
    };
    match detector {
        Detector::Tophat => Ok(simple(tophat(&scaled, params.tophat.se)?)),
        Detector::Ilcm => Ok(simple(ilcm(&scaled, params.ilcm.cell)?)),
        Detector::Ipi => {
            let r = ipi(&scaled, &params.ipi)?;
            Ok(DetectionResult {
                target_image: r.target_image,
                converged: r.converged,
                iterations: r.iterations,
                residual: r.residual,
            })
        }
    }
}
