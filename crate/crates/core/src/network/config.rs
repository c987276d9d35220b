use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior_ops::{LstaCfg, ResidualGroupCfg};
use crate::rational::Rational;

/// Architecture of the video SR network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoCoPnetCfg {
    /// Input frames per clip (odd, reference in the middle).
    pub frames: usize,
    pub scale: usize,
    pub channels: usize,
    pub cdrg: ResidualGroupCfg,
    pub rg_coarse: ResidualGroupCfg,
    pub rg_fine: ResidualGroupCfg,
    pub rg_recon: ResidualGroupCfg,
    pub lsta1: LstaCfg,
    pub lsta2: LstaCfg,
}

fn rg(blocks: usize, convs: usize, growth: usize, channels: usize, cd: bool) -> ResidualGroupCfg {
    ResidualGroupCfg {
        blocks,
        convs,
        growth,
        channels,
        central_difference: cd,
    }
}

impl MoCoPnetCfg {
    /// Full-size configuration: C = 64, CD-RG(4, 6, 32), RG1/RG2(1, 4, 64), RG3(8, 6, 32).
    pub fn full() -> Self {
        let c = 64;
        Self {
            frames: 7,
            scale: 4,
            channels: c,
            cdrg: rg(4, 6, 32, c, true),
            rg_coarse: rg(1, 4, 64, c, false),
            rg_fine: rg(1, 4, 64, c, false),
            rg_recon: rg(8, 6, 32, c, false),
            lsta1: LstaCfg {
                kern: 3,
                dila: Rational::integer(3),
                cr: 8,
            },
            lsta2: LstaCfg {
                kern: 3,
                dila: Rational::integer(1),
                cr: 8,
            },
        }
    }

    /// Desk-scale configuration: C = 16 and every group (1, 2, 8).
    pub fn toy() -> Self {
        let c = 16;
        Self {
            channels: c,
            cdrg: rg(1, 2, 8, c, true),
            rg_coarse: rg(1, 2, 8, c, false),
            rg_fine: rg(1, 2, 8, c, false),
            rg_recon: rg(1, 2, 8, c, false),
            ..Self::full()
        }
    }

    pub fn with_frames(mut self, frames: usize) -> Self {
        self.frames = frames;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < 3 || self.frames.is_multiple_of(2) {
            return Err(Error::invalid("network", format!("frame count {} must be odd and >= 3", self.frames)));
        }
        if self.scale < 1 {
            return Err(Error::invalid("network", "scale must be >= 1"));
        }
        for (name, g) in [
            ("cdrg", &self.cdrg),
            ("rg_coarse", &self.rg_coarse),
            ("rg_fine", &self.rg_fine),
            ("rg_recon", &self.rg_recon),
        ] {
            g.validate()?;
            if g.channels != self.channels {
                return Err(Error::invalid(
                    "network",
                    format!("{name} has {} channels, network has {}", g.channels, self.channels),
                ));
            }
        }
        self.lsta1.validate(Some(self.channels))?;
        self.lsta2.validate(Some(self.channels))?;
        Ok(())
    }

    /// Index of the reference frame.
    pub fn centre(&self) -> usize {
        self.frames / 2
    }
}

/// Optimisation schedule and augmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCfg {
    /// Square LR crop size; clips smaller than this are used whole.
    pub patch: usize,
    pub batch: usize,
    pub lr: f64,
    /// Iterations at which the learning rate halves. `None` scales 10k/20k/60k to `iterations`.
    pub halve_at: Option<Vec<usize>>,
    pub iterations: usize,
    pub flip: bool,
    pub rotate: bool,
    pub seed: u64,
    /// A loss row is logged every `log_every` iterations (and at the last one).
    pub log_every: usize,
}

impl Default for TrainCfg {
    fn default() -> Self {
        Self {
            patch: 64,
            batch: 12,
            lr: 1e-3,
            halve_at: None,
            iterations: 100_000,
            flip: true,
            rotate: true,
            seed: 0,
            log_every: 100,
        }
    }
}

/// Reference schedule the default halving marks are scaled from.
const REFERENCE_ITERATIONS: usize = 100_000;
const REFERENCE_MARKS: [usize; 3] = [10_000, 20_000, 60_000];

impl TrainCfg {
    /// Single-clip overfit preset: whole clip, batch 1, no augmentation.
    pub fn toy_overfit() -> Self {
        Self {
            patch: usize::MAX,
            batch: 1,
            iterations: 2000,
            flip: false,
            rotate: false,
            log_every: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid("train", "learning rate must be positive"));
        }
        if self.batch == 0 || self.patch == 0 || self.log_every == 0 {
            return Err(Error::invalid("train", "batch, patch and log_every must be positive"));
        }
        Ok(())
    }

    pub fn marks(&self) -> Vec<usize> {
        match &self.halve_at {
            Some(m) => m.clone(),
            None => REFERENCE_MARKS
                .iter()
                .map(|&m| {
                    let scaled = (m as u128 * self.iterations as u128 + REFERENCE_ITERATIONS as u128 / 2)
                        / REFERENCE_ITERATIONS as u128;
                    scaled as usize
                })
                .collect(),
        }
    }

    /// Learning rate used for the update at 0-based iteration `iter`.
    pub fn lr_at(&self, iter: usize) -> f64 {
        let halvings = self.marks().iter().filter(|&&m| iter >= m).count();
        self.lr * 0.5f64.powi(halvings as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        MoCoPnetCfg::full().validate().unwrap();
        MoCoPnetCfg::toy().validate().unwrap();
        assert!(MoCoPnetCfg::toy().with_frames(4).validate().is_err());
        let mut c = MoCoPnetCfg::toy();
        c.rg_fine.channels = 8;
        assert!(c.validate().is_err());
    }

    #[test]
    fn schedule() {
        let t = TrainCfg::default();
        assert_eq!(t.marks(), vec![10_000, 20_000, 60_000]);
        assert_eq!(t.lr_at(9_999), 1e-3);
        assert_eq!(t.lr_at(10_000), 0.5e-3);
        assert_eq!(t.lr_at(60_000), 0.125e-3);
        let short = TrainCfg {
            iterations: 2000,
            ..TrainCfg::default()
        };
        assert_eq!(short.marks(), vec![200, 400, 1200]);
        assert_eq!(short.lr_at(201), 0.5e-3);
    }
}
