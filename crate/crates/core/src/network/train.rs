use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{degrade, FrameSequence};
use crate::error::{Error, Result};
use crate::network::checkpoint::{AdamSnapshot, Checkpoint, CheckpointMeta};
use crate::network::config::{MoCoPnetCfg, TrainCfg};
use crate::network::model::MoCoPnet;
use crate::numerics::{AdamState, Bound, ParamStore, Tape, Tensor, Var};
use crate::scalar::Real;

/// One training example: `frames` LR frames and the HR centre frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub lr: Vec<Tensor<f64>>,
    pub hr: Tensor<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: Sample) {
        self.samples.push(s);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Every full temporal window of an aligned LR/HR pair of sequences.
    pub fn add_pair(&mut self, lr: &FrameSequence, hr: &FrameSequence, frames: usize, scale: usize) -> Result<()> {
        let ((lh, lw), (hh, hw)) = (lr.size(), hr.size());
        if lr.len() != hr.len() || lh * scale != hh || lw * scale != hw {
            return Err(Error::invalid(
                "dataset",
                format!("LR {}x{lh}x{lw} does not match HR {}x{hh}x{hw} at scale {scale}", lr.len(), hr.len()),
            ));
        }
        if lr.len() < frames {
            return Ok(());
        }
        let half = frames / 2;
        for c in half..lr.len() - half {
            self.samples.push(Sample {
                lr: lr.frames()[c - half..=c + half].to_vec(),
                hr: hr.frame(c).clone(),
            });
        }
        Ok(())
    }

    /// Degrades each HR sequence by `scale` and adds all its windows.
    pub fn from_hr(seqs: &[FrameSequence], frames: usize, scale: usize) -> Result<Self> {
        let mut d = Self::new();
        for hr in seqs {
            d.add_pair(&degrade(hr, scale)?, hr, frames, scale)?;
        }
        Ok(d)
    }
}

/// Spatial transform shared by a clip and its target.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Augment {
    flip_h: bool,
    flip_v: bool,
    transpose: bool,
}

/// Crops `[1,1,H,W]` at `(y0, x0)` to `ph × pw` and applies `aug`.
fn crop_augment(t: &Tensor<f64>, y0: usize, x0: usize, ph: usize, pw: usize, aug: Augment) -> Tensor<f64> {
    let (oh, ow) = if aug.transpose { (pw, ph) } else { (ph, pw) };
    Tensor::from_fn(&[1, 1, oh, ow], |i| {
        let (mut y, mut x) = (i[2], i[3]);
        if aug.transpose {
            std::mem::swap(&mut y, &mut x);
        }
        if aug.flip_v {
            y = ph - 1 - y;
        }
        if aug.flip_h {
            x = pw - 1 - x;
        }
        t.at(0, 0, y0 + y, x0 + x)
    })
}

fn stack<T: Real>(parts: &[Tensor<f64>]) -> Tensor<T> {
    let (h, w) = parts[0].hw();
    let data = parts.iter().flat_map(|p| p.data().iter().map(|&v| T::lit(v))).collect();
    Tensor::new(&[parts.len(), 1, h, w], data).expect("equal crops")
}

/// Logged loss row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    /// 0-based iteration whose batch loss this is.
    pub iteration: usize,
    pub loss: f64,
    pub lr: f64,
    /// Smallest logged loss so far.
    pub best: f64,
}

/// Stateful trainer; iteration `i` draws its batch from an RNG stream derived from `(seed, i)`,
/// so resumed runs continue the same sequence.
pub struct Trainer<T: Real> {
    pub net: MoCoPnet,
    pub params: ParamStore<T>,
    pub tcfg: TrainCfg,
    adam: AdamState<T>,
    pub iteration: usize,
    pub history: Vec<LossRecord>,
}

impl<T: Real> Trainer<T> {
    pub fn new(cfg: MoCoPnetCfg, tcfg: TrainCfg) -> Result<Self> {
        tcfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
        let (net, params) = MoCoPnet::init(cfg, &mut rng)?;
        let adam = AdamState::new(params.tensors());
        Ok(Self {
            net,
            params,
            tcfg,
            adam,
            iteration: 0,
            history: Vec::new(),
        })
    }

    /// Continues from a checkpoint; its optimizer state is restored when present.
    pub fn resume(ckpt: Checkpoint<T>, tcfg: TrainCfg) -> Result<Self> {
        let mut t = Self::new(ckpt.cfg.clone(), tcfg)?;
        t.params.load_from(&ckpt.params)?;
        t.adam = AdamState::new(t.params.tensors());
        if let Some(a) = ckpt.adam {
            t.adam.restore(a.step, a.first, a.second)?;
        }
        t.iteration = ckpt.meta.iteration;
        Ok(t)
    }

    fn batch(&self, data: &Dataset, iter: usize) -> (Vec<Tensor<T>>, Tensor<T>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.tcfg.seed);
        rng.set_stream(iter as u64 + 1);
        let scale = self.net.cfg.scale;
        let frames = self.net.cfg.frames;
        let mut lr_parts: Vec<Vec<Tensor<f64>>> = vec![Vec::with_capacity(self.tcfg.batch); frames];
        let mut hr_parts = Vec::with_capacity(self.tcfg.batch);
        let (h, w) = data.samples[0].lr[0].hw();
        let (ph, pw) = (self.tcfg.patch.min(h), self.tcfg.patch.min(w));
        for _ in 0..self.tcfg.batch {
            let s = &data.samples[rng.random_range(0..data.len())];
            let (sh, sw) = s.lr[0].hw();
            let y0 = rng.random_range(0..=sh - ph);
            let x0 = rng.random_range(0..=sw - pw);
            let aug = Augment {
                flip_h: self.tcfg.flip && rng.random(),
                flip_v: self.tcfg.flip && rng.random(),
                transpose: self.tcfg.rotate && ph == pw && rng.random(),
            };
            for (slot, f) in lr_parts.iter_mut().zip(&s.lr) {
                slot.push(crop_augment(f, y0, x0, ph, pw, aug));
            }
            hr_parts.push(crop_augment(&s.hr, y0 * scale, x0 * scale, ph * scale, pw * scale, aug));
        }
        (lr_parts.iter().map(|p| stack(p)).collect(), stack(&hr_parts))
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        let first = data.samples.first().ok_or(Error::EmptyDataset)?;
        let size = first.lr[0].hw();
        for s in &data.samples {
            if s.lr.len() != self.net.cfg.frames {
                return Err(Error::invalid(
                    "train",
                    format!("sample has {} frames, network expects {}", s.lr.len(), self.net.cfg.frames),
                ));
            }
            if s.lr[0].hw() != size {
                return Err(Error::invalid("train", "all samples must share one LR size"));
            }
        }
        Ok(())
    }

    /// Loss and parameter gradients for one batch.
    pub fn loss_and_grads(&self, lr: &[Tensor<T>], hr: &Tensor<T>) -> Result<(f64, Vec<Tensor<T>>)> {
        let mut tape = Tape::new();
        let bound = Bound::trainable(&mut tape, &self.params);
        let frames: Vec<Var> = lr.iter().map(|f| tape.constant(f.clone())).collect();
        let sr = self.net.forward(&mut tape, &bound, &frames)?;
        let target = tape.constant(hr.clone());
        let loss = tape.mse(sr, target)?;
        let value = tape.value(loss).data()[0].to_f64_lossy();
        let mut grads = tape.backward(loss)?;
        let g = bound.vars().iter().map(|&v| grads.take(v).unwrap_or_else(|| Tensor::zeros(tape.shape(v)))).collect();
        Ok((value, g))
    }

    /// One Adam update; returns the pre-update batch loss.
    pub fn step(&mut self, data: &Dataset) -> Result<f64> {
        self.check_data(data)?;
        let iter = self.iteration;
        let (lr_frames, hr) = self.batch(data, iter);
        let (loss, grads) = self.loss_and_grads(&lr_frames, &hr)?;
        if !loss.is_finite() {
            return Err(Error::invalid("train", format!("loss diverged at iteration {iter}")));
        }
        let rate = self.tcfg.lr_at(iter);
        self.adam.step(self.params.tensors_mut(), &grads, T::lit(rate))?;
        self.iteration += 1;
        if iter.is_multiple_of(self.tcfg.log_every) || self.iteration == self.tcfg.iterations {
            let best = self.history.last().map_or(loss, |r| r.best.min(loss));
            self.history.push(LossRecord {
                iteration: iter,
                loss,
                lr: rate,
                best,
            });
        }
        Ok(loss)
    }

    /// Runs until `tcfg.iterations` iterations have completed.
    pub fn run(&mut self, data: &Dataset, mut on_log: impl FnMut(&LossRecord)) -> Result<()> {
        self.check_data(data)?;
        while self.iteration < self.tcfg.iterations {
            let before = self.history.len();
            self.step(data)?;
            if self.history.len() > before {
                on_log(self.history.last().expect("just pushed"));
            }
        }
        Ok(())
    }

    /// Mean full-frame loss over every sample, without augmentation.
    pub fn evaluate(&self, data: &Dataset) -> Result<f64> {
        self.check_data(data)?;
        let mut total = 0.0;
        for s in &data.samples {
            let lr: Vec<Tensor<T>> = s.lr.iter().map(|f| f.cast()).collect();
            let sr = self.net.infer(&self.params, &lr)?;
            total += crate::network::model::loss(&sr, &s.hr.cast())?.to_f64_lossy();
        }
        Ok(total / data.len() as f64)
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        let (m, v) = self.adam.moments();
        Checkpoint {
            cfg: self.net.cfg.clone(),
            meta: CheckpointMeta {
                iteration: self.iteration,
                seed: self.tcfg.seed,
                loss: self.history.last().map(|r| r.loss),
                train: Some(self.tcfg.clone()),
            },
            params: self.params.clone(),
            adam: Some(AdamSnapshot {
                step: self.adam.step,
                first: m.to_vec(),
                second: v.to_vec(),
            }),
        }
    }
}

/// Trained parameters and the logged loss history.
pub struct TrainOutcome<T: Real> {
    pub net: MoCoPnet,
    pub params: ParamStore<T>,
    pub history: Vec<LossRecord>,
}

pub fn train<T: Real>(data: &Dataset, cfg: MoCoPnetCfg, tcfg: TrainCfg) -> Result<TrainOutcome<T>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut t = Trainer::<T>::new(cfg, tcfg)?;
    t.run(data, |_| {})?;
    Ok(TrainOutcome {
        net: t.net,
        params: t.params,
        history: t.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_augment_transforms() {
        let t = Tensor::from_fn(&[1, 1, 3, 4], |i| (10 * i[2] + i[3]) as f64);
        let plain = crop_augment(&t, 1, 1, 2, 2, Augment::default());
        assert_eq!(plain.data(), &[11.0, 12.0, 21.0, 22.0]);
        let fh = crop_augment(&t, 0, 0, 2, 3, Augment { flip_h: true, ..Default::default() });
        assert_eq!(fh.data(), &[2.0, 1.0, 0.0, 12.0, 11.0, 10.0]);
        let tr = crop_augment(&t, 0, 0, 2, 3, Augment { transpose: true, ..Default::default() });
        assert_eq!(tr.shape(), &[1, 1, 3, 2]);
        assert_eq!(tr.data(), &[0.0, 10.0, 1.0, 11.0, 2.0, 12.0]);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let r = train::<f32>(&Dataset::new(), MoCoPnetCfg::toy(), TrainCfg::toy_overfit());
        assert!(matches!(r, Err(Error::EmptyDataset)));
    }
}
