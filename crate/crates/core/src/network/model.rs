use rand::Rng;

use crate::error::{Error, Result};
use crate::network::config::MoCoPnetCfg;
use crate::numerics::{Bound, Conv, ParamStore, Tape, Tensor, Var};
use crate::prior_ops::{Lsta, ResidualGroup};
use crate::rational::Rational;
use crate::scalar::Real;

/// Layer layout of the network; the weights live in a separate [`ParamStore`].
#[derive(Clone, Debug)]
pub struct MoCoPnet {
    pub cfg: MoCoPnetCfg,
    head: Conv,
    cdrg: ResidualGroup,
    lsta1: Lsta,
    lsta2: Lsta,
    coarse_in: Conv,
    coarse_rg: ResidualGroup,
    coarse_out: Conv,
    fine_in: Conv,
    fine_rg: ResidualGroup,
    fine_out: Conv,
    recon_rg: ResidualGroup,
    upsample: Conv,
    tail: Conv,
}

/// Intermediate tape values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub sr: Var,
    /// CD-RG feature of every input frame.
    pub features: Vec<Var>,
    /// Per neighbour (frame index ≠ centre, ascending): the two attention maps.
    pub attention: Vec<(usize, Var, Var)>,
    /// Per neighbour: the aligned feature.
    pub aligned: Vec<(usize, Var)>,
}

impl MoCoPnet {
    /// Builds the layout and draws a fan-in uniform initialisation into `store`.
    pub fn new<T: Real, R: Rng>(cfg: MoCoPnetCfg, store: &mut ParamStore<T>, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.channels;
        let branches = cfg.centre();
        let s2 = cfg.scale * cfg.scale;
        Ok(Self {
            head: Conv::new(store, rng, "head", 1, c, 3, 1)?,
            cdrg: ResidualGroup::new(store, rng, "cdrg", cfg.cdrg)?,
            lsta1: Lsta::new(store, rng, "lsta1", c, cfg.lsta1)?,
            lsta2: Lsta::new(store, rng, "lsta2", c, cfg.lsta2)?,
            coarse_in: Conv::new(store, rng, "coarse.in", 3 * c, c, 1, 1)?,
            coarse_rg: ResidualGroup::new(store, rng, "coarse.rg", cfg.rg_coarse)?,
            coarse_out: Conv::new(store, rng, "coarse.out", c, c, 3, 1)?,
            fine_in: Conv::new(store, rng, "fine.in", branches * c, c, 1, 1)?,
            fine_rg: ResidualGroup::new(store, rng, "fine.rg", cfg.rg_fine)?,
            fine_out: Conv::new(store, rng, "fine.out", c, c, 3, 1)?,
            recon_rg: ResidualGroup::new(store, rng, "recon.rg", cfg.rg_recon)?,
            upsample: Conv::new(store, rng, "recon.up", c, c * s2, 3, 1)?,
            tail: Conv::new(store, rng, "recon.tail", c, 1, 3, 1)?,
            cfg,
        })
    }

    /// Layout plus freshly initialised parameters.
    pub fn init<T: Real, R: Rng>(cfg: MoCoPnetCfg, rng: &mut R) -> Result<(Self, ParamStore<T>)> {
        let mut store = ParamStore::new();
        let net = Self::new(cfg, &mut store, rng)?;
        Ok((net, store))
    }

    fn check_frames<T: Real>(&self, tape: &Tape<T>, frames: &[Var]) -> Result<()> {
        if frames.len() != self.cfg.frames {
            return Err(Error::invalid(
                "network",
                format!("expected {} frames, got {}", self.cfg.frames, frames.len()),
            ));
        }
        let first = tape.shape(frames[0]).to_vec();
        if first.len() != 4 || first[1] != 1 {
            return Err(Error::shape("network", &[first.first().copied().unwrap_or(1), 1, 0, 0], &first));
        }
        for &f in &frames[1..] {
            if tape.shape(f) != first.as_slice() {
                return Err(Error::shape("network", &first, tape.shape(f)));
            }
        }
        Ok(())
    }

    /// Forward pass over `frames` (each `[B, 1, h, w]`) giving `[B, 1, scale·h, scale·w]`.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, frames: &[Var]) -> Result<Var> {
        Ok(self.forward_trace(tape, params, frames)?.sr)
    }

    pub fn forward_trace<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, frames: &[Var]) -> Result<ForwardTrace> {
        self.check_frames(tape, frames)?;
        let t = self.cfg.centre();
        let mut features = Vec::with_capacity(frames.len());
        for &f in frames {
            let f0 = self.head.forward(tape, params, f)?;
            features.push(self.cdrg.forward(tape, params, f0)?);
        }
        let refr = features[t];

        let mut aligned: Vec<Option<Var>> = vec![None; frames.len()];
        let mut attention = Vec::new();
        let mut aligned_list = Vec::new();
        for (i, &nbr) in features.iter().enumerate() {
            if i == t {
                continue;
            }
            let (coarse, a1) = self.lsta1.forward_with_attention(tape, params, refr, nbr)?;
            let (fine, a2) = self.lsta2.forward_with_attention(tape, params, refr, coarse)?;
            aligned[i] = Some(fine);
            attention.push((i, a1, a2));
            aligned_list.push((i, fine));
        }

        let mut branches = Vec::with_capacity(t);
        for k in 1..=t {
            let (after, before) = (aligned[t + k].expect("neighbour"), aligned[t - k].expect("neighbour"));
            let cat = tape.concat_channels(&[refr, after, before])?;
            let x = self.coarse_in.forward(tape, params, cat)?;
            let x = self.coarse_rg.forward(tape, params, x)?;
            branches.push(self.coarse_out.forward(tape, params, x)?);
        }
        let cat = if branches.len() == 1 {
            branches[0]
        } else {
            tape.concat_channels(&branches)?
        };
        let x = self.fine_in.forward(tape, params, cat)?;
        let x = self.fine_rg.forward(tape, params, x)?;
        let x = self.fine_out.forward(tape, params, x)?;

        let x = self.recon_rg.forward(tape, params, x)?;
        let x = self.upsample.forward(tape, params, x)?;
        let x = tape.pixel_shuffle(x, self.cfg.scale)?;
        let residual = self.tail.forward(tape, params, x)?;

        let base = tape.bicubic_resize(frames[t], Rational::integer(self.cfg.scale as u32))?;
        let sr = tape.add(residual, base)?;
        Ok(ForwardTrace {
            sr,
            features,
            attention,
            aligned: aligned_list,
        })
    }

    /// Inference on plain tensors; returns the SR reference frame.
    pub fn infer<T: Real>(&self, params: &ParamStore<T>, frames: &[Tensor<T>]) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let bound = Bound::frozen(&mut tape, params);
        let vars: Vec<Var> = frames.iter().map(|f| tape.constant(f.clone())).collect();
        let sr = self.forward(&mut tape, &bound, &vars)?;
        Ok(tape.value(sr).clone())
    }
}

/// Mean squared error.
pub fn loss<T: Real>(sr: &Tensor<T>, hr: &Tensor<T>) -> Result<T> {
    sr.expect_same_shape(hr, "loss")?;
    let n = T::from_usize_lossy(sr.len());
    Ok(sr.data().iter().zip(hr.data()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::bicubic_upsample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loss_closed_forms() {
        let hr = Tensor::<f64>::full(&[1, 1, 4, 4], 0.3);
        assert_eq!(loss(&hr, &hr).unwrap(), 0.0);
        assert!((loss(&hr.map(|v| v + 0.1), &hr).unwrap() - 0.01).abs() <= 1e-15);
        assert!(loss(&hr, &Tensor::zeros(&[1, 1, 4, 5])).is_err());
    }

    #[test]
    fn zero_weights_reproduce_bicubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = MoCoPnetCfg::toy().with_frames(3);
        let (net, mut params) = MoCoPnet::init::<f64, _>(cfg, &mut rng).unwrap();
        params.zero_all();
        let frames: Vec<Tensor<f64>> = (0..3)
            .map(|_| Tensor::from_fn(&[1, 1, 8, 8], |_| rand::Rng::random::<f64>(&mut rng)))
            .collect();
        let sr = net.infer(&params, &frames).unwrap();
        let want = bicubic_upsample(&frames[1], 4).unwrap();
        assert!(sr.max_abs_diff(&want) <= 1e-10);
    }

    #[test]
    fn rejects_wrong_frame_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (net, params) = MoCoPnet::init::<f64, _>(MoCoPnetCfg::toy().with_frames(3), &mut rng).unwrap();
        let f = Tensor::zeros(&[1, 1, 8, 8]);
        assert!(net.infer(&params, &[f.clone(), f]).is_err());
    }
}
