//! Residual dense blocks and residual groups, with an optional central-difference first layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Bound, Conv, ParamStore, Tape, Var};
use crate::prior_ops::cdconv::{CdConv, DEFAULT_THETA};
use crate::scalar::Real;

/// Shape of a residual group: `blocks` dense blocks of `convs` layers, each layer adding
/// `growth` channels on top of the `channels` entering the block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualGroupCfg {
    pub blocks: usize,
    pub convs: usize,
    pub growth: usize,
    pub channels: usize,
    #[serde(default)]
    pub central_difference: bool,
}

impl ResidualGroupCfg {
    pub fn validate(&self) -> Result<()> {
        if self.blocks < 1 || self.convs < 2 || self.growth < 1 || self.channels < 1 {
            return Err(Error::invalid(
                "residual_group",
                format!(
                    "need D >= 1, K >= 2, G >= 1, C >= 1; got D={} K={} G={} C={}",
                    self.blocks, self.convs, self.growth, self.channels
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Layer {
    Plain(Conv),
    Central(CdConv),
}

impl Layer {
    fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        match self {
            Layer::Plain(c) => c.forward(tape, params, x),
            Layer::Central(c) => c.forward(tape, params, x),
        }
    }
}

#[derive(Clone, Debug)]
struct DenseBlock {
    layers: Vec<Layer>,
    fuse: Conv,
}

impl DenseBlock {
    fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        let mut feats = vec![x];
        for layer in &self.layers {
            let input = if feats.len() == 1 {
                x
            } else {
                tape.concat_channels(&feats)?
            };
            let y = layer.forward(tape, params, input)?;
            feats.push(tape.relu(y));
        }
        let all = tape.concat_channels(&feats)?;
        let fused = self.fuse.forward(tape, params, all)?;
        tape.add(fused, x)
    }
}

/// A residual group (RG), or CD-RG when `central_difference` is set.
#[derive(Clone, Debug)]
pub struct ResidualGroup {
    pub cfg: ResidualGroupCfg,
    blocks: Vec<DenseBlock>,
    fuse: Conv,
}

impl ResidualGroup {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        cfg: ResidualGroupCfg,
    ) -> Result<Self> {
        cfg.validate()?;
        let (c, g) = (cfg.channels, cfg.growth);
        let mut blocks = Vec::with_capacity(cfg.blocks);
        for d in 0..cfg.blocks {
            let mut layers = Vec::with_capacity(cfg.convs);
            for k in 0..cfg.convs {
                let lname = format!("{name}.block{d}.conv{k}");
                let cin = c + k * g;
                layers.push(if k == 0 && cfg.central_difference {
                    Layer::Central(CdConv::new(store, rng, &lname, cin, g, 3, DEFAULT_THETA)?)
                } else {
                    Layer::Plain(Conv::new(store, rng, &lname, cin, g, 3, 1)?)
                });
            }
            let fuse = Conv::new(store, rng, &format!("{name}.block{d}.fuse"), c + cfg.convs * g, c, 1, 1)?;
            blocks.push(DenseBlock { layers, fuse });
        }
        let fuse = Conv::new(store, rng, &format!("{name}.fuse"), cfg.blocks * c, c, 1, 1)?;
        Ok(Self { cfg, blocks, fuse })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        let shape = tape.shape(x);
        if shape.len() != 4 || shape[1] != self.cfg.channels {
            return Err(Error::shape(
                "residual_group",
                &[0, self.cfg.channels, 0, 0],
                shape,
            ));
        }
        let mut outs = Vec::with_capacity(self.blocks.len());
        let mut h = x;
        for block in &self.blocks {
            h = block.forward(tape, params, h)?;
            outs.push(h);
        }
        let cat = if outs.len() == 1 {
            outs[0]
        } else {
            tape.concat_channels(&outs)?
        };
        let fused = self.fuse.forward(tape, params, cat)?;
        tape.add(fused, x)
    }
}

/// Runs a residual group eagerly over fixed parameters.
pub fn residual_group<T: Real>(
    input: &crate::numerics::Tensor<T>,
    group: &ResidualGroup,
    params: &ParamStore<T>,
) -> Result<crate::numerics::Tensor<T>> {
    let mut tape = Tape::new();
    let bound = Bound::frozen(&mut tape, params);
    let x = tape.constant(input.clone());
    let y = group.forward(&mut tape, &bound, x)?;
    Ok(tape.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, GradCheckOptions, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(d: usize, k: usize, g: usize, c: usize, cd: bool) -> ResidualGroupCfg {
        ResidualGroupCfg {
            blocks: d,
            convs: k,
            growth: g,
            channels: c,
            central_difference: cd,
        }
    }

    #[test]
    fn zero_parameters_give_identity() {
        for cd in [false, true] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut store = ParamStore::<f64>::new();
            let rg = ResidualGroup::new(&mut store, &mut rng, "rg", cfg(2, 3, 4, 5, cd)).unwrap();
            store.zero_all();
            let x = Tensor::from_fn(&[2, 5, 6, 7], |_| rand::Rng::random_range(&mut rng, -1.0..1.0));
            assert_eq!(residual_group(&x, &rg, &store).unwrap(), x);
        }
    }

    #[test]
    fn shape_is_preserved() {
        for (d, k, g, c) in [(1, 2, 1, 1), (3, 2, 5, 4), (2, 4, 3, 6)] {
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
            let mut store = ParamStore::<f64>::new();
            let rg = ResidualGroup::new(&mut store, &mut rng, "rg", cfg(d, k, g, c, true)).unwrap();
            let x = Tensor::full(&[1, c, 5, 4], 0.3);
            assert_eq!(residual_group(&x, &rg, &store).unwrap().shape(), x.shape());
        }
    }

    #[test]
    fn rejects_bad_cfg_and_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        assert!(ResidualGroup::new(&mut store, &mut rng, "a", cfg(1, 1, 4, 4, true)).is_err());
        assert!(ResidualGroup::new(&mut store, &mut rng, "b", cfg(0, 2, 4, 4, true)).is_err());
        let rg = ResidualGroup::new(&mut store, &mut rng, "c", cfg(1, 2, 4, 4, true)).unwrap();
        assert!(residual_group(&Tensor::zeros(&[1, 3, 4, 4]), &rg, &store).is_err());
    }

    #[test]
    fn gradient_check_tiny_group() {
        for (seed, cd) in [(0u64, true), (1, false), (2, true)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParamStore::<f64>::new();
            let rg = ResidualGroup::new(&mut store, &mut rng, "rg", cfg(1, 2, 4, 4, cd)).unwrap();
            let x = Tensor::from_fn(&[1, 4, 5, 5], |_| rand::Rng::random_range(&mut rng, -1.0..1.0));
            let mut inputs = vec![x];
            inputs.extend(store.tensors().cloned());
            let report = grad_check(
                |t, v| {
                    let bound = Bound::from_vars(v[1..].to_vec());
                    let y = rg.forward(t, &bound, v[0])?;
                    let y2 = t.mul(y, y)?;
                    Ok(t.sum(y2))
                },
                &inputs,
                &GradCheckOptions {
                    max_elements_per_input: Some(24),
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(report.passed, "seed {seed}: {}", report.max_rel_err);
        }
    }
}
