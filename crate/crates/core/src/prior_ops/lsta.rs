//! Local spatio-temporal attention.
//!
//! For every reference site the neighbour feature is probed at a `kern × kern` grid of offsets
//! spaced by `dila` (fractional spacings are sampled bilinearly). Compressed query/key
//! projections give one response per offset; a softmax over the offsets yields the attention
//! map, which then weights a gather of the uncompressed neighbour feature at the same offsets.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Bound, Conv, ParamStore, SampleGrid, Tape, Tensor, Var};
use crate::rational::Rational;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstaCfg {
    pub kern: usize,
    pub dila: Rational,
    pub cr: usize,
}

impl LstaCfg {
    pub fn new(kern: usize, dila: Rational, cr: usize) -> Result<Self> {
        let cfg = Self { kern, dila, cr };
        cfg.validate(None)?;
        Ok(cfg)
    }

    pub fn validate(&self, channels: Option<usize>) -> Result<()> {
        if self.kern.is_multiple_of(2) {
            return Err(Error::invalid("lsta", format!("kern {} must be odd", self.kern)));
        }
        if self.cr == 0 {
            return Err(Error::invalid("lsta", "compression ratio must be >= 1"));
        }
        if let Some(c) = channels {
            if c % self.cr != 0 {
                return Err(Error::invalid(
                    "lsta",
                    format!("{c} channels not divisible by compression ratio {}", self.cr),
                ));
            }
        }
        Ok(())
    }

    /// Number of probed offsets, `kern²`.
    pub fn taps(&self) -> usize {
        self.kern * self.kern
    }

    /// The `(dy, dx)` offsets in row-major order; the centre tap is `(0, 0)`.
    pub fn offsets<T: Real>(&self) -> Vec<(T, T)> {
        let half = (self.kern / 2) as i64;
        let step = T::lit(self.dila.to_f64());
        let mut out = Vec::with_capacity(self.taps());
        for i in -half..=half {
            for j in -half..=half {
                out.push((T::lit(i as f64) * step, T::lit(j as f64) * step));
            }
        }
        out
    }

    pub fn centre_tap(&self) -> usize {
        self.taps() / 2
    }

    fn grids<T: Real>(&self, h: usize, w: usize) -> Vec<Rc<SampleGrid<T>>> {
        self.offsets()
            .into_iter()
            .map(|(dy, dx)| Rc::new(SampleGrid::shifted(h, w, dy, dx)))
            .collect()
    }
}

/// `Σ_n shift_n(nbr) · attn[:, n]`, gathering `nbr` at each offset of `cfg`.
pub fn lsta_apply_var<T: Real>(tape: &mut Tape<T>, cfg: &LstaCfg, nbr: Var, attn: Var) -> Result<Var> {
    let (_, _, h, w) = dims(tape, nbr)?;
    let ashape = tape.shape(attn).to_vec();
    if ashape.len() != 4 || ashape[1] != cfg.taps() || ashape[2] != h || ashape[3] != w {
        return Err(Error::shape(
            "lsta_apply",
            &[tape.shape(nbr)[0], cfg.taps(), h, w],
            &ashape,
        ));
    }
    let mut acc: Option<Var> = None;
    for (n, grid) in cfg.grids::<T>(h, w).into_iter().enumerate() {
        let shifted = tape.bilinear_sample(nbr, grid)?;
        let m = tape.narrow_channels(attn, n, 1)?;
        let term = tape.mul_channel_broadcast(shifted, m)?;
        acc = Some(match acc {
            None => term,
            Some(a) => tape.add(a, term)?,
        });
    }
    Ok(acc.expect("kern >= 1"))
}

/// Softmax over offsets of `Σ_k f0(p, k) · f1(p + p_n, k)`.
pub fn lsta_responses_var<T: Real>(tape: &mut Tape<T>, cfg: &LstaCfg, f0: Var, f1: Var) -> Result<Var> {
    let (_, _, h, w) = dims(tape, f0)?;
    if tape.shape(f0) != tape.shape(f1) {
        return Err(Error::shape("lsta", tape.shape(f0), tape.shape(f1)));
    }
    let mut responses = Vec::with_capacity(cfg.taps());
    for grid in cfg.grids::<T>(h, w) {
        let shifted = tape.bilinear_sample(f1, grid)?;
        let prod = tape.mul(f0, shifted)?;
        responses.push(tape.channel_sum(prod)?);
    }
    let stacked = tape.concat_channels(&responses)?;
    tape.softmax(stacked, 1)
}

fn dims<T: Real>(tape: &Tape<T>, v: Var) -> Result<(usize, usize, usize, usize)> {
    match *tape.shape(v) {
        [b, c, h, w] => Ok((b, c, h, w)),
        ref other => Err(Error::shape("lsta", &[0, 0, 0, 0], other)),
    }
}

/// An LSTA module with its two 1×1 compression convolutions.
#[derive(Clone, Debug)]
pub struct Lsta {
    pub cfg: LstaCfg,
    pub channels: usize,
    pub conv_q: Conv,
    pub conv_k: Conv,
}

impl Lsta {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        channels: usize,
        cfg: LstaCfg,
    ) -> Result<Self> {
        cfg.validate(Some(channels))?;
        let reduced = channels / cfg.cr;
        Ok(Self {
            cfg,
            channels,
            conv_q: Conv::new(store, rng, &format!("{name}.q"), channels, reduced, 1, 1)?,
            conv_k: Conv::new(store, rng, &format!("{name}.k"), channels, reduced, 1, 1)?,
        })
    }

    pub fn attention<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, refr: Var, nbr: Var) -> Result<Var> {
        let (_, c, _, _) = dims(tape, refr)?;
        if c != self.channels {
            return Err(Error::shape("lsta", &[0, self.channels, 0, 0], tape.shape(refr)));
        }
        if tape.shape(refr) != tape.shape(nbr) {
            return Err(Error::shape("lsta", tape.shape(refr), tape.shape(nbr)));
        }
        let f0 = self.conv_q.forward(tape, params, refr)?;
        let f1 = self.conv_k.forward(tape, params, nbr)?;
        lsta_responses_var(tape, &self.cfg, f0, f1)
    }

    /// Neighbour feature aligned to the reference.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, refr: Var, nbr: Var) -> Result<Var> {
        let attn = self.attention(tape, params, refr, nbr)?;
        lsta_apply_var(tape, &self.cfg, nbr, attn)
    }

    /// Forward pass that also returns the attention map.
    pub fn forward_with_attention<T: Real>(
        &self,
        tape: &mut Tape<T>,
        params: &Bound,
        refr: Var,
        nbr: Var,
    ) -> Result<(Var, Var)> {
        let attn = self.attention(tape, params, refr, nbr)?;
        Ok((lsta_apply_var(tape, &self.cfg, nbr, attn)?, attn))
    }
}

/// Eager attention map `[B, kern², H, W]`.
pub fn lsta_attention<T: Real>(
    refr: &Tensor<T>,
    nbr: &Tensor<T>,
    module: &Lsta,
    params: &ParamStore<T>,
) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let bound = Bound::frozen(&mut tape, params);
    let (r, n) = (tape.constant(refr.clone()), tape.constant(nbr.clone()));
    let a = module.attention(&mut tape, &bound, r, n)?;
    Ok(tape.value(a).clone())
}

/// Eager gather of `nbr` weighted by `attn`.
pub fn lsta_apply<T: Real>(nbr: &Tensor<T>, attn: &Tensor<T>, cfg: &LstaCfg) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let (n, a) = (tape.constant(nbr.clone()), tape.constant(attn.clone()));
    let y = lsta_apply_var(&mut tape, cfg, n, a)?;
    Ok(tape.value(y).clone())
}

/// Eager single LSTA: attention followed by the gather.
pub fn lsta<T: Real>(refr: &Tensor<T>, nbr: &Tensor<T>, module: &Lsta, params: &ParamStore<T>) -> Result<Tensor<T>> {
    let attn = lsta_attention(refr, nbr, module, params)?;
    lsta_apply(nbr, &attn, &module.cfg)
}

/// Sets both projections of `module` to the identity (requires `cr == 1`).
pub fn set_identity_projections<T: Real>(module: &Lsta, params: &mut ParamStore<T>) -> Result<()> {
    if module.cfg.cr != 1 {
        return Err(Error::invalid("lsta", "identity projections need cr == 1"));
    }
    let c = module.channels;
    for conv in [&module.conv_q, &module.conv_k] {
        *params.get_mut(conv.weight) =
            Tensor::from_fn(&[c, c, 1, 1], |i| if i[0] == i[1] { T::one() } else { T::zero() });
        *params.get_mut(conv.bias) = Tensor::zeros(&[c]);
    }
    Ok(())
}
