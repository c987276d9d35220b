//! Differentiable primitives recorded on a [`Tape`].

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::numerics::conv::{self, ConvGeometry};
use crate::numerics::sample::{self, SampleGrid};
use crate::numerics::softmax as sm;
use crate::numerics::{Tape, Tensor, Var};
use crate::scalar::Real;

impl<T: Real> Tape<T> {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.record(value, &[a, b], |g, _| vec![Some(g.clone()), Some(g.clone())]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.record(value, &[a, b], |g, _| {
            vec![Some(g.clone()), Some(g.scale(-T::one()))]
        }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.shared(a), self.shared(b));
        let value = av.mul(&bv)?;
        Ok(self.record(value, &[a, b], move |g, needs| {
            vec![
                needs[0].then(|| g.mul(&bv).expect("same shape")),
                needs[1].then(|| g.mul(&av).expect("same shape")),
            ]
        }))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).scale(s);
        self.record(value, &[a], move |g, _| vec![Some(g.scale(s))])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let av = self.shared(a);
        let value = av.map(|v| v.max(T::zero()));
        self.note_branches(av.data().iter().map(|&v| v > T::zero()));
        self.record(value, &[a], move |g, _| {
            vec![Some(
                g.zip_map(&av, "relu", |gv, x| if x > T::zero() { gv } else { T::zero() })
                    .expect("same shape"),
            )]
        })
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let shape = self.shape(a).to_vec();
        let value = Tensor::scalar(self.value(a).sum());
        self.record(value, &[a], move |g, _| {
            vec![Some(Tensor::full(&shape, g.data()[0]))]
        })
    }

    /// Mean squared difference, as a `[1]` tensor.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let diff = Rc::new(self.value(a).sub(self.value(b))?);
        let n = T::from_usize_lossy(diff.len());
        let value = Tensor::scalar(diff.data().iter().map(|&d| d * d).sum::<T>() / n);
        Ok(self.record(value, &[a, b], move |g, needs| {
            let f = T::lit(2.0) * g.data()[0] / n;
            let ga = diff.scale(f);
            vec![
                needs[0].then(|| ga.clone()),
                needs[1].then(|| ga.scale(-T::one())),
            ]
        }))
    }

    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        padding: usize,
        dilation: usize,
    ) -> Result<Var> {
        let (x, w) = (self.shared(input), self.shared(weight));
        let b = bias.map(|b| self.shared(b));
        let geom = ConvGeometry::new(&x, &w, padding, dilation)?;
        let value = conv::conv2d(&x, &w, b.as_deref(), padding, dilation)?;
        let mut parents = vec![input, weight];
        parents.extend(bias);
        Ok(self.record(value, &parents, move |g, needs| {
            let gi = needs[0].then(|| {
                let mut gi = Tensor::zeros(x.shape());
                conv::conv2d_backward_input(&geom, g.data(), w.data(), gi.data_mut());
                gi
            });
            let gw = needs[1].then(|| {
                let mut gw = Tensor::zeros(w.shape());
                conv::conv2d_backward_weight(&geom, g.data(), x.data(), gw.data_mut());
                gw
            });
            let mut out = vec![gi, gw];
            if needs.len() == 3 {
                out.push(needs[2].then(|| {
                    Tensor::from_parts(vec![geom.cout], conv::channel_sums(g))
                }));
            }
            out
        }))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<Rc<Tensor<T>>> = parts.iter().map(|&p| self.shared(p)).collect();
        let refs: Vec<&Tensor<T>> = values.iter().map(|v| v.as_ref()).collect();
        let value = Tensor::concat_channels(&refs)?;
        let widths: Vec<usize> = values.iter().map(|v| v.shape()[1]).collect();
        Ok(self.record(value, parts, move |g, needs| {
            let mut start = 0;
            widths
                .iter()
                .zip(needs)
                .map(|(&c, &need)| {
                    let part = need.then(|| g.narrow_channels(start, c).expect("in range"));
                    start += c;
                    part
                })
                .collect()
        }))
    }

    pub fn narrow_channels(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let value = self.value(input).narrow_channels(start, len)?;
        Ok(self.record(value, &[input], move |g, _| {
            let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
            let mut gi = Tensor::zeros(&shape);
            let plane = h * w;
            for bi in 0..b {
                let src = &g.data()[bi * len * plane..][..len * plane];
                gi.data_mut()[(bi * c + start) * plane..][..len * plane].copy_from_slice(src);
            }
            vec![Some(gi)]
        }))
    }

    pub fn pixel_shuffle(&mut self, input: Var, r: usize) -> Result<Var> {
        let value = conv::pixel_shuffle(self.value(input), r)?;
        Ok(self.record(value, &[input], move |g, _| {
            vec![Some(conv::pixel_unshuffle(g, r).expect("shape from forward"))]
        }))
    }

    pub fn bilinear_sample(&mut self, input: Var, grid: Rc<SampleGrid<T>>) -> Result<Var> {
        let shape = self.shape(input).to_vec();
        let value = sample::bilinear_sample(self.value(input), &grid)?;
        Ok(self.record(value, &[input], move |g, _| {
            vec![Some(sample::bilinear_sample_backward(&shape, &grid, g))]
        }))
    }

    pub fn softmax(&mut self, input: Var, axis: usize) -> Result<Var> {
        let value = sm::softmax(self.value(input), axis)?;
        let out = Rc::new(value.clone());
        Ok(self.record(value, &[input], move |g, _| {
            vec![Some(sm::softmax_backward(&out, g, axis))]
        }))
    }

    /// Sums a 4-d tensor over its channel axis, keeping it: `[B,C,H,W] → [B,1,H,W]`.
    pub fn channel_sum(&mut self, input: Var) -> Result<Var> {
        let (b, c, h, w) = self.value(input).dims4()?;
        let plane = h * w;
        let x = self.value(input).data();
        let mut out = vec![T::zero(); b * plane];
        for bi in 0..b {
            let dst = &mut out[bi * plane..][..plane];
            for ci in 0..c {
                let src = &x[(bi * c + ci) * plane..][..plane];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + s;
                }
            }
        }
        let value = Tensor::from_parts(vec![b, 1, h, w], out);
        Ok(self.record(value, &[input], move |g, _| {
            let mut gi = Vec::with_capacity(b * c * plane);
            for bi in 0..b {
                for _ in 0..c {
                    gi.extend_from_slice(&g.data()[bi * plane..][..plane]);
                }
            }
            vec![Some(Tensor::from_parts(vec![b, c, h, w], gi))]
        }))
    }

    /// Multiplies every channel of `x: [B,C,H,W]` by the single-channel map `m: [B,1,H,W]`.
    pub fn mul_channel_broadcast(&mut self, x: Var, m: Var) -> Result<Var> {
        let (xv, mv) = (self.shared(x), self.shared(m));
        let (b, c, h, w) = xv.dims4()?;
        if mv.shape() != [b, 1, h, w] {
            return Err(Error::shape("mul_channel_broadcast", &[b, 1, h, w], mv.shape()));
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(xv.len());
        for bi in 0..b {
            let mp = &mv.data()[bi * plane..][..plane];
            for ci in 0..c {
                let xp = &xv.data()[(bi * c + ci) * plane..][..plane];
                out.extend(xp.iter().zip(mp).map(|(&a, &m)| a * m));
            }
        }
        let value = Tensor::from_parts(vec![b, c, h, w], out);
        Ok(self.record(value, &[x, m], move |g, needs| {
            let gx = needs[0].then(|| {
                let mut gx = Vec::with_capacity(g.len());
                for bi in 0..b {
                    let mp = &mv.data()[bi * plane..][..plane];
                    for ci in 0..c {
                        let gp = &g.data()[(bi * c + ci) * plane..][..plane];
                        gx.extend(gp.iter().zip(mp).map(|(&a, &m)| a * m));
                    }
                }
                Tensor::from_parts(vec![b, c, h, w], gx)
            });
            let gm = needs[1].then(|| {
                let mut gm = vec![T::zero(); b * plane];
                for bi in 0..b {
                    let dst = &mut gm[bi * plane..][..plane];
                    for ci in 0..c {
                        let off = (bi * c + ci) * plane;
                        let gp = &g.data()[off..][..plane];
                        let xp = &xv.data()[off..][..plane];
                        for ((d, &gv), &xv) in dst.iter_mut().zip(gp).zip(xp) {
                            *d = *d + gv * xv;
                        }
                    }
                }
                Tensor::from_parts(vec![b, 1, h, w], gm)
            });
            vec![gx, gm]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{grad_check, GradCheckOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn opts() -> GradCheckOptions {
        GradCheckOptions::default()
    }

    #[test]
    fn primitive_gradients_over_seeds() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random(&[2, 3, 4, 5], &mut rng);
            let y = random(&[2, 3, 4, 5], &mut rng);
            let m = random(&[2, 1, 4, 5], &mut rng);
            let weights = Tensor::from_fn(&[2, 3, 8, 10], |_| rng.random_range(-1.0..1.0));

            let report = grad_check(
                |t, v| {
                    let p = t.mul(v[0], v[1])?;
                    let q = t.sub(p, v[0])?;
                    let r = t.relu(q);
                    let s = t.mse(r, v[1])?;
                    let c = t.concat_channels(&[v[0], v[1]])?;
                    let n = t.narrow_channels(c, 2, 3)?;
                    let cs = t.channel_sum(n)?;
                    let mb = t.mul_channel_broadcast(n, v[2])?;
                    let sm = t.softmax(mb, 1)?;
                    let a = t.mul(sm, n)?;
                    let sa = t.sum(a);
                    let scs = t.sum(cs);
                    let o = t.add(sa, s)?;
                    let o = t.add(o, scs)?;
                    Ok(t.scale(o, 0.7))
                },
                &[x.clone(), y.clone(), m.clone()],
                &opts(),
            )
            .unwrap();
            assert!(report.passed, "seed {seed}: {report:?}");

            let wc = weights.clone();
            let report = grad_check(
                move |t, v| {
                    let ps = t.pixel_shuffle(v[0], 2)?;
                    let k = t.constant(wc.clone());
                    let p = t.mul(ps, k)?;
                    Ok(t.sum(p))
                },
                &[random(&[2, 12, 4, 5], &mut rng)],
                &opts(),
            )
            .unwrap();
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn conv_gradients_over_seeds() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let dil = 1 + (seed as usize % 2);
            let x = random(&[2, 2, 6, 5], &mut rng);
            let w = random(&[3, 2, 3, 3], &mut rng);
            let b = random(&[3], &mut rng);
            let report = grad_check(
                move |t, v| {
                    let y = t.conv2d(v[0], v[1], Some(v[2]), dil, dil)?;
                    let y2 = t.mul(y, y)?;
                    Ok(t.sum(y2))
                },
                &[x, w, b],
                &opts(),
            )
            .unwrap();
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn bilinear_gradient() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let coords = (0..12)
                .map(|_| (rng.random_range(-1.0..5.0), rng.random_range(-1.0..6.0)))
                .collect();
            let grid = Rc::new(SampleGrid::new(3, 4, coords).unwrap());
            let weights = random(&[1, 2, 3, 4], &mut rng);
            let report = grad_check(
                move |t, v| {
                    let s = t.bilinear_sample(v[0], grid.clone())?;
                    let k = t.constant(weights.clone());
                    let p = t.mul(s, k)?;
                    let p = t.mul(p, s)?;
                    Ok(t.sum(p))
                },
                &[random(&[1, 2, 4, 5], &mut rng)],
                &opts(),
            )
            .unwrap();
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn conv_softmax_composite() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = random(&[1, 2, 6, 6], &mut rng);
        let w = random(&[4, 2, 3, 3], &mut rng);
        let k = random(&[1, 4, 6, 6], &mut rng);
        let report = grad_check(
            move |t, v| {
                let y = t.conv2d(v[0], v[1], None, 1, 1)?;
                let s = t.softmax(y, 1)?;
                let kk = t.constant(k.clone());
                let p = t.mul(s, kk)?;
                Ok(t.sum(p))
            },
            &[x, w],
            &GradCheckOptions {
                step: 1e-5,
                tol: 1e-4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }
}
