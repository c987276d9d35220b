//! Central-difference convolution.
//!
//! `g(p) = b + Σ_{n ∈ Ω} ω_n · (S(p + n) − θ · S(p))` over the full k×k support Ω, evaluated
//! literally (one pass per tap) rather than through the equivalent
//! `conv(S, ω) − θ · Σω · S` form, which the tests use as an independent check.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::conv::{self, ConvGeometry};
use crate::numerics::params::fan_in_uniform;
use crate::numerics::{Bound, ParamId, ParamStore, Tape, Tensor, Var};
use crate::scalar::Real;

/// Default gradient/intensity balance.
pub const DEFAULT_THETA: f64 = 0.7;

fn check_theta<T: Real>(theta: T) -> Result<()> {
    if !(theta >= T::zero() && theta <= T::one()) {
        return Err(Error::invalid("cd_conv", format!("theta {theta} outside [0, 1]")));
    }
    Ok(())
}

fn geometry<T: Real>(x: &Tensor<T>, w: &Tensor<T>, dilation: usize) -> Result<ConvGeometry> {
    let (_, _, kh, kw) = w.dims4()?;
    if kh % 2 == 0 || kw % 2 == 0 || kh != kw {
        return Err(Error::invalid("cd_conv", format!("kernel {kh}x{kw} must be square and odd")));
    }
    ConvGeometry::new(x, w, dilation * (kh - 1) / 2, dilation)
}

/// Per-`(out, in)` kernel sums `Σ_n ω_n`, row-major `[cout, cin]`.
fn kernel_sums<T: Real>(w: &Tensor<T>) -> Vec<T> {
    let taps = w.shape()[2] * w.shape()[3];
    w.data().chunks(taps).map(|c| c.iter().copied().sum()).collect()
}

pub fn cd_conv_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    theta: T,
    dilation: usize,
) -> Result<Tensor<T>> {
    check_theta(theta)?;
    let g = geometry(x, w, dilation)?;
    if let Some(b) = bias {
        if b.len() != g.cout {
            return Err(Error::shape("cd_conv bias", &[g.cout], b.shape()));
        }
    }
    let (h, wd, k) = (g.in_h, g.in_w, g.kh);
    let plane = h * wd;
    let pad = g.padding as isize;
    let mut out = Tensor::zeros(&g.output_shape());
    let od = out.data_mut();
    for b in 0..g.batch {
        for co in 0..g.cout {
            let o = &mut od[(b * g.cout + co) * plane..][..plane];
            if let Some(bv) = bias {
                o.iter_mut().for_each(|v| *v = bv.data()[co]);
            }
            for ci in 0..g.cin {
                let s = &x.data()[(b * g.cin + ci) * plane..][..plane];
                for ky in 0..k {
                    let oy = (ky * dilation) as isize - pad;
                    for kx in 0..k {
                        let wv = w.data()[((co * g.cin + ci) * k + ky) * k + kx];
                        let ox = (kx * dilation) as isize - pad;
                        let theta_w = theta * wv;
                        for y in 0..h {
                            let ny = y as isize + oy;
                            let row = &mut o[y * wd..][..wd];
                            let centre = &s[y * wd..][..wd];
                            for (xx, (ov, &cv)) in row.iter_mut().zip(centre).enumerate() {
                                let nx = xx as isize + ox;
                                let nbr = if ny >= 0 && nx >= 0 && (ny as usize) < h && (nx as usize) < wd {
                                    s[ny as usize * wd + nx as usize]
                                } else {
                                    T::zero()
                                };
                                *ov = *ov + wv * nbr - theta_w * cv;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients `(d input, d weight, d bias)` of [`cd_conv_forward`].
pub(crate) fn cd_conv_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad: &Tensor<T>,
    theta: T,
    dilation: usize,
    needs: [bool; 3],
) -> (Option<Tensor<T>>, Option<Tensor<T>>, Option<Tensor<T>>) {
    let g = geometry(x, w, dilation).expect("validated in forward");
    let plane = g.in_h * g.in_w;
    let sums = kernel_sums(w);
    let gx = needs[0].then(|| {
        let mut gx = Tensor::zeros(x.shape());
        conv::conv2d_backward_input(&g, grad.data(), w.data(), gx.data_mut());
        for b in 0..g.batch {
            for ci in 0..g.cin {
                let dst = &mut gx.data_mut()[(b * g.cin + ci) * plane..][..plane];
                for co in 0..g.cout {
                    let f = theta * sums[co * g.cin + ci];
                    let src = &grad.data()[(b * g.cout + co) * plane..][..plane];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = *d - f * s;
                    }
                }
            }
        }
        gx
    });
    let gw = needs[1].then(|| {
        let mut gw = Tensor::zeros(w.shape());
        conv::conv2d_backward_weight(&g, grad.data(), x.data(), gw.data_mut());
        let taps = g.kh * g.kw;
        for co in 0..g.cout {
            for ci in 0..g.cin {
                let mut centre = T::zero();
                for b in 0..g.batch {
                    let gp = &grad.data()[(b * g.cout + co) * plane..][..plane];
                    let xp = &x.data()[(b * g.cin + ci) * plane..][..plane];
                    centre = centre + gp.iter().zip(xp).map(|(&a, &c)| a * c).sum::<T>();
                }
                for t in &mut gw.data_mut()[(co * g.cin + ci) * taps..][..taps] {
                    *t = *t - theta * centre;
                }
            }
        }
        gw
    });
    let gb = needs[2].then(|| Tensor::from_parts(vec![g.cout], conv::channel_sums(grad)));
    (gx, gw, gb)
}

impl<T: Real> Tape<T> {
    /// Differentiable central-difference convolution with "same" padding.
    pub fn cd_conv(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        theta: T,
        dilation: usize,
    ) -> Result<Var> {
        let (x, w) = (self.shared(input), self.shared(weight));
        let b = bias.map(|b| self.shared(b));
        let value = cd_conv_forward(&x, &w, b.as_deref(), theta, dilation)?;
        let mut parents = vec![input, weight];
        parents.extend(bias);
        let with_bias = bias.is_some();
        Ok(self.record(value, &parents, move |g, needs| {
            let (gx, gw, gb) = cd_conv_backward(
                &x,
                &w,
                g,
                theta,
                dilation,
                [needs[0], needs[1], with_bias && needs[2]],
            );
            let mut out = vec![gx, gw];
            if with_bias {
                out.push(gb);
            }
            out
        }))
    }
}

/// Standalone central-difference convolution layer: weight `[cout, cin, k, k]`, bias `[cout]`, θ.
#[derive(Clone, Debug, PartialEq)]
pub struct CdConvLayer<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub theta: T,
    pub dilation: usize,
}

impl<T: Real> CdConvLayer<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>, theta: T) -> Result<Self> {
        check_theta(theta)?;
        let (cout, _, k, k2) = weight.dims4()?;
        if k % 2 == 0 || k != k2 {
            return Err(Error::invalid("cd_conv", format!("kernel {k}x{k2} must be square and odd")));
        }
        if bias.shape() != [cout] {
            return Err(Error::shape("cd_conv bias", &[cout], bias.shape()));
        }
        Ok(Self {
            weight,
            bias,
            theta,
            dilation: 1,
        })
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        cd_conv_forward(input, &self.weight, Some(&self.bias), self.theta, self.dilation)
    }
}

/// [`CdConvLayer`] whose weights live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct CdConv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub theta: f64,
    pub kernel: usize,
}

impl CdConv {
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        theta: f64,
    ) -> Result<Self> {
        check_theta(theta)?;
        if kernel.is_multiple_of(2) {
            return Err(Error::invalid("cd_conv", format!("{name}: kernel {kernel} must be odd")));
        }
        let fan_in = cin * kernel * kernel;
        let weight = store.insert(
            format!("{name}.weight"),
            fan_in_uniform(&[cout, cin, kernel, kernel], fan_in, rng),
        )?;
        let bias = store.insert(format!("{name}.bias"), fan_in_uniform(&[cout], fan_in, rng))?;
        Ok(Self {
            weight,
            bias,
            theta,
            kernel,
        })
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, params: &Bound, x: Var) -> Result<Var> {
        tape.cd_conv(
            x,
            params.var(self.weight),
            Some(params.var(self.bias)),
            T::lit(self.theta),
            1,
        )
    }
}

/// Front door for eager use: `cd_conv(input, layer)`.
pub fn cd_conv<T: Real>(input: &Tensor<T>, layer: &CdConvLayer<T>) -> Result<Tensor<T>> {
    layer.forward(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{conv2d, grad_check, GradCheckOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// conv2d(x, ω) + b − θ · (Σω) · x, evaluated with naive loops.
    fn identity_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, theta: f64) -> Tensor<f64> {
        let k = w.shape()[2];
        let plain = conv2d(x, w, Some(b), (k - 1) / 2, 1).unwrap();
        let (nb, cin, h, wd) = x.dims4().unwrap();
        let cout = w.shape()[0];
        Tensor::from_fn(&[nb, cout, h, wd], |i| {
            let mut centre = 0.0;
            for ci in 0..cin {
                let mut s = 0.0;
                for ky in 0..k {
                    for kx in 0..k {
                        s += w.at(i[1], ci, ky, kx);
                    }
                }
                centre += s * x.at(i[0], ci, i[2], i[3]);
            }
            plain.get(i) - theta * centre
        })
    }

    #[test]
    fn theta_zero_is_plain_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[2, 3, 6, 7], &mut rng);
        let w = random(&[4, 3, 3, 3], &mut rng);
        let b = random(&[4], &mut rng);
        let layer = CdConvLayer::new(w.clone(), b.clone(), 0.0).unwrap();
        let got = cd_conv(&x, &layer).unwrap();
        let want = conv2d(&x, &w, Some(&b), 1, 1).unwrap();
        assert!(got.max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn constant_input_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random(&[2, 1, 3, 3], &mut rng);
        let layer = CdConvLayer::new(w.clone(), Tensor::zeros(&[2]), 0.7).unwrap();
        let c = 0.8;
        let out = cd_conv(&Tensor::full(&[1, 1, 6, 6], c), &layer).unwrap();
        for co in 0..2 {
            let ksum: f64 = w.data()[co * 9..(co + 1) * 9].iter().sum();
            let want = (1.0 - 0.7) * c * ksum;
            for y in 1..5 {
                for x in 1..5 {
                    assert!((out.at(0, co, y, x) - want).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn algebraic_identity_on_random_instances() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(10 + seed);
            let x = random(&[1, 3, 7, 6], &mut rng);
            let k = if seed % 2 == 0 { 3 } else { 5 };
            let w = random(&[2, 3, k, k], &mut rng);
            let b = random(&[2], &mut rng);
            let layer = CdConvLayer::new(w.clone(), b.clone(), 0.7).unwrap();
            let got = cd_conv(&x, &layer).unwrap();
            assert!(got.max_abs_diff(&identity_oracle(&x, &w, &b, 0.7)) <= 1e-12);
        }
    }

    #[test]
    fn rejects_bad_theta_and_shapes() {
        let w = Tensor::<f64>::zeros(&[1, 1, 3, 3]);
        assert!(CdConvLayer::new(w.clone(), Tensor::zeros(&[1]), 1.5).is_err());
        assert!(CdConvLayer::new(Tensor::<f64>::zeros(&[1, 1, 2, 2]), Tensor::zeros(&[1]), 0.5).is_err());
        let layer = CdConvLayer::new(w, Tensor::zeros(&[1]), 0.7).unwrap();
        assert!(cd_conv(&Tensor::zeros(&[1, 2, 4, 4]), &layer).is_err());
    }

    #[test]
    fn gradients_over_seeds() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(50 + seed);
            let x = random(&[2, 2, 5, 6], &mut rng);
            let w = random(&[3, 2, 3, 3], &mut rng);
            let b = random(&[3], &mut rng);
            let report = grad_check(
                |t, v| {
                    let y = t.cd_conv(v[0], v[1], Some(v[2]), 0.7, 1)?;
                    let y2 = t.mul(y, y)?;
                    Ok(t.sum(y2))
                },
                &[x, w, b],
                &GradCheckOptions::default(),
            )
            .unwrap();
            assert!(report.passed, "seed {seed}: {report:?}");
        }
    }
}
