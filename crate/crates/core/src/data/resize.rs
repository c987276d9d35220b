//! Separable bicubic resampling and the bicubic degradation model.

use crate::data::sequence::FrameSequence;
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::rational::Rational;
use crate::scalar::Real;

/// Cubic convolution coefficient.
pub const CUBIC_A: f64 = -0.5;

/// Keys cubic kernel with `a = −0.5`, support `[-2, 2]`.
pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Taps `(first source index, weights)` for one output sample; indices may be out of range
/// and are clamped by the caller.
#[derive(Clone, Debug, PartialEq)]
pub struct Taps {
    pub start: i64,
    pub weights: Vec<f64>,
}

/// Normalized 1-D weights producing `n_out` samples at `factor`, pixel-centre aligned.
/// When shrinking the kernel is widened by `1/factor` to band-limit the input.
pub fn axis_taps(n_out: usize, factor: f64) -> Vec<Taps> {
    let stretch = if factor < 1.0 { 1.0 / factor } else { 1.0 };
    let support = 2.0 * stretch;
    (0..n_out)
        .map(|i| {
            let centre = (i as f64 + 0.5) / factor - 0.5;
            let start = (centre - support).floor() as i64 + 1;
            let end = (centre + support).ceil() as i64 - 1;
            let mut weights: Vec<f64> = (start..=end)
                .map(|j| cubic_kernel((centre - j as f64) / stretch) / stretch)
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Taps { start, weights }
        })
        .collect()
}

fn resample_axis<T: Real>(src: &[T], n: usize, stride: usize, taps: &[Taps], dst: &mut [T], dst_stride: usize) {
    for (o, t) in taps.iter().enumerate() {
        let mut acc = 0.0;
        for (k, &w) in t.weights.iter().enumerate() {
            let j = (t.start + k as i64).clamp(0, n as i64 - 1) as usize;
            acc += w * src[j * stride].to_f64_lossy();
        }
        dst[o * dst_stride] = T::lit(acc);
    }
}

/// Bicubic resize of every `[H, W]` plane by `factor`; output extent is `floor(n · factor)`.
pub fn bicubic_resize<T: Real>(img: &Tensor<T>, factor: Rational) -> Result<Tensor<T>> {
    let (b, c, h, w) = img.dims4()?;
    let (oh, ow) = (factor.scale_floor(h), factor.scale_floor(w));
    if oh < 1 || ow < 1 {
        return Err(Error::invalid(
            "bicubic_resize",
            format!("{h}x{w} by {factor} gives an empty image"),
        ));
    }
    if factor.numer() == factor.denom() {
        return Ok(img.clone());
    }
    let f = factor.to_f64();
    let (ty, tx) = (axis_taps(oh, f), axis_taps(ow, f));
    let mut out = Tensor::zeros(&[b, c, oh, ow]);
    let mut mid = vec![T::zero(); h * ow];
    for p in 0..b * c {
        let src = &img.data()[p * h * w..][..h * w];
        for y in 0..h {
            resample_axis(&src[y * w..], w, 1, &tx, &mut mid[y * ow..], 1);
        }
        let dst = &mut out.data_mut()[p * oh * ow..][..oh * ow];
        for x in 0..ow {
            resample_axis(&mid[x..], h, ow, &ty, &mut dst[x..], ow);
        }
    }
    Ok(out)
}

fn scatter_axis<T: Real>(src: &[T], stride: usize, taps: &[Taps], dst: &mut [T], n: usize, dst_stride: usize) {
    for (o, t) in taps.iter().enumerate() {
        let g = src[o * stride].to_f64_lossy();
        for (k, &w) in t.weights.iter().enumerate() {
            let j = (t.start + k as i64).clamp(0, n as i64 - 1) as usize;
            dst[j * dst_stride] = T::lit(dst[j * dst_stride].to_f64_lossy() + w * g);
        }
    }
}

/// Transpose of [`bicubic_resize`]: maps an output-sized gradient back onto `h × w` planes.
fn bicubic_resize_adjoint<T: Real>(g: &Tensor<T>, factor: Rational, h: usize, w: usize) -> Tensor<T> {
    let (b, c, oh, ow) = g.dims4().expect("4-d gradient");
    if factor.numer() == factor.denom() {
        return g.clone();
    }
    let f = factor.to_f64();
    let (ty, tx) = (axis_taps(oh, f), axis_taps(ow, f));
    let mut out = Tensor::zeros(&[b, c, h, w]);
    let mut mid = vec![T::zero(); h * ow];
    for p in 0..b * c {
        let src = &g.data()[p * oh * ow..][..oh * ow];
        mid.iter_mut().for_each(|v| *v = T::zero());
        for x in 0..ow {
            scatter_axis(&src[x..], ow, &ty, &mut mid[x..], h, ow);
        }
        let dst = &mut out.data_mut()[p * h * w..][..h * w];
        for y in 0..h {
            scatter_axis(&mid[y * ow..], 1, &tx, &mut dst[y * w..], w, 1);
        }
    }
    out
}

impl<T: Real> Tape<T> {
    /// Differentiable [`bicubic_resize`].
    pub fn bicubic_resize(&mut self, x: Var, factor: Rational) -> Result<Var> {
        let value = bicubic_resize(self.value(x), factor)?;
        let (_, _, h, w) = self.value(x).dims4()?;
        Ok(self.record(value, &[x], move |g, _| vec![Some(bicubic_resize_adjoint(g, factor, h, w))]))
    }
}

/// Bicubic upsampling by an integer factor.
pub fn bicubic_upsample<T: Real>(img: &Tensor<T>, scale: usize) -> Result<Tensor<T>> {
    bicubic_resize(img, Rational::integer(scale as u32))
}

/// Per-frame `1/scale` bicubic downsampling; annotations are divided by `scale`.
pub fn degrade(hr: &FrameSequence, scale: usize) -> Result<FrameSequence> {
    let (h, w) = hr.size();
    if scale == 0 || h % scale != 0 || w % scale != 0 {
        return Err(Error::invalid(
            "degrade",
            format!("{h}x{w} is not divisible by scale {scale}"),
        ));
    }
    let factor = Rational::new(1, scale as u32)?;
    let frames = hr
        .frames()
        .iter()
        .map(|f| Ok(bicubic_resize(f, factor)?.map(|v| v.clamp(0.0, 1.0))))
        .collect::<Result<Vec<_>>>()?;
    let seq = FrameSequence::new(frames)?;
    match hr.annotations() {
        Some(ann) => seq.with_annotations(
            ann.iter()
                .map(|l| l.iter().map(|a| a.scaled_down(scale as f64)).collect())
                .collect(),
        ),
        None => Ok(seq),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sequence::TargetAnnotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adjoint_matches_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for factor in [Rational::integer(4), Rational::new(1, 2).unwrap(), Rational::new(3, 2).unwrap()] {
            let x = Tensor::from_fn(&[1, 2, 6, 8], |_| rng.random::<f64>());
            let y = bicubic_resize(&x, factor).unwrap();
            let g = Tensor::from_fn(y.shape(), |_| rng.random::<f64>());
            let lhs: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
            let back = bicubic_resize_adjoint(&g, factor, 6, 8);
            let rhs: f64 = x.data().iter().zip(back.data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{factor}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn kernel_partition_of_unity() {
        for i in 0..=100 {
            let phase = i as f64 / 100.0;
            let s: f64 = (-2..=2).map(|k| cubic_kernel(phase - k as f64)).sum();
            assert!((s - 1.0).abs() <= 1e-12, "phase {phase}: {s}");
        }
        assert_eq!(cubic_kernel(0.0), 1.0);
        assert_eq!(cubic_kernel(1.0), 0.0);
        assert_eq!(cubic_kernel(2.0), 0.0);
    }

    #[test]
    fn unit_factor_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = Tensor::<f64>::from_fn(&[1, 1, 7, 9], |_| rng.random());
        assert_eq!(bicubic_resize(&img, Rational::integer(1)).unwrap(), img);
        // Going through the general path also reproduces the input.
        let t = axis_taps(9, 1.0);
        for (i, tap) in t.iter().enumerate() {
            for (k, &w) in tap.weights.iter().enumerate() {
                let j = tap.start + k as i64;
                assert!((w - if j == i as i64 { 1.0 } else { 0.0 }).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn constant_stays_constant() {
        let img = Tensor::<f64>::full(&[1, 1, 12, 8], 0.37);
        for f in ["4", "1/4", "3/2", "1/3"] {
            let out = bicubic_resize(&img, f.parse().unwrap()).unwrap();
            assert!(out.data().iter().all(|&v| (v - 0.37).abs() <= 1e-12), "{f}");
        }
    }

    #[test]
    fn delta_upscale_matches_separable_oracle() {
        let mut img = Tensor::<f64>::zeros(&[1, 1, 6, 6]);
        img.set(&[0, 0, 2, 3], 1.0);
        let out = bicubic_resize(&img, Rational::integer(4)).unwrap();
        assert_eq!(out.shape(), &[1, 1, 24, 24]);
        // Clamped taps only ever land on zero pixels here, so no border handling is needed.
        for y in 0..24 {
            for x in 0..24 {
                let cy = (y as f64 + 0.5) / 4.0 - 0.5;
                let cx = (x as f64 + 0.5) / 4.0 - 0.5;
                let want = cubic_kernel(cy - 2.0) * cubic_kernel(cx - 3.0);
                assert!((out.at(0, 0, y, x) - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn size_arithmetic_and_errors() {
        let img = Tensor::<f64>::zeros(&[1, 1, 10, 7]);
        assert_eq!(bicubic_resize(&img, "1/4".parse().unwrap()).unwrap().shape(), &[1, 1, 2, 1]);
        assert!(bicubic_resize(&img, "1/8".parse().unwrap()).is_err());
    }

    #[test]
    fn degrade_contract() {
        let frames = vec![Tensor::full(&[1, 1, 256, 256], 0.5); 2];
        let ann = vec![vec![TargetAnnotation::new(100.0, 60.0, 8.0, 8.0)]; 2];
        let seq = FrameSequence::new(frames).unwrap().with_annotations(ann).unwrap();
        let lr = degrade(&seq, 4).unwrap();
        assert_eq!(lr.size(), (64, 64));
        assert_eq!(lr.annotations().unwrap()[1][0], TargetAnnotation::new(25.0, 15.0, 2.0, 2.0));
        let odd = FrameSequence::new(vec![Tensor::zeros(&[1, 1, 30, 32])]).unwrap();
        assert!(degrade(&odd, 4).is_err());
    }
}
