//! Stride-1 2-D cross-correlation with zero padding and dilation.
//!
//! All loops are written row-at-a-time so the inner loop is a contiguous axpy or dot.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Real;

/// Geometry shared by the forward and both backward kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub cin: usize,
    pub cout: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvGeometry {
    pub fn new<T: Real>(
        input: &Tensor<T>,
        weight: &Tensor<T>,
        padding: usize,
        dilation: usize,
    ) -> Result<Self> {
        let (batch, cin, in_h, in_w) = input.dims4()?;
        let (cout, wcin, kh, kw) = weight.dims4()?;
        if wcin != cin {
            return Err(Error::shape(
                "conv2d",
                &[cout, cin, kh, kw],
                weight.shape(),
            ));
        }
        if dilation == 0 {
            return Err(Error::invalid("conv2d", "dilation must be >= 1"));
        }
        let span_h = dilation * (kh - 1);
        let span_w = dilation * (kw - 1);
        if in_h + 2 * padding <= span_h || in_w + 2 * padding <= span_w {
            return Err(Error::invalid(
                "conv2d",
                format!("kernel {kh}x{kw} (dilation {dilation}) does not fit a {in_h}x{in_w} input"),
            ));
        }
        Ok(Self {
            batch,
            cin,
            cout,
            in_h,
            in_w,
            kh,
            kw,
            out_h: in_h + 2 * padding - span_h,
            out_w: in_w + 2 * padding - span_w,
            padding,
            dilation,
        })
    }

    /// Input offset of kernel tap `k` relative to the output coordinate.
    #[inline]
    fn tap_offset(&self, k: usize) -> isize {
        (k * self.dilation) as isize - self.padding as isize
    }

    /// Valid output range `[lo, hi)` along an axis of length `out`, for input length `len`
    /// and tap offset `off`.
    #[inline]
    fn valid_range(out: usize, len: usize, off: isize) -> (usize, usize) {
        let lo = (-off).max(0) as usize;
        let hi = (len as isize - off).clamp(0, out as isize) as usize;
        (lo.min(hi), hi)
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.cout, self.out_h, self.out_w]
    }
}

pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    padding: usize,
    dilation: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::new(input, weight, padding, dilation)?;
    if let Some(b) = bias {
        if b.len() != g.cout {
            return Err(Error::shape("conv2d bias", &[g.cout], b.shape()));
        }
    }
    let mut out = Tensor::zeros(&g.output_shape());
    conv2d_accumulate(&g, input.data(), weight.data(), out.data_mut());
    if let Some(b) = bias {
        let plane = g.out_h * g.out_w;
        for (chunk_idx, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let bv = b.data()[chunk_idx % g.cout];
            chunk.iter_mut().for_each(|v| *v = *v + bv);
        }
    }
    Ok(out)
}

/// `out += input ⋆ weight`.
pub(crate) fn conv2d_accumulate<T: Real>(g: &ConvGeometry, input: &[T], weight: &[T], out: &mut [T]) {
    let in_plane = g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    for b in 0..g.batch {
        for co in 0..g.cout {
            let o = &mut out[(b * g.cout + co) * out_plane..][..out_plane];
            for ci in 0..g.cin {
                let inp = &input[(b * g.cin + ci) * in_plane..][..in_plane];
                for ky in 0..g.kh {
                    let oy = g.tap_offset(ky);
                    let (y0, y1) = ConvGeometry::valid_range(g.out_h, g.in_h, oy);
                    for kx in 0..g.kw {
                        let wv = weight[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let ox = g.tap_offset(kx);
                        let (x0, x1) = ConvGeometry::valid_range(g.out_w, g.in_w, ox);
                        if x0 >= x1 {
                            continue;
                        }
                        for y in y0..y1 {
                            let iy = (y as isize + oy) as usize;
                            let src = &inp[iy * g.in_w + (x0 as isize + ox) as usize..][..x1 - x0];
                            let dst = &mut o[y * g.out_w + x0..][..x1 - x0];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d = *d + wv * s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradient with respect to the input: `grad_in += grad_out ⋆ᵀ weight`.
pub(crate) fn conv2d_backward_input<T: Real>(
    g: &ConvGeometry,
    grad_out: &[T],
    weight: &[T],
    grad_in: &mut [T],
) {
    let in_plane = g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    for b in 0..g.batch {
        for ci in 0..g.cin {
            let gi = &mut grad_in[(b * g.cin + ci) * in_plane..][..in_plane];
            for co in 0..g.cout {
                let go = &grad_out[(b * g.cout + co) * out_plane..][..out_plane];
                for ky in 0..g.kh {
                    let oy = g.tap_offset(ky);
                    let (y0, y1) = ConvGeometry::valid_range(g.out_h, g.in_h, oy);
                    for kx in 0..g.kw {
                        let wv = weight[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let ox = g.tap_offset(kx);
                        let (x0, x1) = ConvGeometry::valid_range(g.out_w, g.in_w, ox);
                        if x0 >= x1 {
                            continue;
                        }
                        for y in y0..y1 {
                            let iy = (y as isize + oy) as usize;
                            let src = &go[y * g.out_w + x0..][..x1 - x0];
                            let dst =
                                &mut gi[iy * g.in_w + (x0 as isize + ox) as usize..][..x1 - x0];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d = *d + wv * s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradient with respect to the weight: `grad_w[co,ci,ky,kx] += Σ grad_out · shifted input`.
pub(crate) fn conv2d_backward_weight<T: Real>(
    g: &ConvGeometry,
    grad_out: &[T],
    input: &[T],
    grad_w: &mut [T],
) {
    let in_plane = g.in_h * g.in_w;
    let out_plane = g.out_h * g.out_w;
    for co in 0..g.cout {
        for ci in 0..g.cin {
            for ky in 0..g.kh {
                let oy = g.tap_offset(ky);
                let (y0, y1) = ConvGeometry::valid_range(g.out_h, g.in_h, oy);
                for kx in 0..g.kw {
                    let ox = g.tap_offset(kx);
                    let (x0, x1) = ConvGeometry::valid_range(g.out_w, g.in_w, ox);
                    let mut acc = T::zero();
                    if x0 < x1 {
                        for b in 0..g.batch {
                            let go = &grad_out[(b * g.cout + co) * out_plane..][..out_plane];
                            let inp = &input[(b * g.cin + ci) * in_plane..][..in_plane];
                            for y in y0..y1 {
                                let iy = (y as isize + oy) as usize;
                                let s = &inp[iy * g.in_w + (x0 as isize + ox) as usize..]
                                    [..x1 - x0];
                                let d = &go[y * g.out_w + x0..][..x1 - x0];
                                acc = acc + d.iter().zip(s).map(|(&a, &b)| a * b).sum::<T>();
                            }
                        }
                    }
                    let wi = ((co * g.cin + ci) * g.kh + ky) * g.kw + kx;
                    grad_w[wi] = grad_w[wi] + acc;
                }
            }
        }
    }
}

/// Per-output-channel sum of an upstream gradient (the bias gradient).
pub(crate) fn channel_sums<T: Real>(grad_out: &Tensor<T>) -> Vec<T> {
    let s = grad_out.shape();
    let (b, c, plane) = (s[0], s[1], s[2] * s[3]);
    let mut sums = vec![T::zero(); c];
    for bi in 0..b {
        for (ci, sum) in sums.iter_mut().enumerate() {
            let start = (bi * c + ci) * plane;
            *sum = *sum + grad_out.data()[start..start + plane].iter().copied().sum::<T>();
        }
    }
    sums
}

/// Depth-to-space rearrangement: `[B, C·r², H, W] → [B, C, H·r, W·r]`.
pub fn pixel_shuffle<T: Real>(input: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (b, c, h, w) = input.dims4()?;
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::invalid(
            "pixel_shuffle",
            format!("{c} channels not divisible by {r}²"),
        ));
    }
    let oc = c / (r * r);
    let mut out = Tensor::zeros(&[b, oc, h * r, w * r]);
    let od = out.data_mut();
    let id = input.data();
    for bi in 0..b {
        for o in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let src_c = o * r * r + i * r + j;
                    let src = &id[((bi * c) + src_c) * h * w..][..h * w];
                    for y in 0..h {
                        let row = &mut od[((bi * oc + o) * h * r + y * r + i) * w * r..][..w * r];
                        for x in 0..w {
                            row[x * r + j] = src[y * w + x];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_shuffle`]; also its adjoint, which is what the backward pass needs.
pub fn pixel_unshuffle<T: Real>(input: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (b, c, h, w) = input.dims4()?;
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::invalid(
            "pixel_unshuffle",
            format!("{h}x{w} not divisible by {r}"),
        ));
    }
    let (oh, ow) = (h / r, w / r);
    let oc = c * r * r;
    let mut out = Tensor::zeros(&[b, oc, oh, ow]);
    let od = out.data_mut();
    let id = input.data();
    for bi in 0..b {
        for o in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let dst_c = o * r * r + i * r + j;
                    let dst = &mut od[(bi * oc + dst_c) * oh * ow..][..oh * ow];
                    for y in 0..oh {
                        let row = &id[((bi * c + o) * h + y * r + i) * w..][..w];
                        for x in 0..ow {
                            dst[y * ow + x] = row[x * r + j];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
