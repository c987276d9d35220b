use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Real;

/// Fractional sampling positions, one `(y, x)` pair per output site in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid<T> {
    pub out_h: usize,
    pub out_w: usize,
    pub coords: Vec<(T, T)>,
}

impl<T: Real> SampleGrid<T> {
    pub fn new(out_h: usize, out_w: usize, coords: Vec<(T, T)>) -> Result<Self> {
        if out_h * out_w != coords.len() || coords.is_empty() {
            return Err(Error::invalid(
                "sample_grid",
                format!("{} coords for a {out_h}x{out_w} grid", coords.len()),
            ));
        }
        Ok(Self {
            out_h,
            out_w,
            coords,
        })
    }

    /// Every pixel of an `h × w` grid displaced by `(dy, dx)`.
    pub fn shifted(h: usize, w: usize, dy: T, dx: T) -> Self {
        let coords = (0..h)
            .flat_map(|y| {
                (0..w).map(move |x| (T::from_usize_lossy(y) + dy, T::from_usize_lossy(x) + dx))
            })
            .collect();
        Self {
            out_h: h,
            out_w: w,
            coords,
        }
    }
}

/// The (up to four) grid taps behind one fractional sample. Out-of-grid taps are dropped,
/// which is the same as reading zero-valued virtual pixels.
pub(crate) fn bilinear_taps<T: Real>(h: usize, w: usize, y: T, x: T) -> ([(usize, T); 4], usize) {
    let y0f = y.floor();
    let x0f = x.floor();
    let fy = y - y0f;
    let fx = x - x0f;
    let y0 = y0f.to_i64().unwrap_or(i64::MIN / 2);
    let x0 = x0f.to_i64().unwrap_or(i64::MIN / 2);
    let one = T::one();
    let cand = [
        (y0, x0, (one - fy) * (one - fx)),
        (y0, x0 + 1, (one - fy) * fx),
        (y0 + 1, x0, fy * (one - fx)),
        (y0 + 1, x0 + 1, fy * fx),
    ];
    let mut taps = [(0usize, T::zero()); 4];
    let mut n = 0;
    for (yy, xx, wt) in cand {
        if wt == T::zero() || yy < 0 || xx < 0 || yy >= h as i64 || xx >= w as i64 {
            continue;
        }
        taps[n] = (yy as usize * w + xx as usize, wt);
        n += 1;
    }
    (taps, n)
}

/// Bilinear sampling of every `[h, w]` plane of a 4-d tensor at the grid's positions.
pub fn bilinear_sample<T: Real>(input: &Tensor<T>, grid: &SampleGrid<T>) -> Result<Tensor<T>> {
    let (b, c, h, w) = input.dims4()?;
    let taps: Vec<_> = grid
        .coords
        .iter()
        .map(|&(y, x)| bilinear_taps(h, w, y, x))
        .collect();
    let out_plane = grid.out_h * grid.out_w;
    let mut out = Tensor::zeros(&[b, c, grid.out_h, grid.out_w]);
    for (plane_idx, dst) in out.data_mut().chunks_mut(out_plane).enumerate() {
        let src = &input.data()[plane_idx * h * w..][..h * w];
        for (d, (t, n)) in dst.iter_mut().zip(&taps) {
            *d = t[..*n].iter().fold(T::zero(), |acc, &(i, wt)| acc + wt * src[i]);
        }
    }
    Ok(out)
}

/// Adjoint of [`bilinear_sample`]: scatters `grad_out` back onto the input grid.
pub(crate) fn bilinear_sample_backward<T: Real>(
    input_shape: &[usize],
    grid: &SampleGrid<T>,
    grad_out: &Tensor<T>,
) -> Tensor<T> {
    let (h, w) = (input_shape[2], input_shape[3]);
    let mut grad = Tensor::zeros(input_shape);
    let out_plane = grid.out_h * grid.out_w;
    let taps: Vec<_> = grid
        .coords
        .iter()
        .map(|&(y, x)| bilinear_taps(h, w, y, x))
        .collect();
    for (plane_idx, dst) in grad.data_mut().chunks_mut(h * w).enumerate() {
        let src = &grad_out.data()[plane_idx * out_plane..][..out_plane];
        for (&g, (t, n)) in src.iter().zip(&taps) {
            for &(i, wt) in &t[..*n] {
                dst[i] = dst[i] + wt * g;
            }
        }
    }
    grad
}
