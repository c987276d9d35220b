//! Patch-image low-rank + sparse decomposition solved by inexact ALM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::{spectral_norm, svd_matrix, Matrix};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IpiParams {
    /// Window side `B`.
    pub block: usize,
    /// Window stride `S`.
    pub stride: usize,
    /// `L` in `λ = L / √min(n₁, n₂, n₃)`.
    pub weight: f64,
    /// Relative feasibility tolerance `ε`.
    pub tol: f64,
    pub max_iter: usize,
    /// Penalty growth `ρ`.
    pub rho: f64,
    /// `μ₀ = mu_scale / ‖D‖₂`.
    pub mu_scale: f64,
}

impl Default for IpiParams {
    fn default() -> Self {
        Self {
            block: 50,
            stride: 10,
            weight: 1.0,
            tol: 1e-7,
            max_iter: 500,
            rho: 1.5,
            mu_scale: 1.25,
        }
    }
}

impl IpiParams {
    pub fn validate(&self) -> Result<()> {
        if self.block == 0 || self.stride == 0 || self.max_iter == 0 {
            return Err(Error::invalid("ipi", "block, stride and max_iter must be positive"));
        }
        if !(self.tol > 0.0) || !(self.weight > 0.0) || !(self.rho > 1.0) || !(self.mu_scale > 0.0) {
            return Err(Error::invalid("ipi", "need tol > 0, weight > 0, rho > 1, mu_scale > 0"));
        }
        Ok(())
    }
}

/// Window origins along one axis: every `stride`, plus a final window flush with the border.
pub fn window_origins(n: usize, block: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=n - block).step_by(stride).collect();
    if *v.last().expect("n >= block") != n - block {
        v.push(n - block);
    }
    v
}

/// Patch matrix plus its decomposition.
#[derive(Clone, Debug)]
pub struct PatchImageModel {
    pub block: usize,
    pub height: usize,
    pub width: usize,
    /// `(y, x)` origin of each column's window.
    pub origins: Vec<(usize, usize)>,
    pub d: Matrix<f64>,
    pub a: Matrix<f64>,
    pub e: Matrix<f64>,
}

/// Patch matrix and the `(y, x)` origin of each column.
pub type Patches = (Matrix<f64>, Vec<(usize, usize)>);

/// Columns are row-major vectorized `block × block` windows.
pub fn unfold(img: &Tensor<f64>, block: usize, stride: usize) -> Result<Patches> {
    let (h, w) = img.hw();
    if block > h || block > w {
        return Err(Error::invalid(
            "ipi",
            format!("{block}x{block} window does not fit a {h}x{w} image"),
        ));
    }
    let ys = window_origins(h, block, stride);
    let xs = window_origins(w, block, stride);
    let origins: Vec<(usize, usize)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (y, x))).collect();
    let mut d = Matrix::zeros(block * block, origins.len());
    let px = img.data();
    for (j, &(y0, x0)) in origins.iter().enumerate() {
        let col = d.col_mut(j);
        for r in 0..block {
            col[r * block..(r + 1) * block].copy_from_slice(&px[(y0 + r) * w + x0..][..block]);
        }
    }
    Ok((d, origins))
}

/// Averages overlapping window contributions back onto the image grid.
pub fn fold(m: &Matrix<f64>, origins: &[(usize, usize)], block: usize, height: usize, width: usize) -> Tensor<f64> {
    let mut sum = vec![0.0; height * width];
    let mut count = vec![0u32; height * width];
    for (j, &(y0, x0)) in origins.iter().enumerate() {
        let col = m.col(j);
        for r in 0..block {
            for c in 0..block {
                let p = (y0 + r) * width + x0 + c;
                sum[p] += col[r * block + c];
                count[p] += 1;
            }
        }
    }
    let data = sum
        .into_iter()
        .zip(count)
        .map(|(s, n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    Tensor::image(height, width, data).expect("sized from image")
}

/// Outcome of the IALM solve.
#[derive(Clone, Debug)]
pub struct IpiResult {
    pub target_image: Tensor<f64>,
    pub background: Tensor<f64>,
    pub model: PatchImageModel,
    pub converged: bool,
    pub iterations: usize,
    /// Final `‖D − A − E‖_F / ‖D‖_F`.
    pub residual: f64,
    pub lambda: f64,
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Low-rank part `a`, sparse part `e` and solver status.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub a: Matrix<f64>,
    pub e: Matrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Robust PCA `min ‖A‖_* + λ‖E‖₁  s.t.  D = A + E`.
pub fn rpca_ialm(d: &Matrix<f64>, lambda: f64, p: &IpiParams) -> Result<Decomposition> {
    let (m, n) = (d.rows(), d.cols());
    let d_norm = d.norm_fro();
    let done = |a, e, converged, iterations, residual| Decomposition {
        a,
        e,
        converged,
        iterations,
        residual,
    };
    if d_norm == 0.0 {
        return Ok(done(Matrix::zeros(m, n), Matrix::zeros(m, n), true, 0, 0.0));
    }
    let two_norm = spectral_norm(d, 100);
    let inf_norm = d.data().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let dual = two_norm.max(inf_norm / lambda);
    let mut y = Matrix::from_fn(m, n, |r, c| d[(r, c)] / dual);
    let mut mu = p.mu_scale / two_norm;
    let mut a = Matrix::zeros(m, n);
    let mut e = Matrix::zeros(m, n);
    let mut residual = f64::INFINITY;
    for it in 1..=p.max_iter {
        let inv_mu = 1.0 / mu;
        let target = Matrix::from_fn(m, n, |r, c| d[(r, c)] - e[(r, c)] + y[(r, c)] * inv_mu);
        let svd = svd_matrix(&target)?;
        a = Matrix::zeros(m, n);
        for (k, &s) in svd.s.iter().enumerate() {
            let shrunk = s - inv_mu;
            if shrunk <= 0.0 {
                break;
            }
            let (u, v) = (svd.u.col(k), svd.v.col(k));
            for c in 0..n {
                let f = shrunk * v[c];
                if f == 0.0 {
                    continue;
                }
                for (dst, &uv) in a.col_mut(c).iter_mut().zip(u) {
                    *dst += f * uv;
                }
            }
        }
        let thr = lambda * inv_mu;
        for c in 0..n {
            for r in 0..m {
                e[(r, c)] = soft(d[(r, c)] - a[(r, c)] + y[(r, c)] * inv_mu, thr);
            }
        }
        let mut z2 = 0.0f64;
        for c in 0..n {
            for r in 0..m {
                let z = d[(r, c)] - a[(r, c)] - e[(r, c)];
                y[(r, c)] += mu * z;
                z2 += z * z;
            }
        }
        residual = z2.sqrt() / d_norm;
        if residual <= p.tol {
            return Ok(done(a, e, true, it, residual));
        }
        mu *= p.rho;
    }
    Ok(done(a, e, false, p.max_iter, residual))
}

/// IPI detection: unfold, decompose, fold the sparse part back.
pub fn ipi(img: &Tensor<f64>, params: &IpiParams) -> Result<IpiResult> {
    params.validate()?;
    let (h, w) = img.hw();
    let (d, origins) = unfold(img, params.block, params.stride)?;
    let n3 = origins.len();
    let lambda = params.weight / (params.block.min(n3) as f64).sqrt();
    let Decomposition {
        a,
        e,
        converged,
        iterations,
        residual,
    } = rpca_ialm(&d, lambda, params)?;
    let target_image = fold(&e, &origins, params.block, h, w);
    let background = fold(&a, &origins, params.block, h, w);
    Ok(IpiResult {
        target_image,
        background,
        model: PatchImageModel {
            block: params.block,
            height: h,
            width: w,
            origins,
            d,
            a,
            e,
        },
        converged,
        iterations,
        residual,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origins_cover_the_border() {
        assert_eq!(window_origins(10, 4, 3), vec![0, 3, 6]);
        assert_eq!(window_origins(11, 4, 3), vec![0, 3, 6, 7]);
        assert_eq!(window_origins(4, 4, 3), vec![0]);
    }

    #[test]
    fn fold_unfold_round_trip() {
        let img = Tensor::from_fn(&[1, 1, 11, 13], |i| (i[2] * 13 + i[3]) as f64);
        let (d, o) = unfold(&img, 4, 3).unwrap();
        assert_eq!(d.cols(), 4 * 4);
        assert_eq!(fold(&d, &o, 4, 11, 13), img);
        assert!(unfold(&img, 12, 3).is_err());
    }
}
