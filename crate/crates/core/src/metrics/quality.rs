//! Full-reference image quality: PSNR and SSIM.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// `10·log10(peak² / MSE)`; identical inputs give `+∞`.
pub fn psnr(x: &Tensor<f64>, y: &Tensor<f64>, peak: f64) -> Result<f64> {
    x.expect_same_shape(y, "psnr")?;
    if x.is_empty() {
        return Err(Error::invalid("psnr", "empty image"));
    }
    let mse = x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Normalised 1-D Gaussian taps of the SSIM window.
pub fn gaussian_taps(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..n).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable valid-mode filtering of an `h × w` plane.
fn filter_valid(px: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&px[y * w + x..]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all valid 11×11 Gaussian windows (σ = 1.5) with dynamic range `peak`.
pub fn ssim(x: &Tensor<f64>, y: &Tensor<f64>, peak: f64) -> Result<f64> {
    x.expect_same_shape(y, "ssim")?;
    let (h, w) = x.hw();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(
            "ssim",
            format!("{h}x{w} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"),
        ));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let (a, b) = (x.data(), y.data());
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect() };
    let mx = filter_valid(a, h, w, &taps);
    let my = filter_valid(b, h, w, &taps);
    let sxx = filter_valid(&prod(&|p, _| p * p), h, w, &taps);
    let syy = filter_valid(&prod(&|_, q| q * q), h, w, &taps);
    let sxy = filter_valid(&prod(&|p, q| p * q), h, w, &taps);
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor<f64> {
        Tensor::from_fn(&[1, 1, h, w], |_| rng.random::<f64>())
    }

    /// Direct per-window evaluation with a 2-D weight grid and centred moments.
    fn ssim_oracle(x: &Tensor<f64>, y: &Tensor<f64>, peak: f64) -> f64 {
        let (h, w) = x.hw();
        let n = SSIM_WINDOW;
        let c = (n - 1) as f64 / 2.0;
        let mut g = vec![vec![0.0; n]; n];
        let mut gs = 0.0;
        for (i, row) in g.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
                *v = (-r2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
                gs += *v;
            }
        }
        let (c1, c2) = ((0.01 * peak).powi(2), (0.03 * peak).powi(2));
        let mut acc = 0.0;
        let mut count = 0usize;
        for y0 in 0..=h - n {
            for x0 in 0..=w - n {
                let at = |t: &Tensor<f64>, i: usize, j: usize| t.at(0, 0, y0 + i, x0 + j);
                let (mut ux, mut uy) = (0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        ux += g[i][j] / gs * at(x, i, j);
                        uy += g[i][j] / gs * at(y, i, j);
                    }
                }
                let (mut vx, mut vy, mut cv) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let wgt = g[i][j] / gs;
                        let (dx, dy) = (at(x, i, j) - ux, at(y, i, j) - uy);
                        vx += wgt * dx * dx;
                        vy += wgt * dy * dy;
                        cv += wgt * dx * dy;
                    }
                }
                let l = (2.0 * ux * uy + c1) / (ux * ux + uy * uy + c1);
                let cs = (2.0 * cv + c2) / (vx + vy + c2);
                acc += l * cs;
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn identical_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(16, 16, &mut rng);
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), f64::INFINITY);
        assert!((ssim(&x, &x, 1.0).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn psnr_closed_form() {
        let x = Tensor::<f64>::full(&[1, 1, 8, 8], 0.5);
        let y = x.map(|v| v + 0.1);
        assert!((psnr(&x, &y, 1.0).unwrap() - 20.0).abs() <= 1e-12);
        assert_eq!(psnr(&x, &y, 1.0).unwrap(), psnr(&y, &x, 1.0).unwrap());
        assert!((psnr(&x, &y, 255.0).unwrap() - (20.0 + 20.0 * 255f64.log10())).abs() <= 1e-9);
    }

    #[test]
    fn ssim_matches_direct_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (h, w) in [(11, 11), (17, 23), (24, 20)] {
            let x = random(h, w, &mut rng);
            let y = x.zip_map(&random(h, w, &mut rng), "t", |a, b| 0.7 * a + 0.3 * b).unwrap();
            let got = ssim(&x, &y, 1.0).unwrap();
            assert!((got - ssim_oracle(&x, &y, 1.0)).abs() <= 1e-9);
            assert!((got - ssim(&y, &x, 1.0).unwrap()).abs() <= 1e-12);
            assert!((-1.0..=1.0).contains(&got));
        }
    }

    #[test]
    fn ssim_needs_a_full_window() {
        let x = Tensor::<f64>::zeros(&[1, 1, 10, 30]);
        assert!(ssim(&x, &x, 1.0).is_err());
    }
}
