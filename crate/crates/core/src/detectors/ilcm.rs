use crate::detectors::morphology::window;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Denominator guard for the cell-mean ratios.
pub const ILCM_EPS: f64 = 1e-10;

/// Mean of the `cell × cell` block anchored like a structuring element at every valid pixel.
fn cell_means(img: &Tensor<f64>, cell: usize) -> Vec<f64> {
    let (h, w) = img.hw();
    let (lo, hi) = window(cell);
    let area = (cell * cell) as f64;
    let mut out = vec![0.0; h * w];
    for y in lo..h.saturating_sub(hi) {
        for x in lo..w.saturating_sub(hi) {
            let mut s = 0.0;
            for yy in y - lo..=y + hi {
                for xx in x - lo..=x + hi {
                    s += img.at(0, 0, yy, xx);
                }
            }
            out[y * w + x] = s / area;
        }
    }
    out
}

/// Improved local contrast: `m₀ · min_i (m₀ / m_i)` over a 3×3 grid of cells, 0 outside the
/// interior where the whole grid fits.
pub fn ilcm(img: &Tensor<f64>, cell: usize) -> Result<Tensor<f64>> {
    let (h, w) = img.hw();
    if cell < 3 {
        return Err(Error::invalid("ilcm", format!("cell {cell} must be >= 3")));
    }
    if h < 3 * cell || w < 3 * cell {
        return Err(Error::invalid(
            "ilcm",
            format!("{h}x{w} image is smaller than three {cell}-pixel cells"),
        ));
    }
    let means = cell_means(img, cell);
    let (lo, hi) = window(cell);
    let (first, last_y, last_x) = (cell + lo, h - cell - hi, w - cell - hi);
    let mut out = Tensor::zeros(img.shape());
    for y in first..last_y {
        for x in first..last_x {
            let m0 = means[y * w + x];
            let mut ratio = f64::INFINITY;
            for (dy, dx) in [(-1i64, -1i64), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
                let yy = (y as i64 + dy * cell as i64) as usize;
                let xx = (x as i64 + dx * cell as i64) as usize;
                ratio = ratio.min(m0 / means[yy * w + xx].max(ILCM_EPS));
            }
            out.set(&[0, 0, y, x], (m0 * ratio).max(0.0));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image() {
        let img = Tensor::full(&[1, 1, 20, 20], 3.0);
        let out = ilcm(&img, 3).unwrap();
        for y in 4..16 {
            for x in 4..16 {
                assert_eq!(out.at(0, 0, y, x), 3.0);
            }
        }
        assert_eq!(out.at(0, 0, 3, 10), 0.0);
    }

    #[test]
    fn bright_cell() {
        let mut img = Tensor::full(&[1, 1, 15, 15], 1.0);
        for y in 5..10 {
            for x in 5..10 {
                img.set(&[0, 0, y, x], 10.0);
            }
        }
        assert_eq!(ilcm(&img, 5).unwrap().at(0, 0, 7, 7), 100.0);
    }

    #[test]
    fn matches_cell_mean_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = Tensor::from_fn(&[1, 1, 16, 17], |_| rng.random_range(0.0..255.0));
        let out = ilcm(&img, 3).unwrap();
        let mean = |cy: usize, cx: usize| {
            let mut s = 0.0;
            for y in cy - 1..=cy + 1 {
                for x in cx - 1..=cx + 1 {
                    s += img.at(0, 0, y, x);
                }
            }
            s / 9.0
        };
        for y in 4..12 {
            for x in 4..13 {
                let m0 = mean(y, x);
                let mut r = f64::INFINITY;
                for dy in [-3i64, 0, 3] {
                    for dx in [-3i64, 0, 3] {
                        if (dy, dx) != (0, 0) {
                            let mi = mean((y as i64 + dy) as usize, (x as i64 + dx) as usize);
                            r = r.min(m0 / mi.max(1e-10));
                        }
                    }
                }
                assert_eq!(out.at(0, 0, y, x), (m0 * r).max(0.0));
            }
        }
    }

    #[test]
    fn too_small_image_rejected() {
        assert!(ilcm(&Tensor::zeros(&[1, 1, 14, 20]), 5).is_err());
    }
}
