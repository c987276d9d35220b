use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Window offsets `[−lo, hi]` of a size-`n` structuring element; even sizes lean right.
pub(crate) fn window(n: usize) -> (usize, usize) {
    let lo = (n - 1) / 2;
    (lo, n - 1 - lo)
}

/// Sliding min (or max) along one axis with edge replication over offsets `[−back, fwd]`.
fn slide(src: &[f64], h: usize, w: usize, along_rows: bool, back: usize, fwd: usize, take_min: bool) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    let pick = |a: f64, b: f64| if take_min { a.min(b) } else { a.max(b) };
    for y in 0..h {
        for x in 0..w {
            let (pos, n) = if along_rows { (x, w) } else { (y, h) };
            let lo = pos.saturating_sub(back);
            let hi = (pos + fwd).min(n - 1);
            let mut acc = if take_min { f64::INFINITY } else { f64::NEG_INFINITY };
            // Replicated edge pixels equal the clamped end samples, already in range.
            for k in lo..=hi {
                let v = if along_rows { src[y * w + k] } else { src[k * w + x] };
                acc = pick(acc, v);
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Flat square erosion: `min` over `[y−lo, y+hi] × [x−lo, x+hi]`, edges replicated.
pub fn erode(img: &Tensor<f64>, se: usize) -> Tensor<f64> {
    let (h, w) = img.hw();
    let (lo, hi) = window(se);
    let rows = slide(img.data(), h, w, true, lo, hi, true);
    let out = slide(&rows, h, w, false, lo, hi, true);
    Tensor::from_parts(img.shape().to_vec(), out)
}

/// Flat square dilation with the reflected element, so `dilate(erode(f))` is an opening.
pub fn dilate(img: &Tensor<f64>, se: usize) -> Tensor<f64> {
    let (h, w) = img.hw();
    let (lo, hi) = window(se);
    let rows = slide(img.data(), h, w, true, hi, lo, false);
    let out = slide(&rows, h, w, false, hi, lo, false);
    Tensor::from_parts(img.shape().to_vec(), out)
}

/// White top-hat `f − (f ∘ B)` with a flat `se × se` square.
pub fn tophat(img: &Tensor<f64>, se: usize) -> Result<Tensor<f64>> {
    if se < 3 {
        return Err(Error::invalid("tophat", format!("structuring element {se} must be >= 3")));
    }
    let opened = dilate(&erode(img, se), se);
    img.sub(&opened)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(img: &Tensor<f64>, se: usize) -> Tensor<f64> {
        let (h, w) = img.hw();
        let (lo, hi) = window(se);
        let px = |t: &Tensor<f64>, y: i64, x: i64| {
            t.at(0, 0, y.clamp(0, h as i64 - 1) as usize, x.clamp(0, w as i64 - 1) as usize)
        };
        let (lo, hi) = (lo as i64, hi as i64);
        let eroded = Tensor::from_fn(img.shape(), |i| {
            let (y, x) = (i[2] as i64, i[3] as i64);
            let mut m = f64::INFINITY;
            for dy in -lo..=hi {
                for dx in -lo..=hi {
                    m = m.min(px(img, y + dy, x + dx));
                }
            }
            m
        });
        let opened = Tensor::from_fn(img.shape(), |i| {
            let (y, x) = (i[2] as i64, i[3] as i64);
            let mut m = f64::NEG_INFINITY;
            for dy in -hi..=lo {
                for dx in -hi..=lo {
                    m = m.max(px(&eroded, y + dy, x + dx));
                }
            }
            m
        });
        img.sub(&opened).unwrap()
    }

    #[test]
    fn constant_image_vanishes() {
        let img = Tensor::full(&[1, 1, 9, 9], 42.0);
        assert!(tophat(&img, 5).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isolated_pixel_survives() {
        let mut img = Tensor::zeros(&[1, 1, 11, 11]);
        img.set(&[0, 0, 5, 5], 7.0);
        let out = tophat(&img, 5).unwrap();
        assert_eq!(out.at(0, 0, 5, 5), 7.0);
        assert_eq!(out.sum(), 7.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for se in [3, 4, 5, 7] {
            let img = Tensor::from_fn(&[1, 1, 13, 10], |_| rng.random_range(0.0..255.0));
            let out = tophat(&img, se).unwrap();
            assert_eq!(out, brute(&img, se), "se {se}");
            assert!(out.data().iter().all(|&v| v >= 0.0));
        }
        assert!(tophat(&Tensor::zeros(&[1, 1, 4, 4]), 2).is_err());
    }
}
