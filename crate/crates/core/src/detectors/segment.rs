use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;

/// Connected bright region of a target image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Intensity-weighted centroid (x = column).
    pub x: f64,
    pub y: f64,
    /// Component maximum.
    pub score: f64,
    pub area: usize,
}

/// 8-connected components of `{v ≥ threshold}` with at least `min_area` pixels, sorted by
/// descending score.
pub fn segment(target: &Tensor<f64>, threshold: f64, min_area: usize) -> Vec<Candidate> {
    let (h, w) = target.hw();
    let data = target.data();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if seen[start] || !(data[start] >= threshold) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(p) = stack.pop() {
            pixels.push(p);
            let (py, px) = ((p / w) as i64, (p % w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (ny, nx) = (py + dy, px + dx);
                    if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if !seen[q] && data[q] >= threshold {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if pixels.len() < min_area.max(1) {
            continue;
        }
        pixels.sort_unstable();
        let mass: f64 = pixels.iter().map(|&p| data[p]).sum();
        let (mut cy, mut cx) = (0.0, 0.0);
        if mass > 0.0 {
            for &p in &pixels {
                cy += data[p] * (p / w) as f64;
                cx += data[p] * (p % w) as f64;
            }
            cy /= mass;
            cx /= mass;
        } else {
            let n = pixels.len() as f64;
            cy = pixels.iter().map(|&p| (p / w) as f64).sum::<f64>() / n;
            cx = pixels.iter().map(|&p| (p % w) as f64).sum::<f64>() / n;
        }
        let score = pixels.iter().map(|&p| data[p]).fold(f64::NEG_INFINITY, f64::max);
        out.push(Candidate {
            x: cx,
            y: cy,
            score,
            area: pixels.len(),
        });
    }
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_above_threshold() {
        let img = Tensor::full(&[1, 1, 5, 5], 1.0);
        assert!(segment(&img, 2.0, 1).is_empty());
    }

    #[test]
    fn two_blobs() {
        let mut img = Tensor::zeros(&[1, 1, 12, 12]);
        for (y, x) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            img.set(&[0, 0, y, x], 5.0);
        }
        img.set(&[0, 0, 8, 9], 9.0);
        img.set(&[0, 0, 9, 10], 3.0); // diagonal neighbour joins the component
        let c = segment(&img, 1.0, 1);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].score, c[0].area), (9.0, 2));
        assert!((c[0].y - (9.0 * 8.0 + 3.0 * 9.0) / 12.0).abs() < 1e-12);
        assert_eq!((c[1].x, c[1].y), (2.5, 2.5));
        assert!(c.windows(2).all(|p| p[0].score > p[1].score));
        assert_eq!(segment(&img, 1.0, 3).len(), 1);
    }
}
