//! Detection probability / false-alarm rate and their threshold sweep.

use serde::{Deserialize, Serialize};

use crate::data::TargetAnnotation;
use crate::detectors::{segment, Candidate};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Match counts at one threshold, aggregated over an image set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionCounts {
    /// True detections.
    pub td: usize,
    /// False detections.
    pub fd: usize,
    /// Ground-truth targets.
    pub at: usize,
    /// Pixels inspected.
    pub np: usize,
}

impl DetectionCounts {
    pub fn pd(&self) -> f64 {
        if self.at == 0 {
            0.0
        } else {
            self.td as f64 / self.at as f64
        }
    }

    pub fn fa(&self) -> f64 {
        if self.np == 0 {
            0.0
        } else {
            self.fd as f64 / self.np as f64
        }
    }
}

/// Greedy nearest-first matching. Each candidate and each target is used at most once, and a pair
/// counts only if its distance is `< tau`. Returns the number of matches.
pub fn match_targets(candidates: &[Candidate], truth: &[TargetAnnotation], tau: f64) -> usize {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let d = (c.x - t.x).hypot(c.y - t.y);
            if d < tau {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_c = vec![false; candidates.len()];
    let mut used_t = vec![false; truth.len()];
    let mut matches = 0;
    for (_, i, j) in pairs {
        if !used_c[i] && !used_t[j] {
            used_c[i] = true;
            used_t[j] = true;
            matches += 1;
        }
    }
    matches
}

/// Counts for a single threshold over all images.
pub fn detection_counts(
    target_images: &[Tensor<f64>],
    annotations: &[Vec<TargetAnnotation>],
    tau: f64,
    threshold: f64,
    min_area: usize,
) -> Result<DetectionCounts> {
    if target_images.len() != annotations.len() {
        return Err(Error::invalid(
            "roc",
            format!("{} target images but {} annotation sets", target_images.len(), annotations.len()),
        ));
    }
    let mut c = DetectionCounts::default();
    for (img, truth) in target_images.iter().zip(annotations) {
        let cands = segment(img, threshold, min_area);
        let td = match_targets(&cands, truth, tau);
        c.td += td;
        c.fd += cands.len() - td;
        c.at += truth.len();
        c.np += img.len();
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fa: f64,
    pub pd: f64,
    pub counts: DetectionCounts,
}

/// Points in sweep order (descending threshold).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// `P_d` and `F_a` never decrease along the sweep.
    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].pd >= w[0].pd && w[1].fa >= w[0].fa)
    }

    /// Trapezoidal area under `P_d(F_a)` over the swept range.
    pub fn auc(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.fa, p.pd)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fa,pd\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.fa, p.pd));
        }
        s
    }
}

/// ROC over a descending threshold sweep.
pub fn roc(
    target_images: &[Tensor<f64>],
    annotations: &[Vec<TargetAnnotation>],
    tau: f64,
    sweep: &[f64],
    min_area: usize,
) -> Result<RocCurve> {
    if sweep.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("roc", "thresholds must be strictly descending"));
    }
    let mut points = Vec::with_capacity(sweep.len());
    for &threshold in sweep {
        let counts = detection_counts(target_images, annotations, tau, threshold, min_area)?;
        points.push(RocPoint {
            threshold,
            fa: counts.fa(),
            pd: counts.pd(),
            counts,
        });
    }
    Ok(RocCurve { points })
}

/// `n` evenly spaced thresholds from the largest to the smallest strictly positive response.
pub fn default_sweep(target_images: &[Tensor<f64>], n: usize) -> Vec<f64> {
    let vals = target_images.iter().flat_map(|t| t.data().iter().copied()).filter(|v| *v > 0.0);
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || n == 0 {
        return Vec::new();
    }
    if n == 1 || lo == hi {
        return vec![hi];
    }
    (0..n).map(|i| hi - (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(img: &mut Tensor<f64>, y: usize, x: usize, v: f64) {
        for dy in 0..3 {
            for dx in 0..3 {
                img.set(&[0, 0, y + dy - 1, x + dx - 1], v);
            }
        }
    }

    #[test]
    fn greedy_nearest_first() {
        let c = |x, y| Candidate { x, y, score: 1.0, area: 1 };
        let truth = [TargetAnnotation::new(0.0, 0.0, 1.0, 1.0), TargetAnnotation::new(3.0, 0.0, 1.0, 1.0)];
        // The nearer candidate claims the first target so the second one falls back to the other.
        assert_eq!(match_targets(&[c(1.0, 0.0), c(0.5, 0.0)], &truth, 10.0), 2);
        assert_eq!(match_targets(&[c(1.0, 0.0)], &truth, 1.0), 0);
        assert_eq!(match_targets(&[c(0.5, 0.0), c(0.6, 0.0)], &truth[..1], 10.0), 1);
    }

    #[test]
    fn perfect_and_empty() {
        let mut img = Tensor::<f64>::zeros(&[1, 1, 20, 20]);
        blob(&mut img, 10, 10, 5.0);
        let truth = vec![vec![TargetAnnotation::new(10.0, 10.0, 3.0, 3.0)]];
        let r = roc(&[img.clone()], &truth, 3.0, &[4.0, 2.0, 1.0], 1).unwrap();
        assert!(r.points.iter().all(|p| p.pd == 1.0 && p.fa == 0.0));
        let r = roc(&[img], &truth, 3.0, &[6.0], 1).unwrap();
        assert_eq!((r.points[0].pd, r.points[0].fa), (0.0, 0.0));
        assert!(roc(&[], &truth, 3.0, &[1.0], 1).is_err());
    }

    #[test]
    fn csv_and_sweep() {
        let mut img = Tensor::<f64>::zeros(&[1, 1, 8, 8]);
        img.set(&[0, 0, 1, 1], 4.0);
        img.set(&[0, 0, 5, 5], 1.0);
        assert_eq!(default_sweep(&[img.clone()], 4), vec![4.0, 3.0, 2.0, 1.0]);
        let r = roc(&[img], &[vec![]], 3.0, &[2.0], 1).unwrap();
        assert_eq!(r.to_csv(), "threshold,fa,pd\n2,0.015625,0\n");
        assert!(roc(&[], &[], 3.0, &[1.0, 2.0], 1).is_err());
    }
}
