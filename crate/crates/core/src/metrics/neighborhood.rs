//! Local-neighbourhood target statistics and the detection gain ratios.

use serde::{Deserialize, Serialize};

use crate::data::TargetAnnotation;
use crate::detectors::Resolution;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Denominator guard of every ratio metric.
pub const METRIC_EPS: f64 = 1e-10;

/// Target box `a × b` (a along x) surrounded by a background ring of margin `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodSpec {
    pub a: usize,
    pub b: usize,
    pub d: usize,
}

impl NeighborhoodSpec {
    pub fn new(a: usize, b: usize, d: usize) -> Result<Self> {
        let s = Self { a, b, d };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a == 0 || self.b == 0 || self.d == 0 {
            return Err(Error::invalid("neighborhood", "a, b and d must all be >= 1"));
        }
        Ok(())
    }

    /// The three standard neighbourhood sizes of each resolution class, small to large.
    pub fn presets(res: Resolution) -> [Self; 3] {
        let t = |a, d| Self { a, b: a, d };
        match res {
            Resolution::Hr => [t(7, 30), t(11, 50), t(21, 100)],
            Resolution::Sr4x => [t(29, 120), t(45, 200), t(85, 400)],
            Resolution::Lr => [t(3, 10), t(3, 10), t(5, 20)],
        }
    }
}

/// Default matching distance `τ` in pixels per resolution class.
pub fn default_tau(res: Resolution) -> f64 {
    match res {
        Resolution::Hr => 10.0,
        Resolution::Sr4x => 40.0,
        Resolution::Lr => 3.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodStats {
    pub p_t: f64,
    pub p_b: f64,
    pub mu_t: f64,
    pub mu_b: f64,
    /// Population standard deviation of the background ring.
    pub sigma_b: f64,
    pub n_target: usize,
    pub n_background: usize,
    /// Some part of the neighbourhood fell outside the image and was dropped.
    pub clamped: bool,
}

/// Half-open box `[y0, y1) × [x0, x1)` in signed image coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Boxed {
    pub y0: i64,
    pub y1: i64,
    pub x0: i64,
    pub x1: i64,
}

impl Boxed {
    fn contains(&self, y: i64, x: i64) -> bool {
        y >= self.y0 && y < self.y1 && x >= self.x0 && x < self.x1
    }
}

/// Target box centred on the rounded centroid; even extents extend one pixel further down/right.
pub(crate) fn target_box(ann: &TargetAnnotation, spec: &NeighborhoodSpec) -> Boxed {
    let cx = ann.x.round() as i64;
    let cy = ann.y.round() as i64;
    let x0 = cx - (spec.a as i64 - 1) / 2;
    let y0 = cy - (spec.b as i64 - 1) / 2;
    Boxed {
        y0,
        y1: y0 + spec.b as i64,
        x0,
        x1: x0 + spec.a as i64,
    }
}

pub fn neighborhood_stats(img: &Tensor<f64>, ann: &TargetAnnotation, spec: &NeighborhoodSpec) -> Result<NeighborhoodStats> {
    spec.validate()?;
    let (h, w) = img.hw();
    if !ann.in_bounds(h, w) {
        return Err(Error::invalid(
            "neighborhood",
            format!("annotation (x={}, y={}) lies outside the {h}x{w} image", ann.x, ann.y),
        ));
    }
    let tbox = target_box(ann, spec);
    let d = spec.d as i64;
    let outer = Boxed {
        y0: tbox.y0 - d,
        y1: tbox.y1 + d,
        x0: tbox.x0 - d,
        x1: tbox.x1 + d,
    };
    let clamped = outer.y0 < 0 || outer.x0 < 0 || outer.y1 > h as i64 || outer.x1 > w as i64;
    let px = img.data();
    let (mut t_sum, mut t_max, mut n_t) = (0.0, f64::NEG_INFINITY, 0usize);
    let mut bg = Vec::new();
    for y in outer.y0.max(0)..outer.y1.min(h as i64) {
        for x in outer.x0.max(0)..outer.x1.min(w as i64) {
            let v = px[y as usize * w + x as usize];
            if tbox.contains(y, x) {
                t_sum += v;
                t_max = t_max.max(v);
                n_t += 1;
            } else {
                bg.push(v);
            }
        }
    }
    if bg.is_empty() {
        return Err(Error::invalid("neighborhood", "background ring lies entirely outside the image"));
    }
    let n_b = bg.len() as f64;
    let mu_b = bg.iter().sum::<f64>() / n_b;
    let var = bg.iter().map(|v| (v - mu_b).powi(2)).sum::<f64>() / n_b;
    Ok(NeighborhoodStats {
        p_t: t_max,
        p_b: bg.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mu_t: t_sum / n_t as f64,
        mu_b,
        sigma_b: var.sqrt(),
        n_target: n_t,
        n_background: bg.len(),
        clamped,
    })
}

/// `P_t / (P_b + ε)`.
pub fn local_snr(s: &NeighborhoodStats) -> f64 {
    s.p_t / (s.p_b + METRIC_EPS)
}

/// `|μ_t − μ_b|`.
pub fn local_cr(s: &NeighborhoodStats) -> f64 {
    (s.mu_t - s.mu_b).abs()
}

/// `|μ_t − μ_b| / (σ_b + ε)`.
pub fn local_scr(s: &NeighborhoodStats) -> f64 {
    local_cr(s) / (s.sigma_b + METRIC_EPS)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionGains {
    pub snrg: f64,
    pub bsf: f64,
    pub scrg: f64,
    pub cg: f64,
}

impl DetectionGains {
    pub fn from_stats(input: &NeighborhoodStats, output: &NeighborhoodStats) -> Self {
        Self {
            snrg: local_snr(output) / (local_snr(input) + METRIC_EPS),
            bsf: input.sigma_b / (output.sigma_b + METRIC_EPS),
            scrg: local_scr(output) / (local_scr(input) + METRIC_EPS),
            cg: local_cr(output) / (local_cr(input) + METRIC_EPS),
        }
    }
}

/// Gains of a detection output measured against the low-resolution input frame.
pub fn detection_gains(
    lr_img: &Tensor<f64>,
    lr_ann: &TargetAnnotation,
    lr_spec: &NeighborhoodSpec,
    target_img: &Tensor<f64>,
    hr_ann: &TargetAnnotation,
    hr_spec: &NeighborhoodSpec,
) -> Result<DetectionGains> {
    let input = neighborhood_stats(lr_img, lr_ann, lr_spec)?;
    let output = neighborhood_stats(target_img, hr_ann, hr_spec)?;
    Ok(DetectionGains::from_stats(&input, &output))
}
