//! Seeded synthetic infrared clips: smooth background, static clutter, noise and one moving
//! small target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::sequence::{FrameSequence, TargetAnnotation};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetShape {
    Square,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetModel {
    pub shape: TargetShape,
    /// Side length (square) or full width at half maximum (Gaussian), in pixels.
    pub size: usize,
    pub peak: f64,
    /// Centre in frame 0.
    pub y: f64,
    pub x: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Background {
    pub level: f64,
    /// Intensity change across the full image height / width.
    pub gradient_y: f64,
    pub gradient_x: f64,
    /// Number of static Gaussian clutter blobs.
    pub clutter: usize,
    pub clutter_amplitude: f64,
    pub clutter_sigma: f64,
    pub noise_sigma: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Motion {
    pub dy: f64,
    pub dx: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    #[serde(default)]
    pub background: Background,
    pub target: TargetModel,
    #[serde(default)]
    pub motion: Motion,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    /// Named scenarios: `moving-square` (3×3 target, 7 frames, consistent random motion), `point-shift`
    /// (1×1 target, two frames one step apart) and `clutter` (target among clutter).
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut direction = || loop {
            let d = (rng.random_range(-1i32..=1), rng.random_range(-1i32..=1));
            if d != (0, 0) {
                return Motion {
                    dy: d.0 as f64,
                    dx: d.1 as f64,
                };
            }
        };
        let target = |size, peak, c: f64| TargetModel {
            shape: TargetShape::Square,
            size,
            peak,
            y: c,
            x: c,
        };
        let spec = match name {
            "moving-square" => Self {
                height: 64,
                width: 64,
                frames: 7,
                background: Background {
                    level: 0.2,
                    gradient_y: 0.1,
                    noise_sigma: 0.01,
                    ..Default::default()
                },
                target: target(3, 0.6, 32.0),
                motion: direction(),
                seed,
            },
            "point-shift" => Self {
                height: 32,
                width: 32,
                frames: 2,
                background: Background {
                    level: 0.1,
                    ..Default::default()
                },
                target: target(1, 0.8, 16.0),
                motion: direction(),
                seed,
            },
            "clutter" => Self {
                height: 64,
                width: 64,
                frames: 7,
                background: Background {
                    level: 0.2,
                    clutter: 6,
                    clutter_amplitude: 0.25,
                    clutter_sigma: 4.0,
                    noise_sigma: 0.01,
                    ..Default::default()
                },
                target: target(3, 0.6, 32.0),
                motion: direction(),
                seed,
            },
            other => {
                return Err(Error::invalid(
                    "synth",
                    format!("unknown preset {other:?} (expected moving-square, point-shift or clutter)"),
                ))
            }
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::invalid("synth", "image size and frame count must be positive"));
        }
        if !(self.background.noise_sigma >= 0.0) || !(self.background.clutter_sigma >= 0.0) {
            return Err(Error::invalid("synth", "sigmas must be non-negative"));
        }
        if self.target.size == 0 {
            return Err(Error::invalid("synth", "target size must be >= 1"));
        }
        if self.background.clutter > 0 && self.background.clutter_sigma <= 0.0 {
            return Err(Error::invalid("synth", "clutter needs a positive sigma"));
        }
        let r = self.target_radius();
        for t in 0..self.frames {
            let (y, x) = self.centre(t);
            let inside = |c: f64, n: usize| c - r >= 0.0 && c + r <= (n - 1) as f64;
            if !inside(y, self.height) || !inside(x, self.width) {
                return Err(Error::TargetOutOfBounds {
                    frame: t,
                    y,
                    x,
                    height: self.height,
                    width: self.width,
                });
            }
        }
        Ok(())
    }

    /// Target centre `(y, x)` in frame `t`.
    pub fn centre(&self, t: usize) -> (f64, f64) {
        (
            self.target.y + t as f64 * self.motion.dy,
            self.target.x + t as f64 * self.motion.dx,
        )
    }

    fn gaussian_sigma(&self) -> f64 {
        self.target.size as f64 / (8.0 * std::f64::consts::LN_2).sqrt()
    }

    /// Half-extent of the rendered footprint.
    fn target_radius(&self) -> f64 {
        match self.target.shape {
            TargetShape::Square => (self.target.size as f64 - 1.0) / 2.0,
            TargetShape::Gaussian => (3.0 * self.gaussian_sigma()).ceil(),
        }
    }

    /// Profile samples `(dy, dx, value)` relative to the centre.
    fn profile(&self) -> Vec<(f64, f64, f64)> {
        let p = self.target.peak;
        match self.target.shape {
            TargetShape::Square => {
                let s = self.target.size;
                let half = (s as f64 - 1.0) / 2.0;
                (0..s)
                    .flat_map(|i| (0..s).map(move |j| (i as f64 - half, j as f64 - half, p)))
                    .collect()
            }
            TargetShape::Gaussian => {
                let sigma = self.gaussian_sigma();
                let r = self.target_radius() as i64;
                (-r..=r)
                    .flat_map(|i| {
                        (-r..=r).map(move |j| {
                            let d2 = (i * i + j * j) as f64;
                            (i as f64, j as f64, p * (-d2 / (2.0 * sigma * sigma)).exp())
                        })
                    })
                    .collect()
            }
        }
    }
}

/// Adds `v` at fractional `(y, x)` by bilinear splatting; out-of-frame shares are dropped.
fn splat(img: &mut [f64], h: usize, w: usize, y: f64, x: f64, v: f64) {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
            let (yy, xx) = (y0 as i64 + dy, x0 as i64 + dx);
            let wgt = wy * wx;
            if wgt != 0.0 && yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                img[yy as usize * w + xx as usize] += wgt * v;
            }
        }
    }
}

/// Renders the clip. Pixel values are clamped to `[0, 1]`; annotations carry the exact centres.
pub fn synth_sequence(spec: &SynthSpec) -> Result<FrameSequence> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let bg = &spec.background;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut base = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            base[y * w + x] = bg.level
                + bg.gradient_y * y as f64 / h as f64
                + bg.gradient_x * x as f64 / w as f64;
        }
    }
    for _ in 0..bg.clutter {
        let cy = rng.random_range(0.0..h as f64);
        let cx = rng.random_range(0.0..w as f64);
        let amp = bg.clutter_amplitude * rng.random_range(0.5..1.0);
        let s2 = 2.0 * bg.clutter_sigma * bg.clutter_sigma;
        for y in 0..h {
            for x in 0..w {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                base[y * w + x] += amp * (-d2 / s2).exp();
            }
        }
    }

    let noise = Normal::new(0.0, bg.noise_sigma).map_err(|e| Error::invalid("synth", e.to_string()))?;
    let profile = spec.profile();
    let (a, b) = (spec.target.size as f64, spec.target.size as f64);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut annotations = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let (cy, cx) = spec.centre(t);
        let mut img = base.clone();
        for &(dy, dx, v) in &profile {
            splat(&mut img, h, w, cy + dy, cx + dx, v);
        }
        if bg.noise_sigma > 0.0 {
            img.iter_mut().for_each(|p| *p += noise.sample(&mut rng));
        }
        img.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
        frames.push(Tensor::image(h, w, img)?);
        annotations.push(vec![TargetAnnotation::new(cx, cy, a, b)]);
    }
    FrameSequence::new(frames)?.with_annotations(annotations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(motion: Motion, noise: f64) -> SynthSpec {
        SynthSpec {
            height: 24,
            width: 24,
            frames: 5,
            background: Background {
                level: 0.1,
                noise_sigma: noise,
                ..Default::default()
            },
            target: TargetModel {
                shape: TargetShape::Square,
                size: 3,
                peak: 0.5,
                y: 6.0,
                x: 7.0,
            },
            motion,
            seed: 3,
        }
    }

    #[test]
    fn static_noiseless_frames_identical() {
        let seq = synth_sequence(&plain(Motion::default(), 0.0)).unwrap();
        assert!(seq.frames().windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn centroids_follow_motion() {
        let seq = synth_sequence(&plain(Motion { dy: 1.0, dx: 1.0 }, 0.0)).unwrap();
        let ann = seq.annotations().unwrap();
        for (t, a) in ann.iter().enumerate() {
            assert_eq!((a[0].x, a[0].y), (7.0 + t as f64, 6.0 + t as f64));
        }
    }

    #[test]
    fn fractional_shift_keeps_mass_and_centroid() {
        let seq = synth_sequence(&plain(Motion { dy: 0.25, dx: 0.5 }, 0.0)).unwrap();
        for (t, f) in seq.frames().iter().enumerate() {
            let (mut m, mut my, mut mx) = (0.0, 0.0, 0.0);
            for y in 0..24 {
                for x in 0..24 {
                    let v = f.at(0, 0, y, x) - 0.1;
                    m += v;
                    my += v * y as f64;
                    mx += v * x as f64;
                }
            }
            assert!((m - 4.5).abs() < 1e-12);
            assert!((my / m - (6.0 + 0.25 * t as f64)).abs() < 1e-12);
            assert!((mx / m - (7.0 + 0.5 * t as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_bounds_rejected() {
        let mut spec = plain(Motion { dy: 5.0, dx: 0.0 }, 0.0);
        assert!(matches!(
            synth_sequence(&spec),
            Err(Error::TargetOutOfBounds { frame: 4, .. })
        ));
        spec.motion = Motion::default();
        spec.target.x = 0.5;
        assert!(synth_sequence(&spec).is_err());
    }

    #[test]
    fn seeded_and_presets() {
        let s = SynthSpec::preset("clutter", 11).unwrap();
        assert_eq!(synth_sequence(&s).unwrap(), synth_sequence(&s).unwrap());
        assert_eq!(SynthSpec::preset("moving-square", 1).unwrap().frames, 7);
        let pair = SynthSpec::preset("point-shift", 1).unwrap();
        assert_eq!((pair.frames, pair.target.size), (2, 1));
        assert!(SynthSpec::preset("nonexistent", 1).is_err());
    }

    #[test]
    fn gaussian_target_peaks_at_centre() {
        let mut spec = plain(Motion::default(), 0.0);
        spec.target.shape = TargetShape::Gaussian;
        spec.target.size = 3;
        spec.target.y = 10.0;
        spec.target.x = 10.0;
        let f = synth_sequence(&spec).unwrap();
        assert_eq!(f.frame(0).argmax(), 10 * 24 + 10);
    }
}
