use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Ground-truth target: centroid `(x, y)` in pixel units (x = column) and extent `a × b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetAnnotation {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub b: f64,
}

impl TargetAnnotation {
    pub fn new(x: f64, y: f64, a: f64, b: f64) -> Self {
        Self { x, y, a, b }
    }

    /// Centroid and extent divided by `s`.
    pub fn scaled_down(&self, s: f64) -> Self {
        Self::new(self.x / s, self.y / s, self.a / s, self.b / s)
    }

    pub fn scaled_up(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.a * s, self.b * s)
    }

    pub fn in_bounds(&self, height: usize, width: usize) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x <= (width - 1) as f64 && self.y <= (height - 1) as f64
    }
}

/// Equally sized single-channel frames in `[0, 1]`, each `[1, 1, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Tensor<f64>>,
    annotations: Option<Vec<Vec<TargetAnnotation>>>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Tensor<f64>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::invalid("sequence", "no frames"));
        };
        let (b, c, h, w) = first.dims4()?;
        if b != 1 || c != 1 {
            return Err(Error::shape("sequence", &[1, 1, h, w], first.shape()));
        }
        for f in &frames[1..] {
            if f.shape() != first.shape() {
                return Err(Error::shape("sequence", first.shape(), f.shape()));
            }
        }
        Ok(Self {
            frames,
            annotations: None,
        })
    }

    pub fn with_annotations(mut self, annotations: Vec<Vec<TargetAnnotation>>) -> Result<Self> {
        if annotations.len() != self.frames.len() {
            return Err(Error::invalid(
                "sequence",
                format!("{} annotation lists for {} frames", annotations.len(), self.frames.len()),
            ));
        }
        let (h, w) = self.size();
        for (i, list) in annotations.iter().enumerate() {
            if let Some(a) = list.iter().find(|a| !a.in_bounds(h, w)) {
                return Err(Error::TargetOutOfBounds {
                    frame: i,
                    y: a.y,
                    x: a.x,
                    height: h,
                    width: w,
                });
            }
        }
        self.annotations = Some(annotations);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(height, width)`.
    pub fn size(&self) -> (usize, usize) {
        self.frames[0].hw()
    }

    pub fn frames(&self) -> &[Tensor<f64>] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Tensor<f64> {
        &self.frames[i]
    }

    pub fn annotations(&self) -> Option<&[Vec<TargetAnnotation>]> {
        self.annotations.as_deref()
    }

    pub fn into_frames(self) -> Vec<Tensor<f64>> {
        self.frames
    }
}
