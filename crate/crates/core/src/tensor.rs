//! Frame and latent containers.
//!
//! Both are time-major 4-D arrays (`frames x channels x height x width`).
//! [`Video`] holds display-referred RGB samples in `[0, 1]`; [`LatentVideo`]
//! holds unbounded latent values and carries an optional diffusion step tag.

use ndarray::{Array3, Array4, ArrayView3, Axis};

use crate::error::{ensure_same_shape, Error, Result};

/// An RGB frame sequence with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    frames: Array4<f32>,
    pub frame_rate: Option<f64>,
    pub source_paths: Vec<String>,
}

impl Video {
    /// Wraps `frames` (`T x 3 x H x W`) after checking every invariant.
    pub fn new(frames: Array4<f32>) -> Result<Self> {
        let (t, c, h, w) = frames.dim();
        if t == 0 {
            return Err(Error::EmptySequence);
        }
        if c != 3 || h == 0 || w == 0 {
            return Err(Error::invalid(format!(
                "video must be T x 3 x H x W with H, W > 0, got {:?}",
                frames.shape()
            )));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "video" });
        }
        if frames.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::OutOfRange { what: "video" });
        }
        Ok(Video {
            frames,
            frame_rate: None,
            source_paths: Vec::new(),
        })
    }

    /// Like [`Video::new`] but clamps samples into `[0, 1]` instead of
    /// rejecting them. Non-finite samples are still an error.
    pub fn from_clamped(mut frames: Array4<f32>) -> Result<Self> {
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "video" });
        }
        frames.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Video::new(frames)
    }

    pub fn constant(t: usize, h: usize, w: usize, value: f32) -> Result<Self> {
        Video::new(Array4::from_elem((t, 3, h, w), value))
    }

    pub fn frames(&self) -> &Array4<f32> {
        &self.frames
    }

    pub fn into_frames(self) -> Array4<f32> {
        self.frames
    }

    pub fn frame(&self, i: usize) -> ArrayView3<'_, f32> {
        self.frames.index_axis(Axis(0), i)
    }

    pub fn len(&self) -> usize {
        self.frames.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn height(&self) -> usize {
        self.frames.dim().2
    }

    pub fn width(&self) -> usize {
        self.frames.dim().3
    }

    pub fn shape(&self) -> [usize; 4] {
        let (t, c, h, w) = self.frames.dim();
        [t, c, h, w]
    }

    pub(crate) fn with_metadata_of(mut self, other: &Video) -> Self {
        self.frame_rate = other.frame_rate;
        self
    }
}

/// Latent feature video: `T x C x H x W`, unbounded but finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVideo {
    data: Array4<f64>,
    pub step_tag: Option<usize>,
}

impl LatentVideo {
    pub fn new(data: Array4<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "latent" });
        }
        Ok(LatentVideo {
            data,
            step_tag: None,
        })
    }

    pub(crate) fn from_finite(data: Array4<f64>) -> Self {
        debug_assert!(data.iter().all(|v| v.is_finite()));
        LatentVideo {
            data,
            step_tag: None,
        }
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        LatentVideo::from_finite(Array4::zeros(shape))
    }

    pub fn constant(shape: [usize; 4], value: f64) -> Result<Self> {
        LatentVideo::new(Array4::from_elem(shape, value))
    }

    pub fn data(&self) -> &Array4<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array4<f64> {
        self.data
    }

    pub fn frame(&self, i: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(Axis(0), i)
    }

    pub fn shape(&self) -> [usize; 4] {
        let (t, c, h, w) = self.data.dim();
        [t, c, h, w]
    }

    pub fn frames(&self) -> usize {
        self.data.dim().0
    }

    pub fn channels(&self) -> usize {
        self.data.dim().1
    }

    pub fn height(&self) -> usize {
        self.data.dim().2
    }

    pub fn width(&self) -> usize {
        self.data.dim().3
    }

    pub fn with_step(mut self, t: usize) -> Self {
        self.step_tag = Some(t);
        self
    }

    /// Elementwise combination of two equally shaped latents.
    pub(crate) fn zip_map(
        &self,
        other: &LatentVideo,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<LatentVideo> {
        ensure_same_shape(op, &self.shape(), &other.shape())?;
        let mut out = self.data.clone();
        out.zip_mut_with(&other.data, |a, &b| *a = f(*a, b));
        finite(out, op)
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &LatentVideo) -> Result<f64> {
        ensure_same_shape("max_abs_diff", &self.shape(), &other.shape())?;
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    /// Stacks per-frame `C x H x W` arrays.
    pub fn from_frames(frames: &[Array3<f64>]) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptySequence)?;
        let (c, h, w) = first.dim();
        let mut data = Array4::zeros((frames.len(), c, h, w));
        for (i, f) in frames.iter().enumerate() {
            ensure_same_shape("from_frames", &[c, h, w], f.shape())?;
            data.index_axis_mut(Axis(0), i).assign(f);
        }
        LatentVideo::new(data)
    }
}

fn finite(data: Array4<f64>, op: &'static str) -> Result<LatentVideo> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: op });
    }
    Ok(LatentVideo {
        data,
        step_tag: None,
    })
}
