//! Wavelet color correction.
//!
//! The low band of a frame is its `levels`-fold Haar approximation copied
//! back to full size; correction keeps the output's high band and takes the
//! low band from the reference.

use ndarray::{Array2, Array3, Array4, ArrayView2, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::resample::resize_stack;
use crate::tensor::Video;

pub const DEFAULT_LEVELS: usize = 5;

/// One Haar approximation level: mean of each 2x2 block. Odd trailing
/// rows or columns average over the samples they have.
fn haar_down(src: ArrayView2<'_, f64>) -> Array2<f64> {
    let (h, w) = src.dim();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    Array2::from_shape_fn((oh, ow), |(y, x)| {
        let ys = 2 * y..(2 * y + 2).min(h);
        let xs = 2 * x..(2 * x + 2).min(w);
        let n = (ys.len() * xs.len()) as f64;
        let mut sum = 0.0;
        for yy in ys {
            for xx in xs.clone() {
                sum += src[[yy, xx]];
            }
        }
        sum / n
    })
}

fn check_levels(h: usize, w: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(Error::invalid("wavelet levels must be >= 1"));
    }
    let side = 1usize.checked_shl(levels as u32).filter(|&s| s <= h && s <= w);
    if side.is_none() {
        return Err(Error::invalid(format!(
            "{levels} wavelet levels need frames of at least 2^{levels} pixels per side, got {h}x{w}"
        )));
    }
    Ok(())
}

fn low_plane(src: ArrayView2<'_, f64>, levels: usize) -> Array2<f64> {
    let mut coarse = src.to_owned();
    for _ in 0..levels {
        coarse = haar_down(coarse.view());
    }
    let (h, w) = src.dim();
    Array2::from_shape_fn((h, w), |(y, x)| coarse[[y >> levels, x >> levels]])
}

/// Splits a `C x H x W` image into its low band and the residual high band.
pub fn wavelet_split(image: ArrayView3<'_, f64>, levels: usize) -> Result<(Array3<f64>, Array3<f64>)> {
    let (c, h, w) = image.dim();
    check_levels(h, w, levels)?;
    let mut low = Array3::zeros((c, h, w));
    for ch in 0..c {
        low.index_axis_mut(Axis(0), ch)
            .assign(&low_plane(image.index_axis(Axis(0), ch), levels));
    }
    let high = &image - &low;
    Ok((low, high))
}

/// Replaces the low band of every output frame with the reference's.
///
/// A reference of different spatial size is bicubic-resized first.
pub fn color_correct(output: &Video, reference: &Video, levels: usize) -> Result<Video> {
    if output.len() != reference.len() {
        return Err(Error::ShapeMismatch {
            op: "color_correct",
            left: output.shape().to_vec(),
            right: reference.shape().to_vec(),
        });
    }
    let (h, w) = (output.height(), output.width());
    check_levels(h, w, levels)?;
    let mut out = Array4::<f32>::zeros((output.len(), 3, h, w));
    for t in 0..output.len() {
        let o = output.frame(t).mapv(f64::from);
        let mut r = reference.frame(t).mapv(f64::from);
        if r.dim() != o.dim() {
            r = resize_stack(r.view(), h, w);
        }
        let (_, high) = wavelet_split(o.view(), levels)?;
        let (low, _) = wavelet_split(r.view(), levels)?;
        let fixed = (low + high).mapv(|v| v.clamp(0.0, 1.0) as f32);
        out.index_axis_mut(Axis(0), t).assign(&fixed);
    }
    Ok(Video::new(out)?.with_metadata_of(output))
}
