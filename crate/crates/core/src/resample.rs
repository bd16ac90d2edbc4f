//! Separable bicubic resampling and Gaussian blur on `f64` planes.
//!
//! Both filters accumulate `anchor + sum w_j (src_j - anchor)` rather than
//! `sum w_j src_j`, so a constant input reproduces its value exactly.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};

use crate::error::{Error, Result};

/// Keys cubic convolution kernel with `a = -0.5`.
fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// One output sample's taps: anchor index, first tap index, normalized weights.
#[derive(Debug, Clone)]
struct Taps {
    anchor: usize,
    start: usize,
    weights: Vec<f64>,
}

/// Bicubic taps mapping `n_in` samples onto `n_out`, widened when shrinking
/// so the kernel also acts as an anti-aliasing filter.
fn cubic_taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    let scale = n_in as f64 / n_out as f64;
    let fs = scale.max(1.0);
    let support = 2.0 * fs;
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = ((center - support - 0.5).ceil().max(0.0)) as usize;
            let hi = ((center + support - 0.5).floor() as isize).min(n_in as isize - 1).max(lo as isize) as usize;
            let mut weights: Vec<f64> = (lo..=hi)
                .map(|j| cubic((j as f64 + 0.5 - center) / fs))
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Taps {
                anchor: (center.floor() as usize).min(n_in - 1),
                start: lo,
                weights,
            }
        })
        .collect()
}

fn gaussian_taps(n: usize, sigma: f64) -> Vec<Taps> {
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.into_iter().map(|k| k / total).collect();
    (0..n)
        .map(|i| Taps {
            anchor: i,
            start: 0,
            weights: kernel.clone(),
        })
        .collect()
}

/// Applies per-output taps along one axis; Gaussian taps index with edge replication.
fn apply_axis(src: ArrayView2<'_, f64>, taps: &[Taps], along_rows: bool, replicate_radius: Option<isize>) -> Array2<f64> {
    let (h, w) = src.dim();
    let (out_h, out_w) = if along_rows { (taps.len(), w) } else { (h, taps.len()) };
    let mut out = Array2::zeros((out_h, out_w));
    let n_in = if along_rows { h } else { w } as isize;
    for oy in 0..out_h {
        for ox in 0..out_w {
            let (i, fixed) = if along_rows { (oy, ox) } else { (ox, oy) };
            let t = &taps[i];
            let get = |j: usize| if along_rows { src[[j, fixed]] } else { src[[fixed, j]] };
            let anchor = get(t.anchor);
            let mut acc = 0.0;
            for (k, &wk) in t.weights.iter().enumerate() {
                let j = match replicate_radius {
                    Some(r) => (i as isize + k as isize - r).clamp(0, n_in - 1) as usize,
                    None => t.start + k,
                };
                acc += wk * (get(j) - anchor);
            }
            out[[oy, ox]] = anchor + acc;
        }
    }
    out
}

/// Bicubic resize of one plane to `out_h x out_w`.
pub fn resize_plane(src: ArrayView2<'_, f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (h, w) = src.dim();
    let tmp = if out_w == w {
        src.to_owned()
    } else {
        apply_axis(src, &cubic_taps(w, out_w), false, None)
    };
    if out_h == h {
        tmp
    } else {
        apply_axis(tmp.view(), &cubic_taps(h, out_h), true, None)
    }
}

/// Bicubic resize of every channel of a `C x H x W` stack.
pub fn resize_stack(src: ArrayView3<'_, f64>, out_h: usize, out_w: usize) -> Array3<f64> {
    let c = src.dim().0;
    let mut out = Array3::zeros((c, out_h, out_w));
    for ch in 0..c {
        out.index_axis_mut(Axis(0), ch)
            .assign(&resize_plane(src.index_axis(Axis(0), ch), out_h, out_w));
    }
    out
}

/// Gaussian blur truncated at `3 sigma` with a normalized kernel and
/// replicated edges. `sigma = 0` returns the input unchanged.
pub fn gaussian_blur_plane(src: ArrayView2<'_, f64>, sigma: f64) -> Result<Array2<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("blur sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(src.to_owned());
    }
    let (h, w) = src.dim();
    let r = Some((3.0 * sigma).ceil() as isize);
    let tmp = apply_axis(src, &gaussian_taps(w, sigma), false, r);
    Ok(apply_axis(tmp.view(), &gaussian_taps(h, sigma), true, r))
}

/// Converts a `[0, 1]` video frame to `f64`.
pub(crate) fn widen(frame: ArrayView3<'_, f32>) -> Array3<f64> {
    frame.mapv(|v| v as f64)
}
