//! PSNR, SSIM, flow warping error and temporal profiles.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_shape, Error, Result};
use crate::flow::{warp_mask, warp_nearest, FlowPair};
use crate::propagate::check_flow_count;
use crate::tensor::Video;

/// Reported PSNR for identical inputs.
pub const PSNR_CAP: f64 = 100.0;
/// Warping error is reported in units of 1e-3.
pub const WARP_ERROR_SCALE: f64 = 1e3;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    /// Absent when no flows were supplied.
    pub e_warp: Option<f64>,
    pub per_frame: PerFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerFrame {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    /// One entry per adjacent pair; `None` where the mask was empty.
    pub e_warp: Option<Vec<Option<f64>>>,
}

fn mse_to_psnr(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

fn frame_mse(a: ArrayView3<'_, f32>, b: ArrayView3<'_, f32>) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    sum / a.len() as f64
}

/// `10 log10(1 / MSE)` over every sample, capped at [`PSNR_CAP`].
pub fn psnr(a: &Video, b: &Video) -> Result<f64> {
    ensure_same_shape("psnr", &a.shape(), &b.shape())?;
    let mse = (0..a.len()).map(|t| frame_mse(a.frame(t), b.frame(t))).sum::<f64>() / a.len() as f64;
    Ok(mse_to_psnr(mse))
}

pub fn psnr_per_frame(a: &Video, b: &Video) -> Result<Vec<f64>> {
    ensure_same_shape("psnr", &a.shape(), &b.shape())?;
    Ok((0..a.len()).map(|t| mse_to_psnr(frame_mse(a.frame(t), b.frame(t)))).collect())
}

fn luma(frame: ArrayView3<'_, f32>) -> Array2<f64> {
    let (_, h, w) = frame.dim();
    Array2::from_shape_fn((h, w), |(y, x)| {
        0.299 * frame[[0, y, x]] as f64 + 0.587 * frame[[1, y, x]] as f64 + 0.114 * frame[[2, y, x]] as f64
    })
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let k: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" filtering with the SSIM window.
fn filter_valid(src: ArrayView2<'_, f64>, k: &[f64]) -> Array2<f64> {
    let (h, w) = src.dim();
    let n = k.len();
    let rows: Array2<f64> = Array2::from_shape_fn((h, w - n + 1), |(y, x)| (0..n).map(|i| k[i] * src[[y, x + i]]).sum());
    Array2::from_shape_fn((h - n + 1, w - n + 1), |(y, x)| (0..n).map(|i| k[i] * rows[[y + i, x]]).sum::<f64>())
}

fn ssim_plane(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    if a == b {
        return 1.0;
    }
    let k = gaussian_window();
    let mu_a = filter_valid(a, &k);
    let mu_b = filter_valid(b, &k);
    let aa = filter_valid((&a * &a).view(), &k);
    let bb = filter_valid((&b * &b).view(), &k);
    let ab = filter_valid((&a * &b).view(), &k);
    let mut total = 0.0;
    for (((&ma, &mb), (&saa, &sbb)), &sab) in mu_a.iter().zip(mu_b.iter()).zip(aa.iter().zip(bb.iter())).zip(ab.iter()) {
        let var_a = saa - ma * ma;
        let var_b = sbb - mb * mb;
        let cov = sab - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2));
    }
    total / mu_a.len() as f64
}

pub fn ssim_per_frame(a: &Video, b: &Video) -> Result<Vec<f64>> {
    ensure_same_shape("ssim", &a.shape(), &b.shape())?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::TooSmall {
            what: "ssim",
            h,
            w,
            min: SSIM_WINDOW,
        });
    }
    Ok((0..a.len())
        .map(|t| ssim_plane(luma(a.frame(t)).view(), luma(b.frame(t)).view()))
        .collect())
}

/// Mean single-scale SSIM of the luma channel over all frames.
pub fn ssim(a: &Video, b: &Video) -> Result<f64> {
    let per = ssim_per_frame(a, b)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Per-pair masked mean L1 between frame `i` and frame `i - 1` warped onto
/// it, scaled by 1e3. `None` where the validity mask is empty.
pub fn warping_error_per_pair(video: &Video, flows: &[FlowPair], delta: f64) -> Result<Vec<Option<f64>>> {
    check_flow_count(video.len(), flows.len())?;
    let (h, w) = (video.height(), video.width());
    let mut out = Vec::with_capacity(flows.len());
    for (i, pair) in flows.iter().enumerate() {
        if pair.dims() != (h, w) {
            return Err(Error::ShapeMismatch {
                op: "warping_error flow",
                left: vec![h, w],
                right: vec![pair.dims().0, pair.dims().1],
            });
        }
        let mask = warp_mask(&pair.backward, &pair.forward, delta)?;
        if mask.is_empty() {
            out.push(None);
            continue;
        }
        let warped = warp_nearest(video.frame(i), &pair.backward)?;
        let cur = video.frame(i + 1);
        let mut sum = 0.0;
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    if mask.get(y, x) {
                        sum += (cur[[c, y, x]] as f64 - warped[[c, y, x]] as f64).abs();
                    }
                }
            }
        }
        out.push(Some(sum / (3 * mask.count()) as f64 * WARP_ERROR_SCALE));
    }
    Ok(out)
}

/// Flow warping error over all adjacent pairs, scaled by 1e3.
pub fn warping_error(video: &Video, flows: &[FlowPair], delta: f64) -> Result<f64> {
    let per: Vec<f64> = warping_error_per_pair(video, flows, delta)?.into_iter().flatten().collect();
    if per.is_empty() {
        if flows.is_empty() {
            return Ok(0.0);
        }
        return Err(Error::AllMasksEmpty);
    }
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// One fixed row of every frame stacked into a `T x W x 3` image.
pub fn temporal_profile(video: &Video, row: usize) -> Result<Array3<f32>> {
    if row >= video.height() {
        return Err(Error::RowOutOfRange {
            row,
            height: video.height(),
        });
    }
    let mut out = Array3::zeros((video.len(), video.width(), 3));
    for t in 0..video.len() {
        let line = video.frame(t).index_axis_move(Axis(1), row).reversed_axes();
        out.index_axis_mut(Axis(0), t).assign(&line);
    }
    Ok(out)
}

/// PSNR, SSIM and (with flows) warping error of `test` against `reference`.
pub fn evaluate(reference: &Video, test: &Video, flows: Option<&[FlowPair]>, delta: f64) -> Result<MetricReport> {
    let psnr_frames = psnr_per_frame(reference, test)?;
    let ssim_frames = ssim_per_frame(reference, test)?;
    let (e_warp, warp_frames) = match flows {
        Some(f) => (Some(warping_error(test, f, delta)?), Some(warping_error_per_pair(test, f, delta)?)),
        None => (None, None),
    };
    Ok(MetricReport {
        psnr: psnr(reference, test)?,
        ssim: ssim_frames.iter().sum::<f64>() / ssim_frames.len() as f64,
        e_warp,
        per_frame: PerFrame {
            psnr: psnr_frames,
            ssim: ssim_frames,
            e_warp: warp_frames,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{synth_flows, Motion};
    use ndarray::Array4;

    fn video(t: usize, h: usize, w: usize, f: impl Fn(usize, usize, usize, usize) -> f32) -> Video {
        Video::new(Array4::from_shape_fn((t, 3, h, w), |(a, b, c, d)| f(a, b, c, d))).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = Video::constant(2, 4, 4, 0.25).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        let b = Video::constant(2, 4, 4, 0.75).unwrap();
        assert!((psnr(&a, &b).unwrap() - 6.0206).abs() < 1e-3);
        let zero = Video::constant(1, 4, 4, 0.0).unwrap();
        let one = Video::constant(1, 4, 4, 1.0).unwrap();
        assert_eq!(psnr(&zero, &one).unwrap(), 0.0);
        assert!(matches!(psnr(&a, &zero), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn ssim_examples() {
        let a = video(2, 16, 16, |t, c, y, x| ((t + c + y * 3 + x) % 7) as f32 / 6.0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let k = Video::constant(1, 12, 12, 0.4).unwrap();
        assert_eq!(ssim(&k, &k).unwrap(), 1.0);
        let checker = video(1, 16, 16, |_, _, y, x| ((y + x) % 2) as f32);
        let inverse = video(1, 16, 16, |_, _, y, x| (1 + y + x) as f32 % 2.0);
        assert!(ssim(&checker, &inverse).unwrap() < 0.0);
        let small = Video::constant(1, 10, 20, 0.4).unwrap();
        assert!(matches!(ssim(&small, &small), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = video(1, 16, 16, |_, c, y, x| ((c + y * 5 + x * 3) % 9) as f32 / 8.0);
        let b = video(1, 16, 16, |_, c, y, x| ((c * 2 + y + x * 7) % 5) as f32 / 4.0);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn warping_error_examples() {
        let still = Video::constant(3, 6, 6, 0.5).unwrap();
        let zeros: Vec<_> = (0..2).map(|i| FlowPair::zeros(6, 6, i)).collect();
        assert_eq!(warping_error(&still, &zeros, 1.0).unwrap(), 0.0);

        let step = video(2, 6, 6, |t, _, _, _| 0.5 + 0.001 * t as f32);
        let e = warping_error(&step, &zeros[..1], 1.0).unwrap();
        assert!((e - 1.0).abs() < 1e-3, "{e}");
    }

    #[test]
    fn translating_ramp_with_exact_flows() {
        let v = video(3, 8, 8, |t, c, y, x| ((x + 8 - t) as f32 * 0.05 + y as f32 * 0.01 + c as f32 * 0.1).min(1.0));
        let flows = synth_flows(Motion::Translate { dx: 1.0, dy: 0.0 }, 8, 8, 2).unwrap();
        let per = warping_error_per_pair(&v, &flows, 1.0).unwrap();
        for e in per {
            assert!(e.unwrap() < 1e-6 * WARP_ERROR_SCALE);
        }
    }

    #[test]
    fn warping_error_ignores_global_offset() {
        let v = video(3, 8, 8, |t, c, y, x| ((t * 3 + c + y * 2 + x) % 9) as f32 / 20.0);
        let shifted = video(3, 8, 8, |t, c, y, x| ((t * 3 + c + y * 2 + x) % 9) as f32 / 20.0 + 0.25);
        let flows = synth_flows(Motion::Translate { dx: 1.0, dy: 0.0 }, 8, 8, 2).unwrap();
        let a = warping_error(&v, &flows, 1.0).unwrap();
        let b = warping_error(&shifted, &flows, 1.0).unwrap();
        assert!((a - b).abs() < 1e-3);
    }

    #[test]
    fn all_masks_empty_and_flow_count() {
        let v = Video::constant(2, 4, 4, 0.5).unwrap();
        let bad = FlowPair::new(
            crate::flow::FlowField::constant(4, 4, 1.0, 0.0).unwrap(),
            crate::flow::FlowField::constant(4, 4, 1.0, 0.0).unwrap(),
            0,
        )
        .unwrap();
        assert!(matches!(warping_error(&v, &[bad], 1.0), Err(Error::AllMasksEmpty)));
        assert!(warping_error(&v, &[], 1.0).is_err());
    }

    #[test]
    fn temporal_profile_examples() {
        let v = video(4, 3, 8, |t, _, _, x| if x >= t { 1.0 } else { 0.0 });
        let p = temporal_profile(&v, 1).unwrap();
        assert_eq!(p.dim(), (4, 8, 3));
        for t in 0..4 {
            let edge = (0..8).find(|&x| p[[t, x, 0]] == 1.0).unwrap();
            assert_eq!(edge, t);
        }
        let single = Video::constant(1, 3, 5, 0.2).unwrap();
        assert_eq!(temporal_profile(&single, 0).unwrap().dim(), (1, 5, 3));
        assert!(matches!(temporal_profile(&single, 3), Err(Error::RowOutOfRange { .. })));
    }
}
