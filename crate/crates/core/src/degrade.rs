//! Synthetic low-quality frames: blur, bicubic downscale, additive noise.

use ndarray::{Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::resample::{gaussian_blur_plane, resize_plane};
use crate::tensor::Video;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeParams {
    pub blur_sigma: f64,
    pub scale: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for DegradeParams {
    fn default() -> Self {
        DegradeParams {
            blur_sigma: 1.0,
            scale: 4,
            noise_sigma: 0.02,
            seed: 0,
        }
    }
}

pub fn degrade(hr: &Video, blur_sigma: f64, scale: usize, noise_sigma: f64, seed: u64) -> Result<Video> {
    if !(blur_sigma >= 0.0 && blur_sigma.is_finite()) {
        return Err(Error::invalid(format!("blur sigma must be finite and >= 0, got {blur_sigma}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(format!("noise sigma must be finite and >= 0, got {noise_sigma}")));
    }
    if scale == 0 {
        return Err(Error::invalid("scale must be >= 1"));
    }
    let (h, w) = (hr.height(), hr.width());
    if h % scale != 0 || w % scale != 0 {
        return Err(Error::DimensionNotDivisible { h, w, factor: scale });
    }
    let (oh, ow) = (h / scale, w / scale);
    let mut out = Array4::<f64>::zeros((hr.len(), 3, oh, ow));
    for t in 0..hr.len() {
        for c in 0..3 {
            let plane = hr.frames().index_axis(Axis(0), t).index_axis(Axis(0), c).mapv(f64::from);
            let blurred = gaussian_blur_plane(plane.view(), blur_sigma)?;
            out.index_axis_mut(Axis(0), t)
                .index_axis_mut(Axis(0), c)
                .assign(&resize_plane(blurred.view(), oh, ow));
        }
    }
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
        out.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    Ok(Video::from_clamped(out.mapv(|v| v as f32))?.with_metadata_of(hr))
}

pub fn degrade_with(hr: &Video, p: &DegradeParams) -> Result<Video> {
    degrade(hr, p.blur_sigma, p.scale, p.noise_sigma, p.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(t: usize, h: usize, w: usize) -> Video {
        Video::new(Array4::from_shape_fn((t, 3, h, w), |(t, c, y, x)| ((t + c * 2 + y * 3 + x * 5) % 13) as f32 / 12.0))
            .unwrap()
    }

    #[test]
    fn no_op_parameters_are_identity() {
        let v = textured(2, 8, 8);
        assert_eq!(degrade(&v, 0.0, 1, 0.0, 7).unwrap(), v);
    }

    #[test]
    fn constant_survives_blur_and_downscale() {
        let v = Video::constant(2, 16, 16, 0.3).unwrap();
        let out = degrade(&v, 2.0, 4, 0.0, 0).unwrap();
        assert_eq!(out.shape(), [2, 3, 4, 4]);
        assert!(out.frames().iter().all(|&x| x == 0.3));
    }

    #[test]
    fn noise_std_matches_sigma() {
        let v = Video::constant(1, 64, 64, 0.5).unwrap();
        let out = degrade(&v, 0.0, 1, 0.1, 42).unwrap();
        let n = out.frames().len() as f64;
        let mean = out.frames().iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = out.frames().iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() - 0.1).abs() < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let v = textured(1, 8, 8);
        let a = degrade(&v, 1.0, 2, 0.05, 1).unwrap();
        assert_eq!(a, degrade(&v, 1.0, 2, 0.05, 1).unwrap());
        assert_ne!(a, degrade(&v, 1.0, 2, 0.05, 2).unwrap());
    }

    #[test]
    fn invalid_inputs() {
        let v = textured(1, 10, 10);
        assert!(matches!(degrade(&v, 0.0, 4, 0.0, 0), Err(Error::DimensionNotDivisible { .. })));
        assert!(matches!(degrade(&v, -1.0, 2, 0.0, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(degrade(&v, 0.0, 2, f64::NAN, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(degrade(&v, 0.0, 0, 0.0, 0), Err(Error::InvalidParameter(_))));
    }
}
