//! The denoiser contract and the two built-in toy denoisers.

use ndarray::{s, Array4, Zip};

use crate::error::{ensure_same_shape, Error, Result};
use crate::schedule::{Coeffs, Condition};
use crate::tensor::LatentVideo;

use super::noise::{gaussian_at, mix};

/// Where a crop sits inside the full latent video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Window {
    pub frame_offset: usize,
    pub y0: usize,
    pub x0: usize,
}

/// Per-call step information handed to a denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub t: usize,
    pub coeffs: Coeffs,
    pub window: Window,
}

/// `f(z_t, x_tau; c, t) -> v`.
///
/// Implementations must return a `v` with the shape of `z_t`, finite for
/// finite inputs, and must be deterministic.
pub trait Denoiser: Send + Sync {
    fn name(&self) -> &str;

    fn evaluate(&self, z_t: &LatentVideo, x_tau: &LatentVideo, cond: &Condition, step: &StepInfo) -> Result<LatentVideo>;
}

/// `v` that makes `predict_z0` return `z0_hat`: `(alpha z_t - z0_hat) / sigma`.
pub fn v_from_clean(z_t: &LatentVideo, z0_hat: &LatentVideo, step: &StepInfo) -> Result<LatentVideo> {
    let Coeffs { alpha, sigma } = step.coeffs;
    if sigma == 0.0 {
        return Err(Error::DivisionByZeroStep { t: step.t });
    }
    z_t.zip_map(z0_hat, "v_from_clean", |z, x| (alpha * z - x) / sigma)
}

/// Always predicts a fixed clean latent.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    target: LatentVideo,
}

pub fn oracle_denoiser(target: LatentVideo) -> OracleDenoiser {
    OracleDenoiser { target }
}

impl OracleDenoiser {
    pub fn target(&self) -> &LatentVideo {
        &self.target
    }

    fn crop(&self, shape: [usize; 4], w: Window) -> Result<LatentVideo> {
        let [t, c, h, wd] = shape;
        let full = self.target.shape();
        if w.frame_offset + t > full[0] || c != full[1] || w.y0 + h > full[2] || w.x0 + wd > full[3] {
            return Err(Error::ShapeMismatch {
                op: "oracle crop",
                left: full.to_vec(),
                right: vec![w.frame_offset + t, c, w.y0 + h, w.x0 + wd],
            });
        }
        Ok(LatentVideo::from_finite(
            self.target
                .data()
                .slice(s![
                    w.frame_offset..w.frame_offset + t,
                    ..,
                    w.y0..w.y0 + h,
                    w.x0..w.x0 + wd
                ])
                .to_owned(),
        ))
    }
}

impl Denoiser for OracleDenoiser {
    fn name(&self) -> &str {
        "oracle"
    }

    fn evaluate(&self, z_t: &LatentVideo, _x_tau: &LatentVideo, _cond: &Condition, step: &StepInfo) -> Result<LatentVideo> {
        let target = self.crop(z_t.shape(), step.window)?;
        v_from_clean(z_t, &target, step)
    }
}

/// Procedural generative denoiser.
///
/// It models each frame's clean latent as Gaussian around a prior mean
/// `mu = x_tau + s * n_f`, where `n_f` is a per-frame noise field seeded by
/// the prompt and the absolute frame index, and `s = detail_gain * g(tau)`
/// with `g(tau) = 1 + tau / 100`. Its estimate is the posterior mean given
/// `z_t` under prior spread `spread * s`:
///
/// ```text
/// z0_hat = mu + k (z_t - alpha mu),   k = alpha c^2 / (alpha^2 c^2 + sigma^2),   c = spread * s
/// ```
///
/// Early, noisy steps therefore invent per-frame detail; late steps commit to
/// whatever `z_t` already holds. Frames are generated independently, so the
/// output flickers unless something couples the frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProceduralDenoiser {
    pub detail_gain: f64,
    pub spread: f64,
    pub seed: u64,
}

pub const DEFAULT_DETAIL_GAIN: f64 = 0.4;
pub const DEFAULT_SPREAD: f64 = 3.0;

pub fn procedural_denoiser(detail_gain: f64) -> ProceduralDenoiser {
    ProceduralDenoiser {
        detail_gain,
        spread: DEFAULT_SPREAD,
        seed: 0,
    }
}

impl ProceduralDenoiser {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.detail_gain >= 0.0) || !self.detail_gain.is_finite() {
            return Err(Error::invalid(format!("detail gain must be finite and >= 0, got {}", self.detail_gain)));
        }
        if !(self.spread > 0.0) || !self.spread.is_finite() {
            return Err(Error::invalid(format!("spread must be finite and > 0, got {}", self.spread)));
        }
        Ok(())
    }

    /// Monotone noise-level response.
    pub fn level_gain(tau: usize) -> f64 {
        1.0 + tau as f64 / 100.0
    }

    pub fn detail_strength(&self, cond: &Condition) -> f64 {
        self.detail_gain * Self::level_gain(cond.noise_level)
    }

    /// Seed of the noise field for absolute frame `frame`.
    pub fn frame_seed(&self, cond: &Condition, frame: usize) -> u64 {
        mix(mix(self.seed, cond.prompt.digest()), frame as u64)
    }

    /// The clean-latent estimate this denoiser implies.
    pub fn clean_estimate(
        &self,
        z_t: &LatentVideo,
        x_tau: &LatentVideo,
        cond: &Condition,
        step: &StepInfo,
    ) -> Result<LatentVideo> {
        self.validate()?;
        ensure_same_shape("procedural denoiser", &z_t.shape(), &x_tau.shape())?;
        let s = self.detail_strength(cond);
        if s == 0.0 {
            return Ok(x_tau.clone());
        }
        let Coeffs { alpha, sigma } = step.coeffs;
        let c2 = (self.spread * s).powi(2);
        let k = alpha * c2 / (alpha * alpha * c2 + sigma * sigma);
        let w = step.window;
        let seeds: Vec<u64> = (0..z_t.frames())
            .map(|f| self.frame_seed(cond, w.frame_offset + f))
            .collect();
        let mut out = Array4::<f64>::zeros(z_t.shape());
        Zip::indexed(&mut out)
            .and(z_t.data())
            .and(x_tau.data())
            .for_each(|(f, ch, y, x), o, &z, &base| {
                let n = gaussian_at(seeds[f], 0, ch, w.y0 + y, w.x0 + x);
                let mu = base + s * n;
                *o = mu + k * (z - alpha * mu);
            });
        LatentVideo::new(out)
    }
}

impl Denoiser for ProceduralDenoiser {
    fn name(&self) -> &str {
        "procedural"
    }

    fn evaluate(&self, z_t: &LatentVideo, x_tau: &LatentVideo, cond: &Condition, step: &StepInfo) -> Result<LatentVideo> {
        let z0 = self.clean_estimate(z_t, x_tau, cond, step)?;
        v_from_clean(z_t, &z0, step)
    }
}
