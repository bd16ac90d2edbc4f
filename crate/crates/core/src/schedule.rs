//! Variance-preserving noise schedules and v-prediction algebra.
//!
//! Step indices run over `0..=train_steps`. Step 0 is the clean endpoint
//! (`alpha = 1`, `sigma = 0`); step `s >= 1` carries `alpha_s^2 =
//! prod_{k<=s}(1 - beta_k)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::LatentVideo;

pub const DEFAULT_TRAIN_STEPS: usize = 1000;
pub const DEFAULT_INFERENCE_STEPS: usize = 30;
pub const DEFAULT_BETA_START: f64 = 0.00085;
pub const DEFAULT_BETA_END: f64 = 0.012;
pub const DEFAULT_MAX_NOISE_LEVEL: usize = 350;
/// Reference run length the default propagation window is expressed in.
pub const REFERENCE_STEPS: usize = 30;
pub const EARLY_PROPAGATION: [usize; 4] = [4, 5, 6, 7];
pub const MIDDLE_PROPAGATION: [usize; 4] = [14, 15, 16, 17];
pub const LATE_PROPAGATION: [usize; 4] = [24, 25, 26, 27];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `beta` linearly spaced between the endpoints.
    Linear,
    /// `sqrt(beta)` linearly spaced between `sqrt` of the endpoints.
    ScaledLinear,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "scaled_linear" | "scaled-linear" => Ok(ScheduleKind::ScaledLinear),
            _ => Err(Error::invalid(format!("unknown schedule kind {s:?}"))),
        }
    }
}

/// Signal and noise coefficients of a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub alpha: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alphas: Vec<f64>,
    sigmas: Vec<f64>,
    inference_steps: Vec<usize>,
    propagation_steps: BTreeSet<usize>,
    max_noise_level: usize,
}

/// Linearly spaced `n` points from `a` to `b` inclusive.
fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n { b } else { a + step * i as f64 })
}

pub fn make_schedule(kind: ScheduleKind, train_steps: usize) -> Result<NoiseSchedule> {
    NoiseSchedule::new(kind, train_steps, DEFAULT_BETA_START, DEFAULT_BETA_END)
}

impl NoiseSchedule {
    pub fn new(kind: ScheduleKind, train_steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if train_steps < 2 {
            return Err(Error::invalid(format!("train_steps must be >= 2, got {train_steps}")));
        }
        for b in [beta_start, beta_end] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::invalid(format!("beta endpoint {b} outside (0, 1)")));
            }
        }
        let betas: Vec<f64> = match kind {
            ScheduleKind::Linear => linspace(beta_start, beta_end, train_steps).collect(),
            ScheduleKind::ScaledLinear => linspace(beta_start.sqrt(), beta_end.sqrt(), train_steps)
                .map(|r| r * r)
                .collect(),
        };
        let mut alphas = Vec::with_capacity(train_steps + 1);
        let mut sigmas = Vec::with_capacity(train_steps + 1);
        alphas.push(1.0);
        sigmas.push(0.0);
        let mut cumulative = 1.0;
        for b in betas {
            cumulative *= 1.0 - b;
            alphas.push(cumulative.sqrt());
            sigmas.push((1.0 - cumulative).sqrt());
        }
        let mut s = NoiseSchedule {
            alphas,
            sigmas,
            inference_steps: Vec::new(),
            propagation_steps: BTreeSet::new(),
            max_noise_level: DEFAULT_MAX_NOISE_LEVEL.min(train_steps - 1),
        };
        s.set_inference_steps(DEFAULT_INFERENCE_STEPS.min(train_steps))?;
        Ok(s)
    }

    /// Default sampling schedule: scaled-linear, 1000 training steps, 30
    /// inference steps, no propagation.
    pub fn standard() -> Self {
        make_schedule(ScheduleKind::ScaledLinear, DEFAULT_TRAIN_STEPS).expect("defaults are valid")
    }

    pub fn train_steps(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn coeffs(&self, t: usize) -> Result<Coeffs> {
        if t > self.train_steps() {
            return Err(Error::invalid(format!(
                "step {t} outside [0, {}]",
                self.train_steps()
            )));
        }
        Ok(Coeffs {
            alpha: self.alphas[t],
            sigma: self.sigmas[t],
        })
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t]
    }

    /// Evenly spaced descending steps `T, ..., T/n`, each rounded to the nearest integer.
    pub fn set_inference_steps(&mut self, n: usize) -> Result<()> {
        let total = self.train_steps();
        if n == 0 || n > total {
            return Err(Error::invalid(format!("inference steps must be in [1, {total}], got {n}")));
        }
        self.inference_steps = (0..n)
            .map(|k| ((n - k) * total + n / 2) / n)
            .collect();
        debug_assert!(self.inference_steps.windows(2).all(|w| w[0] > w[1]));
        self.propagation_steps.retain(|&p| p < n);
        Ok(())
    }

    pub fn with_inference_steps(mut self, n: usize) -> Result<Self> {
        self.set_inference_steps(n)?;
        Ok(self)
    }

    pub fn inference_steps(&self) -> &[usize] {
        &self.inference_steps
    }

    /// The step after position `k` of the inference run (0 after the last).
    pub fn next_step(&self, k: usize) -> usize {
        self.inference_steps.get(k + 1).copied().unwrap_or(0)
    }

    /// Positions into the inference run at which propagation is applied.
    pub fn set_propagation_positions(&mut self, positions: impl IntoIterator<Item = usize>) -> Result<()> {
        let n = self.inference_steps.len();
        let set: BTreeSet<usize> = positions.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&p| p >= n) {
            return Err(Error::invalid(format!(
                "propagation position {bad} outside [0, {n})"
            )));
        }
        self.propagation_steps = set;
        Ok(())
    }

    pub fn with_propagation_positions(mut self, positions: impl IntoIterator<Item = usize>) -> Result<Self> {
        self.set_propagation_positions(positions)?;
        Ok(self)
    }

    pub fn propagation_steps(&self) -> &BTreeSet<usize> {
        &self.propagation_steps
    }

    pub fn max_noise_level(&self) -> usize {
        self.max_noise_level
    }

    pub fn set_max_noise_level(&mut self, tau_max: usize) -> Result<()> {
        if tau_max >= self.train_steps() {
            return Err(Error::invalid(format!(
                "max noise level {tau_max} must be below train steps {}",
                self.train_steps()
            )));
        }
        self.max_noise_level = tau_max;
        Ok(())
    }

    pub fn diffuse(&self, z: &LatentVideo, t: usize, eps: &LatentVideo) -> Result<LatentVideo> {
        diffuse_with(self.coeffs(t)?, z, eps).map(|l| l.with_step(t))
    }

    pub fn v_target(&self, z: &LatentVideo, eps: &LatentVideo, t: usize) -> Result<LatentVideo> {
        v_target_with(self.coeffs(t)?, z, eps)
    }

    pub fn predict_z0(&self, z_t: &LatentVideo, v: &LatentVideo, t: usize) -> Result<LatentVideo> {
        predict_z0_with(self.coeffs(t)?, z_t, v)
    }

    pub fn predict_eps(&self, z_t: &LatentVideo, z0_hat: &LatentVideo, t: usize) -> Result<LatentVideo> {
        predict_eps_with(self.coeffs(t)?, z_t, z0_hat, t)
    }

    /// Deterministic (eta = 0) update from step `t` to `t_prev`.
    pub fn ddim_step(
        &self,
        z_t: &LatentVideo,
        z0_hat: &LatentVideo,
        t: usize,
        t_prev: usize,
    ) -> Result<LatentVideo> {
        if t_prev >= t {
            return Err(Error::invalid(format!("t_prev {t_prev} must precede t {t}")));
        }
        ddim_step_with(self.coeffs(t)?, self.coeffs(t_prev)?, z_t, z0_hat, t).map(|l| l.with_step(t_prev))
    }

    /// Noises the conditioning input to level `tau`.
    pub fn noise_input(&self, x: &LatentVideo, tau: usize, eps: &LatentVideo) -> Result<LatentVideo> {
        if tau > self.max_noise_level {
            return Err(Error::NoiseLevelOutOfRange {
                tau,
                max: self.max_noise_level,
            });
        }
        diffuse_with(self.coeffs(tau)?, x, eps)
    }
}

/// `alpha * z + sigma * eps`
pub fn diffuse_with(c: Coeffs, z: &LatentVideo, eps: &LatentVideo) -> Result<LatentVideo> {
    z.zip_map(eps, "diffuse", |z, e| c.alpha * z + c.sigma * e)
}

/// `alpha * eps - sigma * z`
pub fn v_target_with(c: Coeffs, z: &LatentVideo, eps: &LatentVideo) -> Result<LatentVideo> {
    z.zip_map(eps, "v_target", |z, e| c.alpha * e - c.sigma * z)
}

/// `alpha * z_t - sigma * v`
pub fn predict_z0_with(c: Coeffs, z_t: &LatentVideo, v: &LatentVideo) -> Result<LatentVideo> {
    z_t.zip_map(v, "predict_z0", |z, v| c.alpha * z - c.sigma * v)
}

/// `(z_t - alpha * z0_hat) / sigma`
pub fn predict_eps_with(c: Coeffs, z_t: &LatentVideo, z0_hat: &LatentVideo, t: usize) -> Result<LatentVideo> {
    if c.sigma == 0.0 {
        return Err(Error::DivisionByZeroStep { t });
    }
    z_t.zip_map(z0_hat, "predict_eps", |z, x| (z - c.alpha * x) / c.sigma)
}

pub fn ddim_step_with(
    at: Coeffs,
    prev: Coeffs,
    z_t: &LatentVideo,
    z0_hat: &LatentVideo,
    t: usize,
) -> Result<LatentVideo> {
    let eps = predict_eps_with(at, z_t, z0_hat, t)?;
    recombine(prev, z0_hat, &eps)
}

/// `alpha_prev * z0_hat + sigma_prev * eps`: the DDIM update with an explicit
/// noise estimate.
pub fn recombine(prev: Coeffs, z0_hat: &LatentVideo, eps: &LatentVideo) -> Result<LatentVideo> {
    z0_hat.zip_map(eps, "ddim_step", |x, e| prev.alpha * x + prev.sigma * e)
}

/// `v_uncond + scale * (v_cond - v_uncond)`; `scale = 0` and `scale = 1`
/// return the respective input unchanged.
pub fn cfg_combine(v_uncond: &LatentVideo, v_cond: &LatentVideo, scale: f64) -> Result<LatentVideo> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("guidance scale must be finite and >= 0, got {scale}")));
    }
    crate::error::ensure_same_shape("cfg_combine", &v_uncond.shape(), &v_cond.shape())?;
    if scale == 0.0 {
        return Ok(v_uncond.clone());
    }
    if scale == 1.0 {
        return Ok(v_cond.clone());
    }
    v_uncond.zip_map(v_cond, "cfg_combine", |u, c| u + scale * (c - u))
}

/// Opaque prompt embedding; `Absent` is the null prompt and is distinct from
/// any vector, including all zeros.
#[derive(Debug, Clone, PartialEq)]
pub enum Prompt {
    Absent,
    Embedding(Vec<f32>),
}

pub const PROMPT_EMBEDDING_DIM: usize = 16;

impl Prompt {
    /// Deterministic toy embedding: splitmix64 stream from `seed`, mapped to `[-1, 1)`.
    pub fn from_seed(seed: u64) -> Prompt {
        let mut state = seed;
        let v = (0..PROMPT_EMBEDDING_DIM)
            .map(|_| {
                let r = crate::sampler::noise::splitmix64(&mut state);
                ((r >> 40) as f32 / (1u64 << 24) as f32) * 2.0 - 1.0
            })
            .collect();
        Prompt::Embedding(v)
    }

    pub fn is_present(&self) -> bool {
        matches!(self, Prompt::Embedding(_))
    }

    /// Stable 64-bit digest; `Absent` hashes to a reserved value.
    pub fn digest(&self) -> u64 {
        match self {
            Prompt::Absent => 0x6e75_6c6c_5f70_726d,
            Prompt::Embedding(v) => {
                let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                for x in v {
                    for b in x.to_bits().to_le_bytes() {
                        h ^= b as u64;
                        h = h.wrapping_mul(0x0100_0000_01b3);
                    }
                }
                h ^= v.len() as u64;
                h.wrapping_mul(0x0100_0000_01b3)
            }
        }
    }
}

/// Denoiser conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub prompt: Prompt,
    pub noise_level: usize,
    pub guidance_scale: f64,
}

impl Default for Condition {
    fn default() -> Self {
        Condition {
            prompt: Prompt::Absent,
            noise_level: 20,
            guidance_scale: 1.0,
        }
    }
}

impl Condition {
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        if self.noise_level > schedule.max_noise_level() {
            return Err(Error::NoiseLevelOutOfRange {
                tau: self.noise_level,
                max: schedule.max_noise_level(),
            });
        }
        if !(self.guidance_scale >= 0.0) || !self.guidance_scale.is_finite() {
            return Err(Error::invalid(format!(
                "guidance scale must be finite and >= 0, got {}",
                self.guidance_scale
            )));
        }
        Ok(())
    }

    pub fn unconditional(&self) -> Condition {
        Condition {
            prompt: Prompt::Absent,
            ..self.clone()
        }
    }

    /// Guidance needs two evaluations only with a prompt and a non-unit scale.
    pub fn uses_guidance(&self) -> bool {
        self.prompt.is_present() && self.guidance_scale != 1.0
    }
}

/// Rescales a contiguous window of positions defined on a `reference`-step
/// run to an `n`-step run. The result is never empty for a non-empty window.
pub fn scale_window(positions: &[usize], reference: usize, n: usize) -> Vec<usize> {
    let (Some(&lo), Some(&hi)) = (positions.iter().min(), positions.iter().max()) else {
        return Vec::new();
    };
    let round = |p: usize| (p * n + reference / 2) / reference;
    let start = round(lo).min(n.saturating_sub(1));
    let end = round(hi + 1).clamp(start + 1, n);
    (start..end).collect()
}
