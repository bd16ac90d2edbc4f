//! Tiled, segmented diffusion sampling with recurrent latent propagation.
//!
//! Per inference step `t` (descending):
//!
//! 1. every (segment, tile) crop of `z_t` is denoised, with classifier-free
//!    guidance when a prompt is present and the scale is not 1;
//! 2. tiles are blended and overlapping segments averaged into one `v`;
//! 3. `z0_hat` and `eps_hat` are recovered from `v`;
//! 4. at propagation positions, `z0_hat` is propagated over the whole video;
//! 5. `z_prev = alpha_prev * z0_hat + sigma_prev * eps_hat`.
//!
//! The noise estimate of step 5 is the denoiser's own (taken before
//! propagation), so a propagated `z0_hat` carries into the next state
//! instead of being cancelled by a recomputed noise term.

pub mod codec;
pub mod denoiser;
pub mod noise;
pub mod plan;

use ndarray::{s, Array3, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::color::color_correct;
use crate::error::Result;
use crate::flow::FlowPair;
use crate::propagate::{PropagationConfig, Propagator};
use crate::schedule::{cfg_combine, predict_eps_with, predict_z0_with, recombine, Condition, NoiseSchedule};
use crate::tensor::{LatentVideo, Video};

pub use codec::{embed, toy_decode, toy_encode, unembed};
pub use denoiser::{
    oracle_denoiser, procedural_denoiser, Denoiser, OracleDenoiser, ProceduralDenoiser, StepInfo, Window,
};
pub use plan::{blend_tiles, merge_segments, plan_segments, plan_tiles, PlanParams, SamplePlan, Segment, Tile};

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub schedule: NoiseSchedule,
    pub condition: Condition,
    pub propagation: PropagationConfig,
    pub plan: PlanParams,
    pub rng_seed: u64,
    /// Wavelet levels for post-decode color correction, if enabled.
    pub color_fix: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            schedule: NoiseSchedule::standard(),
            condition: Condition::default(),
            propagation: PropagationConfig::default(),
            plan: PlanParams::default(),
            rng_seed: 0,
            color_fix: None,
        }
    }
}

/// What the observer sees after each step.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub position: usize,
    pub t: usize,
    /// Merged velocity prediction.
    pub v: &'a LatentVideo,
    /// Clean-latent estimate after any propagation.
    pub z0_hat: &'a LatentVideo,
    pub propagated: bool,
}

/// Starting state and noised condition drawn from the seeded generator:
/// first the initial latent, then the conditioning noise, both in
/// row-major element order.
pub fn initial_noise(shape: [usize; 4], seed: u64) -> (LatentVideo, LatentVideo) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let v: Vec<f64> = (0..shape.iter().product::<usize>())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        LatentVideo::from_finite(Array4::from_shape_vec(shape, v).expect("sized"))
    };
    let z = draw();
    let eps = draw();
    (z, eps)
}

/// Runs the denoiser over every crop of the plan and merges the result.
pub fn evaluate_plan(
    denoiser: &dyn Denoiser,
    plan: &SamplePlan,
    z_t: &LatentVideo,
    x_tau: &LatentVideo,
    cond: &Condition,
    step: StepInfo,
) -> Result<LatentVideo> {
    let uncond = cond.unconditional();
    let guided = cond.uses_guidance();
    let jobs: Vec<(usize, usize)> = (0..plan.segments.len())
        .flat_map(|s| (0..plan.tiles.len()).map(move |t| (s, t)))
        .collect();

    let outputs: Vec<Result<LatentVideo>> = jobs
        .par_iter()
        .map(|&(si, ti)| {
            let seg = plan.segments[si];
            let tile = &plan.tiles[ti];
            let crop = |l: &LatentVideo| {
                LatentVideo::from_finite(
                    l.data()
                        .slice(s![seg.start..seg.end, .., tile.y0..tile.y0 + tile.h, tile.x0..tile.x0 + tile.w])
                        .to_owned(),
                )
            };
            let (zc, xc) = (crop(z_t), crop(x_tau));
            let info = StepInfo {
                window: Window {
                    frame_offset: seg.start,
                    y0: tile.y0,
                    x0: tile.x0,
                },
                ..step
            };
            let v = denoiser.evaluate(&zc, &xc, cond, &info)?;
            crate::error::ensure_same_shape("denoiser output", &v.shape(), &zc.shape())?;
            if guided {
                let vu = denoiser.evaluate(&zc, &xc, &uncond, &info)?;
                cfg_combine(&vu, &v, cond.guidance_scale)
            } else {
                Ok(v)
            }
        })
        .collect();
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let n_tiles = plan.tiles.len();
    let mut per_segment = Vec::with_capacity(plan.segments.len());
    for (si, seg) in plan.segments.iter().enumerate() {
        let tiles_out = &outputs[si * n_tiles..(si + 1) * n_tiles];
        let mut frames = Vec::with_capacity(seg.len());
        for f in 0..seg.len() {
            let crops: Vec<Array3<f64>> = tiles_out.iter().map(|o| o.frame(f).to_owned()).collect();
            frames.push(blend_tiles(&crops, &plan.tiles, plan.height, plan.width)?);
        }
        per_segment.push(LatentVideo::from_frames(&frames)?);
    }
    merge_segments(&per_segment, &plan.segments, plan.frames)
}

/// Samples a clean latent conditioned on `x` (already on the latent grid).
///
/// `init` overrides the seeded starting latent. `observer` is called once per
/// inference step.
pub fn sample_latent(
    x: &LatentVideo,
    denoiser: &dyn Denoiser,
    cfg: &SamplerConfig,
    flows: &[FlowPair],
    init: Option<&LatentVideo>,
    mut observer: Option<&mut dyn FnMut(&StepRecord<'_>)>,
) -> Result<LatentVideo> {
    let schedule = &cfg.schedule;
    cfg.condition.validate(schedule)?;
    let [frames, _, h, w] = x.shape();
    let plan = SamplePlan::new(cfg.plan, frames, h, w)?;

    let propagator = if schedule.propagation_steps().is_empty() {
        None
    } else {
        Some(Propagator::new(flows, cfg.propagation, frames, h, w)?)
    };

    let (noise_z, noise_x) = initial_noise(x.shape(), cfg.rng_seed);
    let mut z = match init {
        Some(z0) => {
            crate::error::ensure_same_shape("initial latent", &z0.shape(), &x.shape())?;
            z0.clone()
        }
        None => noise_z,
    };
    let x_tau = schedule.noise_input(x, cfg.condition.noise_level, &noise_x)?;

    let steps = schedule.inference_steps().to_vec();
    for (k, &t) in steps.iter().enumerate() {
        let coeffs = schedule.coeffs(t)?;
        let info = StepInfo {
            t,
            coeffs,
            window: Window::default(),
        };
        let v = evaluate_plan(denoiser, &plan, &z, &x_tau, &cfg.condition, info)?;
        let z0_raw = predict_z0_with(coeffs, &z, &v)?;
        let eps = predict_eps_with(coeffs, &z, &z0_raw, t)?;
        let propagated = schedule.propagation_steps().contains(&k);
        let z0 = match (&propagator, propagated) {
            (Some(p), true) => p.run(&z0_raw)?,
            _ => z0_raw,
        };
        if let Some(obs) = observer.as_deref_mut() {
            obs(&StepRecord {
                position: k,
                t,
                v: &v,
                z0_hat: &z0,
                propagated,
            });
        }
        let t_prev = schedule.next_step(k);
        z = recombine(schedule.coeffs(t_prev)?, &z0, &eps)?.with_step(t_prev);
    }
    Ok(z)
}

/// Full pipeline: low-resolution video in, 4x video out.
pub fn sample(input: &Video, denoiser: &dyn Denoiser, cfg: &SamplerConfig, flows: &[FlowPair]) -> Result<Video> {
    let x = embed(input);
    let z0 = sample_latent(&x, denoiser, cfg, flows, None, None)?;
    let decoded = toy_decode(&z0)?;
    let out = match cfg.color_fix {
        Some(levels) => color_correct(&decoded, input, levels)?,
        None => decoded,
    };
    Ok(out.with_metadata_of(input))
}
