//! Plugging a user-defined denoiser into the sampler.
//!
//! The denoiser here predicts a clean latent that blurs the conditioning
//! input horizontally, then reports the matching `v`.
//!
//! cargo run --release --example custom_denoiser

use uav::sampler::denoiser::{v_from_clean, Denoiser, StepInfo};
use uav::sampler::{sample, SamplerConfig};
use uav::{Condition, LatentVideo, Video};

struct BoxBlur;

impl Denoiser for BoxBlur {
    fn name(&self) -> &str {
        "box-blur"
    }

    fn evaluate(&self, z_t: &LatentVideo, x_tau: &LatentVideo, _: &Condition, step: &StepInfo) -> uav::Result<LatentVideo> {
        let x = x_tau.data();
        let w = x.dim().3;
        let clean = ndarray::Array4::from_shape_fn(x.dim(), |(t, c, y, i)| {
            let l = x[[t, c, y, i.saturating_sub(1)]];
            let r = x[[t, c, y, (i + 1).min(w - 1)]];
            (l + 2.0 * x[[t, c, y, i]] + r) / 4.0
        });
        v_from_clean(z_t, &LatentVideo::new(clean)?, step)
    }
}

fn main() -> uav::Result<()> {
    let lr = Video::new(ndarray::Array4::from_shape_fn((2, 3, 8, 8), |(_, _, _, x)| if x % 2 == 0 { 1.0 } else { 0.0 }))?;
    let mut cfg = SamplerConfig::default();
    cfg.condition.noise_level = 0;
    let hr = sample(&lr, &BoxBlur, &cfg, &[])?;
    let row: Vec<String> = (0..8).map(|x| format!("{:.2}", hr.frames()[[0, 0, 16, x * 4]])).collect();
    println!("{} output row: {}", BoxBlur.name(), row.join(" "));
    Ok(())
}
