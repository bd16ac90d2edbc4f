//! End-to-end 4x upscaling of a flickery toy clip, with and without latent
//! propagation, scored by the flow warping error.
//!
//! cargo run --release --example upscale_pipeline

use ndarray::Array4;
use uav::config::parse_tstar;
use uav::flow::{synth_flows, Motion};
use uav::metrics::warping_error;
use uav::sampler::{procedural_denoiser, sample, SamplerConfig};
use uav::Video;

fn main() -> uav::Result<()> {
    let (frames, size) = (8, 24);
    let lr = Video::new(Array4::from_shape_fn((frames, 3, size, size), |(t, c, y, x)| {
        let u = x as f32 - t as f32;
        (0.5 + 0.3 * (0.4 * u + 0.25 * y as f32 + c as f32).sin()).clamp(0.0, 1.0)
    }))?;
    let motion = Motion::Translate { dx: 1.0, dy: 0.0 };
    let flows = synth_flows(motion, size, size, frames - 1)?;
    let hr_flows: Vec<_> = flows.iter().map(|f| f.upscaled(4)).collect::<uav::Result<_>>()?;

    let denoiser = procedural_denoiser(0.4);
    for window in ["none", "early", "middle", "late"] {
        let mut cfg = SamplerConfig::default();
        cfg.schedule.set_propagation_positions(parse_tstar(window, 30)?)?;
        let hr = sample(&lr, &denoiser, &cfg, &flows)?;
        println!(
            "{window:>6}: {}x{} output, E_warp {:8.3}",
            hr.width(),
            hr.height(),
            warping_error(&hr, &hr_flows, 1.0)?
        );
    }
    Ok(())
}
