//! Tile and segment layout of a sampling plan, and a check that tiled
//! sampling matches whole-frame sampling for a pointwise denoiser.
//!
//! cargo run --release --example tiling

use uav::sampler::{embed, procedural_denoiser, sample_latent, PlanParams, SamplePlan, SamplerConfig};
use uav::Video;

fn main() -> uav::Result<()> {
    let params = PlanParams {
        tile_size: 16,
        tile_overlap: 4,
        segment_len: 8,
        segment_overlap: 2,
    };
    let plan = SamplePlan::new(params, 20, 28, 40)?;
    for t in &plan.tiles {
        println!("tile y0={:2} x0={:2} {}x{}", t.y0, t.x0, t.h, t.w);
    }
    for s in &plan.segments {
        println!("segment [{}, {})", s.start, s.end);
    }

    let lr = Video::constant(6, 28, 40, 0.4)?;
    let x = embed(&lr);
    let d = procedural_denoiser(0.5);
    let mut tiled = SamplerConfig {
        plan: PlanParams {
            segment_len: 4,
            ..params
        },
        ..Default::default()
    };
    tiled.schedule.set_inference_steps(10)?;
    let whole = SamplerConfig {
        plan: PlanParams::whole(6, 28, 40),
        ..tiled.clone()
    };
    let a = sample_latent(&x, &d, &tiled, &[], None, None)?;
    let b = sample_latent(&x, &d, &whole, &[], None, None)?;
    println!("tiled == whole: {}", a == b);
    Ok(())
}
