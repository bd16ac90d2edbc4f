//! PSNR, SSIM, warping error and a temporal profile of a jittery clip.
//!
//! cargo run --example metrics -- [profile.png]

use ndarray::Array4;
use uav::flow::{synth_flows, Motion};
use uav::metrics::{evaluate, temporal_profile};
use uav::tensorio::write_rgb_image;
use uav::Video;

fn main() -> uav::Result<()> {
    let (t, h, w) = (12, 32, 48);
    let scene = |jitter: f32| {
        Video::new(Array4::from_shape_fn((t, 3, h, w), |(f, c, y, x)| {
            let shake = if f % 2 == 0 { jitter } else { -jitter };
            let u = x as f32 - f as f32;
            (0.5 + 0.3 * (0.3 * u + 0.2 * y as f32 + c as f32).sin() + shake).clamp(0.0, 1.0)
        }))
    };
    let clean = scene(0.0)?;
    let shaky = scene(0.03)?;
    let flows = synth_flows(Motion::Translate { dx: 1.0, dy: 0.0 }, h, w, t - 1)?;

    for (name, v) in [("clean", &clean), ("shaky", &shaky)] {
        let r = evaluate(&clean, v, Some(&flows), 1.0)?;
        println!(
            "{name}: PSNR {:.2} dB, SSIM {:.4}, E_warp {:.3}",
            r.psnr,
            r.ssim,
            r.e_warp.unwrap_or(f64::NAN)
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        write_rgb_image(&temporal_profile(&shaky, h / 2)?, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
