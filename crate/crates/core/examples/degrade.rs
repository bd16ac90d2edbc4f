//! Builds a high/low quality pair with the degradation model and measures how
//! far the toy pipeline gets back.
//!
//! cargo run --release --example degrade

use ndarray::Array4;
use uav::degrade::degrade;
use uav::metrics::{psnr, ssim};
use uav::sampler::{embed, oracle_denoiser, sample, SamplerConfig};
use uav::Video;

fn main() -> uav::Result<()> {
    let hr = Video::new(Array4::from_shape_fn((4, 3, 64, 64), |(t, c, y, x)| {
        0.5 + 0.35 * ((x + 2 * t) as f32 * 0.15 + c as f32).sin() * (y as f32 * 0.1).cos()
    }))?;
    for (blur, noise) in [(0.0, 0.0), (1.0, 0.0), (1.0, 0.03), (2.0, 0.05)] {
        let lq = degrade(&hr, blur, 4, noise, 1)?;
        let restored = sample(&lq, &oracle_denoiser(embed(&lq)), &SamplerConfig::default(), &[])?;
        println!(
            "blur {blur:.1} noise {noise:.2}: {}x{} -> {}x{}, PSNR {:.2} dB, SSIM {:.4}",
            lq.width(),
            lq.height(),
            restored.width(),
            restored.height(),
            psnr(&hr, &restored)?,
            ssim(&hr, &restored)?
        );
    }
    Ok(())
}
