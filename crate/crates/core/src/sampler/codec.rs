//! Toy stand-in for the latent autoencoder.
//!
//! The latent grid is the low-resolution grid: encoding shrinks by 4 with
//! bicubic resampling and stores `LATENT_SCALE * rgb` in channels 0-2;
//! channel 3 is zero. Decoding inverts the scale, upsamples by 4 and clamps.

use ndarray::{s, Array4, Axis};

use crate::error::{Error, Result};
use crate::resample::{resize_stack, widen};
use crate::tensor::{LatentVideo, Video};

pub const DOWNSCALE: usize = 4;
pub const LATENT_CHANNELS: usize = 4;
/// Power of two, so the scale round-trips exactly.
pub const LATENT_SCALE: f64 = 8.0;

/// Places a video on the latent grid without resizing.
pub fn embed(video: &Video) -> LatentVideo {
    let [t, _, h, w] = video.shape();
    let mut data = Array4::zeros((t, LATENT_CHANNELS, h, w));
    data.slice_mut(s![.., 0..3, .., ..])
        .assign(&video.frames().mapv(|v| v as f64 * LATENT_SCALE));
    LatentVideo::from_finite(data)
}

/// Reads channels 0-2 back as a clamped video at latent resolution.
pub fn unembed(latent: &LatentVideo) -> Result<Video> {
    check_channels(latent)?;
    let rgb = latent
        .data()
        .slice(s![.., 0..3, .., ..])
        .mapv(|v| (v / LATENT_SCALE).clamp(0.0, 1.0) as f32);
    Video::new(rgb)
}

fn check_channels(latent: &LatentVideo) -> Result<()> {
    if latent.channels() < 3 {
        return Err(Error::invalid(format!(
            "latent needs at least 3 channels to decode, has {}",
            latent.channels()
        )));
    }
    Ok(())
}

pub fn toy_encode(video: &Video) -> Result<LatentVideo> {
    let (h, w) = (video.height(), video.width());
    if h % DOWNSCALE != 0 || w % DOWNSCALE != 0 {
        return Err(Error::DimensionNotDivisible { h, w, factor: DOWNSCALE });
    }
    let (lh, lw) = (h / DOWNSCALE, w / DOWNSCALE);
    let mut data = Array4::zeros((video.len(), LATENT_CHANNELS, lh, lw));
    for t in 0..video.len() {
        let small = resize_stack(widen(video.frame(t)).view(), lh, lw);
        data.slice_mut(s![t, 0..3, .., ..])
            .assign(&small.mapv(|v| v * LATENT_SCALE));
    }
    LatentVideo::new(data)
}

pub fn toy_decode(latent: &LatentVideo) -> Result<Video> {
    check_channels(latent)?;
    let (h, w) = (latent.height() * DOWNSCALE, latent.width() * DOWNSCALE);
    let mut frames = Array4::<f32>::zeros((latent.frames(), 3, h, w));
    for t in 0..latent.frames() {
        let rgb = latent
            .frame(t)
            .slice(s![0..3, .., ..])
            .mapv(|v| v / LATENT_SCALE);
        let big = resize_stack(rgb.view(), h, w);
        frames
            .index_axis_mut(Axis(0), t)
            .assign(&big.mapv(|v| v.clamp(0.0, 1.0) as f32));
    }
    Video::new(frames)
}
