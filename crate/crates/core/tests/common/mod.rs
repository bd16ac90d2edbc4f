#![allow(dead_code)]

use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uav::flow::{synth_flows, FlowPair, Motion};
use uav::sampler::codec::DOWNSCALE;
use uav::Video;

/// Smooth random texture moving `speed` pixels right per frame.
pub fn translating_scene(frames: usize, h: usize, w: usize, speed: usize, seed: u64) -> Video {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<[f64; 4]> = (0..6)
        .map(|_| {
            [
                rng.random_range(0.2..0.9),
                rng.random_range(-0.6..0.6),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.03..0.08),
            ]
        })
        .collect();
    Video::new(Array4::from_shape_fn((frames, 3, h, w), |(t, c, y, x)| {
        let u = x as f64 - (t * speed) as f64;
        let v = y as f64;
        let mut s = 0.5;
        for (i, [fx, fy, ph, amp]) in waves.iter().enumerate() {
            s += amp * (fx * u + fy * v + ph + (c * (i + 1)) as f64 * 0.4).sin();
        }
        s.clamp(0.0, 1.0) as f32
    }))
    .unwrap()
}

pub fn translation_flows(frames: usize, h: usize, w: usize, speed: usize) -> Vec<FlowPair> {
    synth_flows(
        Motion::Translate {
            dx: speed as f64,
            dy: 0.0,
        },
        h,
        w,
        frames - 1,
    )
    .unwrap()
}

pub fn upscaled(flows: &[FlowPair]) -> Vec<FlowPair> {
    flows.iter().map(|f| f.upscaled(DOWNSCALE).unwrap()).collect()
}

pub mod oracle;
