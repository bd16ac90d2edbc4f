mod common;

use ndarray::Array4;
use uav::config::parse_tstar;
use uav::flow::FlowPair;
use uav::metrics::warping_error;
use uav::sampler::{embed, oracle_denoiser, procedural_denoiser, sample, sample_latent, PlanParams, SamplerConfig};
use uav::{Error, LatentVideo, Video};

use common::{translating_scene, translation_flows, upscaled};

fn static_video(frames: usize, h: usize, w: usize) -> Video {
    Video::new(Array4::from_shape_fn((frames, 3, h, w), |(_, c, y, x)| {
        ((c * 7 + y * 3 + x * 5) % 17) as f32 / 16.0
    }))
    .unwrap()
}

#[test]
fn propagation_leaves_consistent_video_unchanged() {
    let lr = static_video(6, 12, 12);
    let flows: Vec<FlowPair> = (0..5).map(|i| FlowPair::zeros(12, 12, i)).collect();
    let mut plain = SamplerConfig::default();
    plain.condition.noise_level = 0;
    let mut with = plain.clone();
    with.schedule.set_propagation_positions(parse_tstar("middle", 30).unwrap()).unwrap();
    for d in [procedural_denoiser(0.0), procedural_denoiser(0.0).with_seed(5)] {
        let a = sample(&lr, &d, &plain, &flows).unwrap();
        let b = sample(&lr, &d, &with, &flows).unwrap();
        for (x, y) in a.frames().iter().zip(b.frames().iter()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
    let target = embed(&lr);
    let a = sample_latent(&target, &oracle_denoiser(target.clone()), &plain, &flows, None, None).unwrap();
    let b = sample_latent(&target, &oracle_denoiser(target.clone()), &with, &flows, None, None).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() <= 1e-6);
}

#[test]
fn middle_propagation_reduces_flicker() {
    let (t, h, w) = (8, 16, 16);
    let lr = translating_scene(t, h, w, 1, 7);
    let flows = translation_flows(t, h, w, 1);
    let d = procedural_denoiser(0.4);
    let run = |tstar: &str| {
        let mut cfg = SamplerConfig::default();
        cfg.schedule.set_propagation_positions(parse_tstar(tstar, 30).unwrap()).unwrap();
        warping_error(&sample(&lr, &d, &cfg, &flows).unwrap(), &upscaled(&flows), 1.0).unwrap()
    };
    assert!(run("middle") < run("none"));
}

#[test]
fn parallel_plan_layouts_agree() {
    let lr = translating_scene(10, 18, 22, 1, 2);
    let flows = translation_flows(10, 18, 22, 1);
    let d = procedural_denoiser(0.4).with_seed(9);
    let mut base = SamplerConfig::default();
    base.schedule.set_inference_steps(8).unwrap();
    base.schedule.set_propagation_positions([3, 4]).unwrap();
    let layouts = [
        PlanParams::whole(10, 18, 22),
        PlanParams {
            tile_size: 8,
            tile_overlap: 3,
            segment_len: 4,
            segment_overlap: 1,
        },
        PlanParams {
            tile_size: 12,
            tile_overlap: 0,
            segment_len: 10,
            segment_overlap: 0,
        },
    ];
    let outs: Vec<LatentVideo> = layouts
        .iter()
        .map(|&plan| {
            let cfg = SamplerConfig { plan, ..base.clone() };
            sample_latent(&embed(&lr), &d, &cfg, &flows, None, None).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn guidance_changes_output_only_with_prompt() {
    let lr = translating_scene(3, 8, 8, 1, 4);
    let d = procedural_denoiser(0.5);
    let mut cfg = SamplerConfig::default();
    cfg.schedule.set_inference_steps(6).unwrap();
    let plain = sample(&lr, &d, &cfg, &[]).unwrap();
    cfg.condition.guidance_scale = 3.0;
    assert_eq!(sample(&lr, &d, &cfg, &[]).unwrap(), plain);
    cfg.condition.prompt = uav::Prompt::from_seed(1);
    assert_ne!(sample(&lr, &d, &cfg, &[]).unwrap(), plain);
}

#[test]
fn color_fix_pulls_means_to_input() {
    let lr = translating_scene(2, 16, 16, 1, 8);
    let d = procedural_denoiser(1.0);
    let mut cfg = SamplerConfig::default();
    cfg.schedule.set_inference_steps(6).unwrap();
    cfg.color_fix = Some(4);
    let fixed = sample(&lr, &d, &cfg, &[]).unwrap();
    assert_eq!(fixed.shape(), [2, 3, 64, 64]);
    let mean = |v: &Video| v.frames().iter().map(|&x| x as f64).sum::<f64>() / v.frames().len() as f64;
    assert!((mean(&fixed) - mean(&lr)).abs() < 0.02);
}

#[test]
fn noise_level_above_limit_rejected() {
    let lr = translating_scene(2, 8, 8, 1, 8);
    let mut cfg = SamplerConfig::default();
    cfg.condition.noise_level = 351;
    assert!(matches!(
        sample(&lr, &procedural_denoiser(0.4), &cfg, &[]),
        Err(Error::NoiseLevelOutOfRange { tau: 351, max: 350 })
    ));
}
