//! Recurrent latent propagation on a tiny latent with a moving object and an
//! inconsistent region that the validity mask excludes.
//!
//! cargo run --example propagation

use ndarray::Array4;
use uav::flow::{synth_flows, Motion};
use uav::propagate::{PropagationConfig, Propagator};
use uav::LatentVideo;

fn main() -> uav::Result<()> {
    let (t, h, w) = (4, 1, 8);
    // Same ramp moving right, plus per-frame jitter.
    let z = LatentVideo::new(Array4::from_shape_fn((t, 1, h, w), |(f, _, _, x)| {
        (x as f64 - f as f64) + if f % 2 == 0 { 0.5 } else { -0.5 }
    }))?;
    let flows = synth_flows(Motion::Translate { dx: 1.0, dy: 0.0 }, h, w, t - 1)?;
    let cfg = PropagationConfig {
        beta: 0.5,
        ..Default::default()
    };
    let prop = Propagator::new(&flows, cfg, t, h, w)?;
    for (i, m) in prop.forward_masks().iter().enumerate() {
        println!("forward mask for frame {}: {:?}", i + 1, m.mask.row(0).to_vec());
    }
    let out = prop.run(&z)?;
    for f in 0..t {
        let before: Vec<f64> = z.data().slice(ndarray::s![f, 0, 0, ..]).to_vec();
        let after: Vec<f64> = out.data().slice(ndarray::s![f, 0, 0, ..]).to_vec();
        println!("frame {f}: {before:?}\n      -> {after:?}");
    }
    Ok(())
}
