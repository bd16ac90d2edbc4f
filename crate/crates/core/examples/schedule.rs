//! Noise schedule, v-prediction round trip and a DDIM trajectory.
//!
//! cargo run --example schedule

use uav::schedule::{cfg_combine, NoiseSchedule};
use uav::LatentVideo;

fn main() -> uav::Result<()> {
    let s = NoiseSchedule::standard();
    println!("train steps {}, inference steps {:?}", s.train_steps(), &s.inference_steps()[..5]);
    for t in [1, 250, 500, 750, 1000] {
        println!("t={t:4}: alpha {:.4} sigma {:.4}", s.alpha(t), s.sigma(t));
    }

    let z = LatentVideo::constant([1, 4, 2, 2], 0.7)?;
    let eps = LatentVideo::constant([1, 4, 2, 2], -1.3)?;
    let t = 600;
    let z_t = s.diffuse(&z, t, &eps)?;
    let v = s.v_target(&z, &eps, t)?;
    let z0 = s.predict_z0(&z_t, &v, t)?;
    println!("round trip error {:.2e}", z0.max_abs_diff(&z)?);

    // DDIM with a perfect clean estimate walks z_t straight to z.
    let mut cur = s.diffuse(&z, 1000, &eps)?;
    let steps = s.inference_steps().to_vec();
    for (k, &t) in steps.iter().enumerate() {
        cur = s.ddim_step(&cur, &z, t, s.next_step(k))?;
    }
    println!("after {} DDIM steps: error {:.2e}", steps.len(), cur.max_abs_diff(&z)?);

    let guided = cfg_combine(&eps, &z, 7.5)?;
    println!("guidance 7.5 sample value {:.3}", guided.data()[[0, 0, 0, 0]]);
    Ok(())
}
