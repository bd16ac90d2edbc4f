//! Forward-backward consistency of synthetic motions and the resulting
//! validity masks.
//!
//! cargo run --example flow_check

use uav::flow::{consistency_error, synth_flow, validity_mask, Motion};

fn main() -> uav::Result<()> {
    let motions = [
        "translate:1,0",
        "translate:0.4,-0.6",
        "rotate:0.05,16,16",
        "zoom:1.05,16,16",
    ];
    for spec in motions {
        let motion: Motion = spec.parse()?;
        let pair = synth_flow(motion, 32, 32)?;
        let map = consistency_error(&pair.forward, &pair.backward)?;
        let mask = validity_mask(&map, 1.0)?;
        println!(
            "{spec:<20} max error {:7.4}  mean {:7.4}  valid {:5.1}%",
            map.max_error(),
            map.mean_error(),
            100.0 * mask.fraction()
        );
    }
    Ok(())
}
