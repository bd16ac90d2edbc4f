//! Writes a translating test clip and its exact flows.
//!
//! cargo run --example synthetic_clip -- OUT_DIR [frames] [size] [speed]
//!
//! Produces `OUT_DIR/frames/manifest.json` and `OUT_DIR/flows/`.

use std::path::PathBuf;

use ndarray::Array4;
use uav::flow::{synth_flows, Motion};
use uav::tensorio::{write_flow_dir, write_frame_sequence};
use uav::Video;

fn main() -> uav::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "clip".into()));
    let mut num = |default: usize| args.next().and_then(|a| a.parse().ok()).unwrap_or(default);
    let (frames, size, speed) = (num(16), num(64), num(1));

    let video = Video::new(Array4::from_shape_fn((frames, 3, size, size), |(t, c, y, x)| {
        let u = x as f32 - (t * speed) as f32;
        let v = y as f32;
        let s = 0.5
            + 0.2 * (0.31 * u + 0.17 * v + c as f32).sin()
            + 0.15 * (0.07 * u - 0.23 * v + 2.0 * c as f32).cos()
            + 0.1 * (0.9 * u + 0.5 * v).sin();
        s.clamp(0.0, 1.0)
    }))?;
    let flows = synth_flows(
        Motion::Translate {
            dx: speed as f64,
            dy: 0.0,
        },
        size,
        size,
        frames - 1,
    )?;
    let manifest = write_frame_sequence(&video, out.join("frames"))?;
    write_flow_dir(&flows, out.join("flows"))?;
    println!("{}", manifest.display());
    Ok(())
}
