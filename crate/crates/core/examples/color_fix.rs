//! Removing a color cast with wavelet color correction.
//!
//! cargo run --example color_fix

use ndarray::{Array4, Axis};
use uav::color::color_correct;
use uav::Video;

fn channel_means(v: &Video) -> Vec<f32> {
    (0..3)
        .map(|c| v.frames().index_axis(Axis(1), c).mean().unwrap())
        .collect()
}

fn main() -> uav::Result<()> {
    let reference = Video::new(Array4::from_shape_fn((2, 3, 64, 64), |(t, c, y, x)| {
        0.5 + 0.2 * ((x + t) as f32 * 0.3).sin() * ((y as f32 * 0.2) + c as f32).cos()
    }))?;
    // A warm cast with some invented detail on top.
    let output = Video::new(Array4::from_shape_fn((2, 3, 64, 64), |(t, c, y, x)| {
        let cast = [0.08, 0.0, -0.06][c];
        reference.frames()[[t, c, y, x]] + cast + 0.02 * (((x * 7 + y * 13) % 5) as f32 - 2.0) / 2.0
    }))?;
    let fixed = color_correct(&output, &reference, 5)?;
    println!("reference means {:?}", channel_means(&reference));
    println!("output means    {:?}", channel_means(&output));
    println!("corrected means {:?}", channel_means(&fixed));
    Ok(())
}
