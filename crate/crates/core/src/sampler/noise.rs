//! Counter-based Gaussian noise.
//!
//! Values depend only on `(seed, frame, channel, y, x)`, so any tiling or
//! segmentation of a video sees the same field.

/// One step of the splitmix64 generator.
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn mix(a: u64, b: u64) -> u64 {
    let mut s = a ^ b.wrapping_mul(0xd6e8_feb8_6659_fd93);
    splitmix64(&mut s)
}

/// Uniform in `(0, 1]` from the top 53 bits.
#[inline]
fn unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sample addressed by a seed and four coordinates.
#[inline]
pub fn gaussian_at(seed: u64, frame: usize, channel: usize, y: usize, x: usize) -> f64 {
    let key = mix(mix(mix(mix(seed, frame as u64), channel as u64), y as u64), x as u64);
    let mut s = key;
    let u1 = unit(splitmix64(&mut s));
    let u2 = unit(splitmix64(&mut s));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
