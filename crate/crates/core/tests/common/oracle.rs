//! Hand-unrolled reference evaluator for the consistency check and the
//! recurrent propagation on 4x4 grids with integer flows.

pub const N: usize = 4;

/// Integer flow: `[dx, dy]` per pixel.
pub type IntFlow = [[[i32; 2]; N]; N];
/// One latent frame: channels of 4x4 planes.
pub type Plane = [[f64; N]; N];

#[derive(Clone, Debug)]
pub struct Case {
    /// `(forward f_{i->i+1}, backward f_{i+1->i})` per pair.
    pub flows: Vec<(IntFlow, IntFlow)>,
    /// `frames[t][c]`
    pub frames: Vec<Vec<Plane>>,
    pub beta: f64,
    pub delta: f64,
}

fn clamp_index(v: i32) -> (usize, bool) {
    if v < 0 {
        (0, true)
    } else if v > (N as i32 - 1) {
        (N - 1, true)
    } else {
        (v as usize, false)
    }
}

/// Where `lead` sends pixel `(y, x)`, clamped, plus whether it left the grid.
fn target(lead: &IntFlow, y: usize, x: usize) -> (usize, usize, bool) {
    let [dx, dy] = lead[y][x];
    let (tx, ox) = clamp_index(x as i32 + dx);
    let (ty, oy) = clamp_index(y as i32 + dy);
    (ty, tx, ox || oy)
}

pub fn error(lead: &IntFlow, other: &IntFlow) -> [[f64; N]; N] {
    let mut e = [[0.0; N]; N];
    for y in 0..N {
        for x in 0..N {
            let (ty, tx, _) = target(lead, y, x);
            let ex = (lead[y][x][0] + other[ty][tx][0]) as f64;
            let ey = (lead[y][x][1] + other[ty][tx][1]) as f64;
            e[y][x] = ex * ex + ey * ey;
        }
    }
    e
}

pub fn mask(lead: &IntFlow, other: &IntFlow, delta: f64) -> [[bool; N]; N] {
    let e = error(lead, other);
    let mut m = [[false; N]; N];
    for y in 0..N {
        for x in 0..N {
            let (_, _, out) = target(lead, y, x);
            m[y][x] = e[y][x] < delta && !out;
        }
    }
    m
}

/// Blends `src` pulled through `lead` into `cur` wherever the check led by
/// `lead` passes.
fn fuse_from(cur: &mut [Plane], src: &[Plane], lead: &IntFlow, other: &IntFlow, beta: f64, delta: f64) {
    let m = mask(lead, other, delta);
    for (c, plane) in cur.iter_mut().enumerate() {
        for y in 0..N {
            for x in 0..N {
                if m[y][x] {
                    let (ty, tx, _) = target(lead, y, x);
                    plane[y][x] = beta * src[c][ty][tx] + (1.0 - beta) * plane[y][x];
                }
            }
        }
    }
}

/// Forward recurrence over all frames, then backward recurrence over its result.
pub fn propagate(case: &Case) -> Vec<Vec<Plane>> {
    let mut z = case.frames.clone();
    let t = z.len();
    for i in 1..t {
        let (fwd, bwd) = &case.flows[i - 1];
        let prev = z[i - 1].clone();
        fuse_from(&mut z[i], &prev, bwd, fwd, case.beta, case.delta);
    }
    for i in (0..t - 1).rev() {
        let (fwd, bwd) = &case.flows[i];
        let next = z[i + 1].clone();
        fuse_from(&mut z[i], &next, fwd, bwd, case.beta, case.delta);
    }
    z
}
