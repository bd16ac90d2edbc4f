//! Spatial tile and temporal segment layouts.
//!
//! Tiles and segments are laid out with stride `size - overlap`; the last one
//! is shifted back so it ends flush with the border. Tile blend weights are a
//! separable linear ramp `overlap` samples wide on every interior edge,
//! normalized so the weights of all tiles covering a pixel sum to one.
//! Overlapping segments are merged by an arithmetic mean.

use ndarray::{s, Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_shape, Error, Result};
use crate::tensor::LatentVideo;

pub const DEFAULT_TILE_SIZE: usize = 80;
pub const DEFAULT_TILE_OVERLAP: usize = 16;
pub const DEFAULT_SEGMENT_LEN: usize = 8;
pub const DEFAULT_SEGMENT_OVERLAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanParams {
    pub tile_size: usize,
    pub tile_overlap: usize,
    pub segment_len: usize,
    pub segment_overlap: usize,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            tile_size: DEFAULT_TILE_SIZE,
            tile_overlap: DEFAULT_TILE_OVERLAP,
            segment_len: DEFAULT_SEGMENT_LEN,
            segment_overlap: DEFAULT_SEGMENT_OVERLAP,
        }
    }
}

impl PlanParams {
    /// A plan with one tile and one segment for any video up to the given size.
    pub fn whole(frames: usize, h: usize, w: usize) -> Self {
        PlanParams {
            tile_size: h.max(w).max(1),
            tile_overlap: 0,
            segment_len: frames.max(1),
            segment_overlap: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub y0: usize,
    pub x0: usize,
    pub h: usize,
    pub w: usize,
    /// Normalized blend weights, `h x w`.
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..self.end).contains(&frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub tiles: Vec<Tile>,
    pub segments: Vec<Segment>,
    pub params: PlanParams,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
}

impl SamplePlan {
    pub fn new(params: PlanParams, frames: usize, h: usize, w: usize) -> Result<Self> {
        Ok(SamplePlan {
            tiles: plan_tiles(h, w, params.tile_size, params.tile_overlap)?,
            segments: plan_segments(frames, params.segment_len, params.segment_overlap)?,
            params,
            height: h,
            width: w,
            frames,
        })
    }
}

fn check_overlap(what: &str, size: usize, overlap: usize) -> Result<()> {
    if size == 0 {
        return Err(Error::invalid(format!("{what} size must be >= 1")));
    }
    if overlap >= size {
        return Err(Error::invalid(format!(
            "{what} overlap {overlap} must be smaller than size {size}"
        )));
    }
    Ok(())
}

/// Start offsets along one axis of length `n`.
fn axis_starts(n: usize, size: usize, overlap: usize) -> Vec<usize> {
    let size = size.min(n);
    if size == n {
        return vec![0];
    }
    let stride = size - overlap.min(size - 1);
    let mut starts = Vec::new();
    let mut s = 0;
    while s + size < n {
        starts.push(s);
        s += stride;
    }
    starts.push(n - size);
    starts
}

/// Ramp weight of local sample `j` in a span `[a, a + len)` of an axis of length `n`.
fn ramp(j: usize, len: usize, a: usize, n: usize, overlap: usize) -> f64 {
    if overlap == 0 {
        return 1.0;
    }
    let ov = overlap as f64;
    let left = if a > 0 { ((j as f64 + 0.5) / ov).min(1.0) } else { 1.0 };
    let right = if a + len < n {
        ((len as f64 - j as f64 - 0.5) / ov).min(1.0)
    } else {
        1.0
    };
    left.min(right)
}

pub fn plan_tiles(h: usize, w: usize, tile_size: usize, overlap: usize) -> Result<Vec<Tile>> {
    check_overlap("tile", tile_size, overlap)?;
    if h == 0 || w == 0 {
        return Err(Error::invalid("cannot tile an empty grid"));
    }
    let (th, tw) = (tile_size.min(h), tile_size.min(w));
    let ys = axis_starts(h, tile_size, overlap);
    let xs = axis_starts(w, tile_size, overlap);

    let mut tiles = Vec::with_capacity(ys.len() * xs.len());
    for &y0 in &ys {
        for &x0 in &xs {
            let weights = Array2::from_shape_fn((th, tw), |(y, x)| {
                ramp(y, th, y0, h, overlap) * ramp(x, tw, x0, w, overlap)
            });
            tiles.push(Tile { y0, x0, h: th, w: tw, weights });
        }
    }

    let mut total = Array2::<f64>::zeros((h, w));
    for t in &tiles {
        let mut view = total.slice_mut(s![t.y0..t.y0 + t.h, t.x0..t.x0 + t.w]);
        view += &t.weights;
    }
    for t in &mut tiles {
        let sums = total.slice(s![t.y0..t.y0 + t.h, t.x0..t.x0 + t.w]);
        t.weights.zip_mut_with(&sums, |w, &s| *w /= s);
    }
    Ok(tiles)
}

pub fn plan_segments(frames: usize, segment_len: usize, overlap: usize) -> Result<Vec<Segment>> {
    check_overlap("segment", segment_len, overlap)?;
    if frames == 0 {
        return Err(Error::EmptySequence);
    }
    let len = segment_len.min(frames);
    Ok(axis_starts(frames, segment_len, overlap)
        .into_iter()
        .map(|start| Segment { start, end: start + len })
        .collect())
}

/// Weighted blend of per-tile `C x h x w` outputs into one `C x H x W` frame.
pub fn blend_tiles(tile_outputs: &[Array3<f64>], tiles: &[Tile], h: usize, w: usize) -> Result<Array3<f64>> {
    if tile_outputs.len() != tiles.len() {
        return Err(Error::ShapeMismatch {
            op: "blend_tiles",
            left: vec![tiles.len()],
            right: vec![tile_outputs.len()],
        });
    }
    let c = tile_outputs.first().map(|t| t.dim().0).ok_or_else(|| Error::invalid("no tiles to blend"))?;
    for (out, tile) in tile_outputs.iter().zip(tiles) {
        ensure_same_shape("blend_tiles", out.shape(), &[c, tile.h, tile.w])?;
    }

    // Accumulate deviations from the first covering tile so identical tile
    // values blend back to exactly that value.
    let mut anchor = Array3::<f64>::zeros((c, h, w));
    let mut anchored = Array2::from_elem((h, w), false);
    for (out, tile) in tile_outputs.iter().zip(tiles) {
        for y in 0..tile.h {
            for x in 0..tile.w {
                let (gy, gx) = (tile.y0 + y, tile.x0 + x);
                if !anchored[[gy, gx]] {
                    anchored[[gy, gx]] = true;
                    for ch in 0..c {
                        anchor[[ch, gy, gx]] = out[[ch, y, x]];
                    }
                }
            }
        }
    }
    if anchored.iter().any(|&a| !a) {
        return Err(Error::invalid("tiles do not cover the frame"));
    }
    let mut acc = Array3::<f64>::zeros((c, h, w));
    for (out, tile) in tile_outputs.iter().zip(tiles) {
        for ch in 0..c {
            for y in 0..tile.h {
                for x in 0..tile.w {
                    let (gy, gx) = (tile.y0 + y, tile.x0 + x);
                    acc[[ch, gy, gx]] += tile.weights[[y, x]] * (out[[ch, y, x]] - anchor[[ch, gy, gx]]);
                }
            }
        }
    }
    Ok(anchor + acc)
}

/// Averages per-segment latents over every segment covering each frame.
pub fn merge_segments(latents: &[LatentVideo], segments: &[Segment], frames: usize) -> Result<LatentVideo> {
    if latents.len() != segments.len() || latents.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "merge_segments",
            left: vec![segments.len()],
            right: vec![latents.len()],
        });
    }
    let [_, c, h, w] = latents[0].shape();
    for (l, s) in latents.iter().zip(segments) {
        ensure_same_shape("merge_segments", &l.shape(), &[s.len(), c, h, w])?;
        if s.end > frames {
            return Err(Error::invalid(format!("segment {s:?} exceeds {frames} frames")));
        }
    }
    let mut count = vec![0usize; frames];
    let mut first = vec![None; frames];
    for (k, s) in segments.iter().enumerate() {
        for f in s.start..s.end {
            count[f] += 1;
            first[f].get_or_insert(k);
        }
    }
    if count.iter().any(|&n| n == 0) {
        return Err(Error::invalid("segments do not cover every frame"));
    }

    let mut out = Array4::<f64>::zeros((frames, c, h, w));
    for f in 0..frames {
        let k0 = first[f].expect("covered");
        let anchor = latents[k0].frame(f - segments[k0].start);
        let mut acc = Array3::<f64>::zeros((c, h, w));
        let n = count[f] as f64;
        for (l, s) in latents.iter().zip(segments).filter(|(_, s)| s.contains(f)) {
            let v = l.frame(f - s.start);
            acc.zip_mut_with(&(&v - &anchor), |a, &d| *a += d / n);
        }
        out.slice_mut(s![f, .., .., ..]).assign(&(&anchor + &acc));
    }
    LatentVideo::new(out)
}
