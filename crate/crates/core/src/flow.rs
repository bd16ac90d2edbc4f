//! Dense flow fields, forward-backward validity checking and nearest-mode
//! backward warping.
//!
//! A flow vector at pixel `p` of frame `a` points to where that content sits
//! in frame `b`. Every displaced lookup rounds `p + f(p)` to the nearest
//! integer (ties toward +inf) and clamps to the grid; a clamped lookup marks
//! the position as out of bounds.

use ndarray::{Array2, Array3, ArrayView3, Axis};

use crate::error::{ensure_same_shape, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    /// `f_{i -> i+1}`
    Forward,
    /// `f_{i+1 -> i}`
    Backward,
}

/// Per-pixel displacement, `vectors[0]` is x (columns), `vectors[1]` is y (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    vectors: Array3<f32>,
    pub direction: FlowDirection,
    pub from_index: usize,
    pub to_index: usize,
}

impl FlowField {
    /// Forward field from frame 0 to frame 1; relabel with [`FlowField::linking`].
    pub fn new(vectors: Array3<f32>) -> Result<Self> {
        if vectors.dim().0 != 2 {
            return Err(Error::invalid(format!(
                "flow must be 2 x H x W, got {:?}",
                vectors.shape()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "flow" });
        }
        Ok(FlowField {
            vectors,
            direction: FlowDirection::Forward,
            from_index: 0,
            to_index: 1,
        })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        FlowField::new(Array3::zeros((2, h, w))).expect("zeros are finite")
    }

    pub fn constant(h: usize, w: usize, dx: f32, dy: f32) -> Result<Self> {
        let mut v = Array3::zeros((2, h, w));
        v.index_axis_mut(Axis(0), 0).fill(dx);
        v.index_axis_mut(Axis(0), 1).fill(dy);
        FlowField::new(v)
    }

    /// Relabels the field as linking frame `pair` and `pair + 1` in `direction`.
    pub fn linking(mut self, direction: FlowDirection, pair: usize) -> Self {
        self.direction = direction;
        (self.from_index, self.to_index) = match direction {
            FlowDirection::Forward => (pair, pair + 1),
            FlowDirection::Backward => (pair + 1, pair),
        };
        self
    }

    pub fn vectors(&self) -> &Array3<f32> {
        &self.vectors
    }

    pub fn height(&self) -> usize {
        self.vectors.dim().1
    }

    pub fn width(&self) -> usize {
        self.vectors.dim().2
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> (f64, f64) {
        (
            self.vectors[[0, y, x]] as f64,
            self.vectors[[1, y, x]] as f64,
        )
    }

    /// Nearest-neighbour upsampling by an integer factor; displacements scale with it.
    pub fn upscaled(&self, factor: usize) -> Result<FlowField> {
        if factor == 0 {
            return Err(Error::invalid("flow upscale factor must be >= 1"));
        }
        let (h, w) = self.dims();
        let k = factor as f32;
        let vectors = Array3::from_shape_fn((2, h * factor, w * factor), |(c, y, x)| {
            self.vectors[[c, y / factor, x / factor]] * k
        });
        Ok(FlowField {
            vectors,
            ..self.clone()
        })
    }

    /// The displaced, rounded and clamped lookup for pixel `(y, x)`.
    #[inline]
    pub fn source_of(&self, y: usize, x: usize) -> Lookup {
        let (fx, fy) = self.at(y, x);
        let (sx, ox) = round_clamp(x as f64 + fx, self.width());
        let (sy, oy) = round_clamp(y as f64 + fy, self.height());
        Lookup {
            y: sy,
            x: sx,
            out_of_bounds: ox || oy,
        }
    }
}

/// Forward and backward flow between frames `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPair {
    /// `f_{i -> i+1}`, defined on frame `i`'s grid.
    pub forward: FlowField,
    /// `f_{i+1 -> i}`, defined on frame `i+1`'s grid.
    pub backward: FlowField,
}

impl FlowPair {
    pub fn new(forward: FlowField, backward: FlowField, pair: usize) -> Result<Self> {
        ensure_same_shape(
            "flow pair",
            forward.vectors.shape(),
            backward.vectors.shape(),
        )?;
        Ok(FlowPair {
            forward: forward.linking(FlowDirection::Forward, pair),
            backward: backward.linking(FlowDirection::Backward, pair),
        })
    }

    pub fn zeros(h: usize, w: usize, pair: usize) -> Self {
        FlowPair::new(FlowField::zeros(h, w), FlowField::zeros(h, w), pair).expect("same dims")
    }

    pub fn dims(&self) -> (usize, usize) {
        self.forward.dims()
    }

    pub fn upscaled(&self, factor: usize) -> Result<FlowPair> {
        Ok(FlowPair {
            forward: self.forward.upscaled(factor)?,
            backward: self.backward.upscaled(factor)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lookup {
    pub y: usize,
    pub x: usize,
    pub out_of_bounds: bool,
}

/// Nearest integer with ties toward +inf, clamped into `[0, n)`.
#[inline]
pub fn round_clamp(v: f64, n: usize) -> (usize, bool) {
    let r = (v + 0.5).floor();
    let hi = (n - 1) as f64;
    if r < 0.0 {
        (0, true)
    } else if r > hi {
        (n - 1, true)
    } else {
        (r as usize, false)
    }
}

/// Per-pixel forward-backward consistency error plus the out-of-bounds flags
/// raised by its displaced lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyMap {
    pub error: Array2<f64>,
    pub out_of_bounds: Array2<bool>,
}

impl ConsistencyMap {
    pub fn max_error(&self) -> f64 {
        self.error.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_error(&self) -> f64 {
        self.error.mean().unwrap_or(0.0)
    }
}

/// `E(p) = |lead(p) + other(p + lead(p))|^2`.
///
/// `lead` is defined on the grid the error is reported on and maps into the
/// grid of `other`; `other` maps back.
pub fn consistency_error(lead: &FlowField, other: &FlowField) -> Result<ConsistencyMap> {
    ensure_same_shape(
        "consistency_error",
        lead.vectors.shape(),
        other.vectors.shape(),
    )?;
    let (h, w) = lead.dims();
    let mut error = Array2::zeros((h, w));
    let mut out_of_bounds = Array2::from_elem((h, w), false);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = lead.at(y, x);
            let src = lead.source_of(y, x);
            let (bx, by) = other.at(src.y, src.x);
            let (ex, ey) = (fx + bx, fy + by);
            error[[y, x]] = ex * ex + ey * ey;
            out_of_bounds[[y, x]] = src.out_of_bounds;
        }
    }
    Ok(ConsistencyMap {
        error,
        out_of_bounds,
    })
}

/// Binary occlusion mask `M`: 1 where the error is strictly below `delta`
/// and the displaced lookup stayed inside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityMask {
    pub mask: Array2<bool>,
    pub threshold_used: f64,
}

impl ValidityMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.mask.len().max(1) as f64
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.mask[[y, x]]
    }
}

pub fn validity_mask(map: &ConsistencyMap, delta: f64) -> Result<ValidityMask> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be finite and > 0, got {delta}")));
    }
    let mut mask = map.error.mapv(|e| e < delta);
    mask.zip_mut_with(&map.out_of_bounds, |m, &oob| *m = *m && !oob);
    Ok(ValidityMask {
        mask,
        threshold_used: delta,
    })
}

/// Validity mask for pulling content into the frame `flow` is defined on.
pub fn warp_mask(flow: &FlowField, inverse: &FlowField, delta: f64) -> Result<ValidityMask> {
    validity_mask(&consistency_error(flow, inverse)?, delta)
}

/// Backward warp: `out[c][p] = input[c][round_clamp(p + flow(p))]`.
pub fn warp_nearest<A: Clone>(input: ArrayView3<'_, A>, flow: &FlowField) -> Result<Array3<A>> {
    let (c, h, w) = input.dim();
    ensure_same_shape("warp_nearest", &[h, w], &[flow.height(), flow.width()])?;
    let mut idx = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let s = flow.source_of(y, x);
            idx.push((s.y, s.x));
        }
    }
    Ok(Array3::from_shape_fn((c, h, w), |(ch, y, x)| {
        let (sy, sx) = idx[y * w + x];
        input[[ch, sy, sx]].clone()
    }))
}

/// Parametric motion between consecutive frames, in pixel units.
///
/// Rotation is counter-clockwise for positive angles in a y-down image frame,
/// i.e. `x' = cx + cos(a)(x-cx) - sin(a)(y-cy)`, `y' = cy + sin(a)(x-cx) + cos(a)(y-cy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    Translate { dx: f64, dy: f64 },
    Rotate { angle: f64, cx: f64, cy: f64 },
    Zoom { scale: f64, cx: f64, cy: f64 },
}

impl Motion {
    fn validate(&self) -> Result<()> {
        let finite = match *self {
            Motion::Translate { dx, dy } => dx.is_finite() && dy.is_finite(),
            Motion::Rotate { angle, cx, cy } => {
                angle.is_finite() && cx.is_finite() && cy.is_finite()
            }
            Motion::Zoom { scale, cx, cy } => {
                if scale == 0.0 {
                    return Err(Error::invalid("zoom scale must be nonzero"));
                }
                scale.is_finite() && cx.is_finite() && cy.is_finite()
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::invalid(format!("non-finite motion parameters: {self:?}")))
        }
    }

    /// Where point `(x, y)` of frame `i` lands in frame `i + 1`.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Motion::Translate { dx, dy } => (x + dx, y + dy),
            Motion::Rotate { angle, cx, cy } => {
                let (s, c) = angle.sin_cos();
                let (u, v) = (x - cx, y - cy);
                (cx + c * u - s * v, cy + s * u + c * v)
            }
            Motion::Zoom { scale, cx, cy } => (cx + scale * (x - cx), cy + scale * (y - cy)),
        }
    }

    pub fn inverse(&self) -> Motion {
        match *self {
            Motion::Translate { dx, dy } => Motion::Translate { dx: -dx, dy: -dy },
            Motion::Rotate { angle, cx, cy } => Motion::Rotate {
                angle: -angle,
                cx,
                cy,
            },
            Motion::Zoom { scale, cx, cy } => Motion::Zoom {
                scale: 1.0 / scale,
                cx,
                cy,
            },
        }
    }

    fn field(&self, h: usize, w: usize) -> Result<FlowField> {
        let mut v = Array3::zeros((2, h, w));
        for y in 0..h {
            for x in 0..w {
                let (tx, ty) = self.apply(x as f64, y as f64);
                v[[0, y, x]] = (tx - x as f64) as f32;
                v[[1, y, x]] = (ty - y as f64) as f32;
            }
        }
        FlowField::new(v)
    }
}

impl std::str::FromStr for Motion {
    type Err = Error;

    /// `translate:dx,dy`, `rotate:angle,cx,cy` (radians) or `zoom:s,cx,cy`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse motion {s:?}"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let m = match (kind.trim(), nums.as_slice()) {
            ("translate", [dx, dy]) => Motion::Translate { dx: *dx, dy: *dy },
            ("rotate", [angle, cx, cy]) => Motion::Rotate {
                angle: *angle,
                cx: *cx,
                cy: *cy,
            },
            ("zoom", [scale, cx, cy]) => Motion::Zoom {
                scale: *scale,
                cx: *cx,
                cy: *cy,
            },
            _ => return Err(bad()),
        };
        m.validate()?;
        Ok(m)
    }
}

/// Analytically exact forward/backward fields for `motion` on an `h x w` grid.
pub fn synth_flow(motion: Motion, h: usize, w: usize) -> Result<FlowPair> {
    motion.validate()?;
    if h == 0 || w == 0 {
        return Err(Error::invalid("flow grid must be non-empty"));
    }
    FlowPair::new(motion.field(h, w)?, motion.inverse().field(h, w)?, 0)
}

/// `count` identical pairs, labelled `0..count`.
pub fn synth_flows(motion: Motion, h: usize, w: usize, count: usize) -> Result<Vec<FlowPair>> {
    let pair = synth_flow(motion, h, w)?;
    Ok((0..count)
        .map(|i| FlowPair {
            forward: pair.forward.clone().linking(FlowDirection::Forward, i),
            backward: pair.backward.clone().linking(FlowDirection::Backward, i),
        })
        .collect())
}
