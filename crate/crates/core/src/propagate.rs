//! Training-free recurrent latent propagation.
//!
//! Each frame's predicted clean latent is fused with the flow-warped,
//! already-updated previous frame wherever the flow passes the
//! forward-backward check:
//!
//! ```text
//! z~_i = [ W(z~_{i-1}, f_{i->i-1}) * beta + z_i * (1 - beta) ] * M_i + z_i * (1 - M_i)
//! ```
//!
//! The backward pass mirrors this from the last frame using `f_{i->i+1}`.
//! `M_i` lives on frame `i`'s grid: it is the consistency check led by the
//! flow used for warping, so a sample that would be fetched from outside
//! the grid is never fused.

use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_same_shape, Error, Result};
use crate::flow::{warp_mask, warp_nearest, FlowField, FlowPair, ValidityMask};
use crate::tensor::LatentVideo;

pub const DEFAULT_BETA: f64 = 0.5;
pub const DEFAULT_DELTA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationOrder {
    #[default]
    ForwardThenBackward,
    ForwardOnly,
    BackwardOnly,
}

impl std::str::FromStr for PropagationOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward_then_backward" | "bidirectional" => Ok(PropagationOrder::ForwardThenBackward),
            "forward_only" | "forward" => Ok(PropagationOrder::ForwardOnly),
            "backward_only" | "backward" => Ok(PropagationOrder::BackwardOnly),
            _ => Err(Error::invalid(format!("unknown propagation order {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    /// Weight of the propagated (warped) latent.
    pub beta: f64,
    /// Consistency threshold in squared pixels.
    pub delta: f64,
    pub order: PropagationOrder,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            beta: DEFAULT_BETA,
            delta: DEFAULT_DELTA,
            order: PropagationOrder::ForwardThenBackward,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("delta must be finite and > 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Flows and their validity masks, prepared once for a whole video.
#[derive(Debug, Clone)]
pub struct Propagator {
    cfg: PropagationConfig,
    flows: Vec<FlowPair>,
    /// `forward_masks[i - 1]` gates frame `i` in the forward pass.
    forward_masks: Vec<ValidityMask>,
    /// `backward_masks[i]` gates frame `i` in the backward pass.
    backward_masks: Vec<ValidityMask>,
    dims: (usize, usize),
}

pub(crate) fn check_flow_count(frames: usize, flows: usize) -> Result<()> {
    let expected = frames.saturating_sub(1);
    if flows < expected {
        Err(Error::MissingFlow(format!(
            "{frames} frames need {expected} flow pairs, got {flows}"
        )))
    } else if flows > expected {
        Err(Error::FlowCountMismatch {
            expected,
            found: flows,
        })
    } else {
        Ok(())
    }
}

impl Propagator {
    /// Prepares propagation for a `frames`-long video on an `h x w` latent grid.
    pub fn new(flows: &[FlowPair], cfg: PropagationConfig, frames: usize, h: usize, w: usize) -> Result<Self> {
        cfg.validate()?;
        check_flow_count(frames, flows.len())?;
        let mut forward_masks = Vec::with_capacity(flows.len());
        let mut backward_masks = Vec::with_capacity(flows.len());
        for pair in flows {
            ensure_same_shape("propagation flow", &[h, w], &[pair.dims().0, pair.dims().1])?;
            ensure_same_shape(
                "propagation flow",
                &[h, w],
                &[pair.backward.height(), pair.backward.width()],
            )?;
            forward_masks.push(warp_mask(&pair.backward, &pair.forward, cfg.delta)?);
            backward_masks.push(warp_mask(&pair.forward, &pair.backward, cfg.delta)?);
        }
        Ok(Propagator {
            cfg,
            flows: flows.to_vec(),
            forward_masks,
            backward_masks,
            dims: (h, w),
        })
    }

    pub fn config(&self) -> &PropagationConfig {
        &self.cfg
    }

    pub fn forward_masks(&self) -> &[ValidityMask] {
        &self.forward_masks
    }

    pub fn backward_masks(&self) -> &[ValidityMask] {
        &self.backward_masks
    }

    fn check(&self, z0: &LatentVideo) -> Result<()> {
        check_flow_count(z0.frames(), self.flows.len())?;
        ensure_same_shape(
            "propagate",
            &[z0.height(), z0.width()],
            &[self.dims.0, self.dims.1],
        )
    }

    /// One recurrent pass in `direction`.
    pub fn run_direction(&self, z0: &LatentVideo, direction: Direction) -> Result<LatentVideo> {
        self.check(z0)?;
        let beta = self.cfg.beta;
        let mut data = z0.data().clone();
        if beta == 0.0 || z0.frames() < 2 {
            return Ok(LatentVideo::from_finite(data));
        }
        let t = z0.frames();
        let order: Vec<usize> = match direction {
            Direction::Forward => (1..t).collect(),
            Direction::Backward => (0..t - 1).rev().collect(),
        };
        for i in order {
            let (src, flow, mask): (usize, &FlowField, &ValidityMask) = match direction {
                Direction::Forward => (i - 1, &self.flows[i - 1].backward, &self.forward_masks[i - 1]),
                Direction::Backward => (i + 1, &self.flows[i].forward, &self.backward_masks[i]),
            };
            if mask.is_empty() {
                continue;
            }
            let warped: Array3<f64> = warp_nearest(data.index_axis(Axis(0), src), flow)?;
            let mut cur = data.index_axis_mut(Axis(0), i);
            fuse(&mut cur, &warped, mask, beta);
        }
        Ok(LatentVideo::from_finite(data))
    }

    /// Runs the configured pass order; the backward pass consumes the
    /// forward pass's output.
    pub fn run(&self, z0: &LatentVideo) -> Result<LatentVideo> {
        match self.cfg.order {
            PropagationOrder::ForwardOnly => self.run_direction(z0, Direction::Forward),
            PropagationOrder::BackwardOnly => self.run_direction(z0, Direction::Backward),
            PropagationOrder::ForwardThenBackward => {
                let fwd = self.run_direction(z0, Direction::Forward)?;
                self.run_direction(&fwd, Direction::Backward)
            }
        }
    }
}

fn fuse(cur: &mut ndarray::ArrayViewMut3<'_, f64>, warped: &Array3<f64>, mask: &ValidityMask, beta: f64) {
    let keep = 1.0 - beta;
    let (c, h, w) = cur.dim();
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                if mask.get(y, x) {
                    let z = cur[[ch, y, x]];
                    cur[[ch, y, x]] = warped[[ch, y, x]] * beta + z * keep;
                }
            }
        }
    }
}

pub fn propagate_direction(
    z0: &LatentVideo,
    flows: &[FlowPair],
    cfg: &PropagationConfig,
    direction: Direction,
) -> Result<LatentVideo> {
    Propagator::new(flows, *cfg, z0.frames(), z0.height(), z0.width())?.run_direction(z0, direction)
}

/// Forward pass followed by a backward pass over its output.
pub fn propagate_bidirectional(z0: &LatentVideo, flows: &[FlowPair], cfg: &PropagationConfig) -> Result<LatentVideo> {
    let cfg = PropagationConfig {
        order: PropagationOrder::ForwardThenBackward,
        ..*cfg
    };
    Propagator::new(flows, cfg, z0.frames(), z0.height(), z0.width())?.run(z0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{synth_flows, Motion};
    use ndarray::Array4;

    fn constant_frames(values: &[f64], h: usize, w: usize) -> LatentVideo {
        LatentVideo::new(Array4::from_shape_fn((values.len(), 2, h, w), |(t, _, _, _)| values[t])).unwrap()
    }

    fn identity_flows(t: usize, h: usize, w: usize) -> Vec<FlowPair> {
        (0..t - 1).map(|i| FlowPair::zeros(h, w, i)).collect()
    }

    #[test]
    fn zero_beta_is_identity() {
        let z = LatentVideo::new(Array4::from_shape_fn((3, 2, 4, 4), |(t, c, y, x)| {
            (t * 7 + c * 3 + y * 2 + x) as f64 * -0.31
        }))
        .unwrap();
        let flows = synth_flows(Motion::Translate { dx: 1.0, dy: 0.0 }, 4, 4, 2).unwrap();
        let cfg = PropagationConfig {
            beta: 0.0,
            ..Default::default()
        };
        assert_eq!(propagate_bidirectional(&z, &flows, &cfg).unwrap(), z);
    }

    #[test]
    fn two_frame_average() {
        let z = constant_frames(&[2.0, 0.0], 3, 3);
        let out = propagate_direction(&z, &identity_flows(2, 3, 3), &PropagationConfig::default(), Direction::Forward)
            .unwrap();
        assert!(out.frame(1).iter().all(|&v| v == 1.0));
        assert!(out.frame(0).iter().all(|&v| v == 2.0));
    }

    #[test]
    fn full_beta_copies_first_frame() {
        let z = constant_frames(&[5.0, -1.0, 3.0], 2, 2);
        let cfg = PropagationConfig {
            beta: 1.0,
            ..Default::default()
        };
        let out = propagate_direction(&z, &identity_flows(3, 2, 2), &cfg, Direction::Forward).unwrap();
        assert!(out.data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn backward_mirrors_forward() {
        let z = constant_frames(&[0.0, 4.0], 2, 2);
        let out = propagate_direction(&z, &identity_flows(2, 2, 2), &PropagationConfig::default(), Direction::Backward)
            .unwrap();
        assert!(out.frame(0).iter().all(|&v| v == 2.0));
        assert!(out.frame(1).iter().all(|&v| v == 4.0));
    }

    #[test]
    fn empty_masks_are_identity() {
        let z = constant_frames(&[1.0, 2.0, 3.0], 3, 3);
        // inconsistent pair: forward (1,0) with zero backward gives error 1 everywhere
        let flows: Vec<FlowPair> = (0..2)
            .map(|i| {
                FlowPair::new(
                    FlowField::constant(3, 3, 1.0, 0.0).unwrap(),
                    FlowField::constant(3, 3, 0.0, 1.0).unwrap(),
                    i,
                )
                .unwrap()
            })
            .collect();
        let cfg = PropagationConfig {
            delta: 1e-9,
            ..Default::default()
        };
        assert_eq!(propagate_bidirectional(&z, &flows, &cfg).unwrap(), z);
    }

    #[test]
    fn static_scene_is_fixed_point() {
        let z = LatentVideo::new(Array4::from_shape_fn((4, 3, 5, 5), |(_, c, y, x)| {
            (c as f64 + 1.0) * (y as f64 - x as f64 * 0.5)
        }))
        .unwrap();
        let out = propagate_bidirectional(&z, &identity_flows(4, 5, 5), &PropagationConfig::default()).unwrap();
        assert!(out.max_abs_diff(&z).unwrap() < 1e-12);
    }

    #[test]
    fn flow_count_and_shape_errors() {
        let z = constant_frames(&[1.0, 2.0, 3.0], 3, 3);
        let cfg = PropagationConfig::default();
        assert!(matches!(
            propagate_bidirectional(&z, &identity_flows(2, 3, 3), &cfg),
            Err(Error::MissingFlow(_))
        ));
        assert!(matches!(
            propagate_bidirectional(&z, &identity_flows(4, 3, 3), &cfg),
            Err(Error::FlowCountMismatch { .. })
        ));
        assert!(matches!(
            propagate_bidirectional(&z, &identity_flows(3, 3, 4), &cfg),
            Err(Error::ShapeMismatch { .. })
        ));
        let bad = PropagationConfig {
            beta: 1.5,
            ..cfg
        };
        assert!(propagate_bidirectional(&z, &identity_flows(3, 3, 3), &bad).is_err());
    }
}
