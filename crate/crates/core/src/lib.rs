//! Training-free building blocks of a latent-diffusion video upscaler.
//!
//! * [`schedule`]: v-prediction noise schedules, DDIM steps and guidance.
//! * [`flow`] and [`propagate`]: flow consistency masks and recurrent
//!   flow-guided propagation of the predicted clean latent.
//! * [`sampler`]: tiled, segmented sampling with a pluggable denoiser, plus a
//!   toy codec and two reference denoisers.
//! * [`color`], [`metrics`], [`degrade`]: wavelet color correction,
//!   PSNR/SSIM/warping error, and synthetic degradations.
//! * [`tensorio`]: PNG frame sequences, `.flo` flows and latent files.
//!
//! ```
//! use uav::{sample, embed, oracle_denoiser, SamplerConfig, Video};
//!
//! let lr = Video::constant(2, 8, 8, 0.5).unwrap();
//! let hr = sample(&lr, &oracle_denoiser(embed(&lr)), &SamplerConfig::default(), &[]).unwrap();
//! assert_eq!(hr.shape(), [2, 3, 32, 32]);
//! ```

pub mod cli;
pub mod color;
pub mod config;
pub mod degrade;
pub mod error;
pub mod flow;
pub mod metrics;
pub mod propagate;
mod resample;
pub mod sampler;
pub mod schedule;
pub mod tensor;
pub mod tensorio;

pub use error::{Error, Result};
pub use flow::{FlowField, FlowPair, Motion};
pub use propagate::{PropagationConfig, Propagator};
pub use sampler::{embed, oracle_denoiser, procedural_denoiser, sample, sample_latent, Denoiser, SamplerConfig};
pub use schedule::{Condition, NoiseSchedule, Prompt};
pub use tensor::{LatentVideo, Video};
