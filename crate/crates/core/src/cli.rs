//! Command-line front end.
//!
//! Every subcommand prints one JSON document on stdout when it succeeds. On
//! failure it prints `{"code", "message", "context"}` on stderr and exits
//! with 2 for usage errors, 1 for everything else.
//!
//! Output schemas:
//!
//! * `upscale`: [`UpscaleReport`]
//! * `metrics`: [`MetricsReport`] (a [`MetricReport`] plus profile paths)
//! * `degrade`: [`SequenceReport`]
//! * `profile`: [`ProfileReport`]
//! * `flow-check`: [`FlowCheckReport`]

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::color::DEFAULT_LEVELS;
use crate::config::{self, parse_tstar, DegradeSettings, FlowCheckSettings, MetricsSettings, Overlay, ProfileSettings, UpscaleSettings};
use crate::degrade::{degrade, DegradeParams};
use crate::error::{Error, Result};
use crate::flow::{consistency_error, synth_flows, validity_mask, FlowField, FlowPair, Motion};
use crate::metrics::{evaluate, temporal_profile, MetricReport};
use crate::propagate::{PropagationConfig, DEFAULT_BETA, DEFAULT_DELTA};
use crate::sampler::codec::DOWNSCALE;
use crate::sampler::denoiser::DEFAULT_DETAIL_GAIN;
use crate::sampler::{embed, oracle_denoiser, procedural_denoiser, sample, Denoiser, PlanParams, SamplerConfig};
use crate::schedule::{
    Condition, NoiseSchedule, Prompt, ScheduleKind, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_INFERENCE_STEPS,
    DEFAULT_TRAIN_STEPS,
};
use crate::tensor::Video;
use crate::tensorio::{read_flow, read_flow_dir, read_frame_sequence, read_latent, write_frame_sequence, write_rgb_image};

/// Name of the effective-settings record written next to upscaled frames.
pub const RUN_RECORD_NAME: &str = "run.toml";

#[derive(Debug, Parser)]
#[command(name = "uav", version, about = "Latent-diffusion video upscaling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct WithConfig<T: Args> {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: T,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Upscale a frame sequence 4x with the toy diffusion pipeline.
    Upscale(WithConfig<UpscaleSettings>),
    /// PSNR, SSIM and flow warping error of a test sequence against a reference.
    Metrics(WithConfig<MetricsSettings>),
    /// Blur, downscale and add noise to a frame sequence.
    Degrade(WithConfig<DegradeSettings>),
    /// Stack one pixel row of every frame into an image.
    Profile(WithConfig<ProfileSettings>),
    /// Forward-backward consistency statistics of flow pairs.
    FlowCheck(WithConfig<FlowCheckSettings>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpscaleReport {
    pub manifest: PathBuf,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub denoiser: String,
    pub steps: Vec<usize>,
    pub propagation_positions: Vec<usize>,
    pub seed: u64,
    pub color_fix: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub metrics: MetricReport,
    pub profiles: Option<ProfilePaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePaths {
    pub row: usize,
    pub reference: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    pub manifest: PathBuf,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub output: PathBuf,
    pub row: usize,
    pub frames: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionStats {
    pub max_error: f64,
    pub mean_error: f64,
    pub valid_fraction: f64,
    pub out_of_bounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStats {
    pub pair: usize,
    /// Error on frame `i`, led by the forward flow.
    pub forward: DirectionStats,
    /// Error on frame `i + 1`, led by the backward flow.
    pub backward: DirectionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCheckReport {
    pub height: usize,
    pub width: usize,
    pub delta: f64,
    pub max_consistency_error: f64,
    pub pairs: Vec<PairStats>,
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            report_error(&Error::Usage(first), None);
            return 2;
        }
    };
    let name = command_name(&cli.command);
    match dispatch(cli.command) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("report serializes"));
            0
        }
        Err(e) => {
            report_error(&e, Some(name));
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Upscale(_) => "upscale",
        Command::Metrics(_) => "metrics",
        Command::Degrade(_) => "degrade",
        Command::Profile(_) => "profile",
        Command::FlowCheck(_) => "flow-check",
    }
}

fn error_context(e: &Error) -> serde_json::Value {
    match e {
        Error::MissingFile { path } | Error::Io { path, .. } | Error::Image { path, .. } => {
            json!({ "path": path })
        }
        Error::DimensionMismatch {
            index,
            path,
            expected_w,
            expected_h,
            found_w,
            found_h,
        } => json!({
            "index": index, "path": path,
            "expected": [expected_w, expected_h], "found": [found_w, found_h],
        }),
        Error::ShapeMismatch { op, left, right } => json!({ "op": op, "left": left, "right": right }),
        Error::FlowCountMismatch { expected, found } => json!({ "expected": expected, "found": found }),
        Error::NoiseLevelOutOfRange { tau, max } => json!({ "tau": tau, "max": max }),
        Error::RowOutOfRange { row, height } => json!({ "row": row, "height": height }),
        Error::DimensionNotDivisible { h, w, factor } => json!({ "height": h, "width": w, "factor": factor }),
        Error::TooSmall { what, h, w, min } => json!({ "what": what, "height": h, "width": w, "min": min }),
        _ => json!({}),
    }
}

fn report_error(e: &Error, command: Option<&str>) {
    let mut context = error_context(e);
    if let (Some(c), Some(map)) = (command, context.as_object_mut()) {
        map.insert("command".into(), json!(c));
    }
    let doc = json!({ "code": e.code(), "message": e.to_string(), "context": context });
    eprintln!("{doc}");
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Usage(format!("--{flag} is required (flag or config key)")))
}

/// Resolves the thread count from settings, then `UAV_THREADS`, then all cores.
fn thread_count(setting: Option<usize>) -> Result<usize> {
    if let Some(n) = setting {
        return Ok(n);
    }
    match std::env::var("UAV_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("UAV_THREADS must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(threads)?)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

fn dispatch(command: Command) -> Result<serde_json::Value> {
    fn settings<T: Args + Overlay + Default + serde::de::DeserializeOwned>(w: WithConfig<T>) -> Result<T> {
        config::resolve(w.config.as_deref(), w.settings)
    }
    let value = match command {
        Command::Upscale(w) => {
            let s = settings(w)?;
            serde_json::to_value(in_pool(s.threads, || upscale(&s))?)
        }
        Command::Metrics(w) => {
            let s = settings(w)?;
            serde_json::to_value(in_pool(s.threads, || metrics(&s))?)
        }
        Command::Degrade(w) => {
            let s = settings(w)?;
            serde_json::to_value(in_pool(s.threads, || degrade_cmd(&s))?)
        }
        Command::Profile(w) => {
            let s = settings(w)?;
            serde_json::to_value(in_pool(s.threads, || profile(&s))?)
        }
        Command::FlowCheck(w) => {
            let s = settings(w)?;
            serde_json::to_value(in_pool(s.threads, || flow_check(&s))?)
        }
    };
    Ok(value.expect("report serializes"))
}

/// Flows from a directory or a motion model, if either is given.
fn load_flows(dir: Option<&Path>, motion: Option<&str>, video: &Video) -> Result<Option<Vec<FlowPair>>> {
    match (dir, motion) {
        (Some(_), Some(_)) => Err(Error::Usage("give either --flows or --motion, not both".into())),
        (Some(d), None) => read_flow_dir(d).map(Some),
        (None, Some(m)) => {
            let m: Motion = m.parse()?;
            synth_flows(m, video.height(), video.width(), video.len() - 1).map(Some)
        }
        (None, None) => Ok(None),
    }
}

/// Builds the sampler configuration an `upscale` run uses.
pub fn sampler_config(s: &UpscaleSettings, have_flows: bool) -> Result<SamplerConfig> {
    let kind: ScheduleKind = s.schedule.as_deref().unwrap_or("scaled-linear").parse()?;
    let mut schedule = NoiseSchedule::new(
        kind,
        s.train_steps.unwrap_or(DEFAULT_TRAIN_STEPS),
        s.beta_start.unwrap_or(DEFAULT_BETA_START),
        s.beta_end.unwrap_or(DEFAULT_BETA_END),
    )?;
    let steps = s.steps.unwrap_or(DEFAULT_INFERENCE_STEPS);
    schedule.set_inference_steps(steps)?;
    let default_tstar = if have_flows { "middle" } else { "none" };
    schedule.set_propagation_positions(parse_tstar(s.tstar.as_deref().unwrap_or(default_tstar), steps)?)?;

    let propagation = PropagationConfig {
        beta: s.beta.unwrap_or(DEFAULT_BETA),
        delta: s.delta.unwrap_or(DEFAULT_DELTA),
        order: s.order.as_deref().map(str::parse).transpose()?.unwrap_or_default(),
    };
    propagation.validate()?;

    let defaults = Condition::default();
    let condition = Condition {
        prompt: s.prompt_seed.map(Prompt::from_seed).unwrap_or(Prompt::Absent),
        noise_level: s.noise_level.unwrap_or(defaults.noise_level),
        guidance_scale: s.guidance_scale.unwrap_or(defaults.guidance_scale),
    };
    condition.validate(&schedule)?;

    let d = PlanParams::default();
    let plan = PlanParams {
        tile_size: s.tile.unwrap_or(d.tile_size),
        tile_overlap: s.tile_overlap.unwrap_or(d.tile_overlap),
        segment_len: s.segment.unwrap_or(d.segment_len),
        segment_overlap: s.segment_overlap.unwrap_or(d.segment_overlap),
    };
    Ok(SamplerConfig {
        schedule,
        condition,
        propagation,
        plan,
        rng_seed: s.seed.unwrap_or(0),
        color_fix: s.color_fix,
    })
}

fn upscale(s: &UpscaleSettings) -> Result<UpscaleReport> {
    let input = read_frame_sequence(required(s.input.as_ref(), "input")?)?;
    let output = required(s.output.as_ref(), "output")?;
    let flows = load_flows(s.flows.as_deref(), s.motion.as_deref(), &input)?;
    let cfg = sampler_config(s, flows.is_some())?;
    if let Some(levels) = cfg.color_fix {
        if levels == 0 {
            return Err(Error::invalid("--color-fix levels must be >= 1"));
        }
    }
    let name = s.denoiser.clone().unwrap_or_else(|| "procedural".into());
    let denoiser: Box<dyn Denoiser> = match name.as_str() {
        "oracle" => {
            let target = match &s.target {
                Some(p) => read_latent(p)?,
                None => embed(&input),
            };
            Box::new(oracle_denoiser(target))
        }
        "procedural" => {
            let d = procedural_denoiser(s.detail_gain.unwrap_or(DEFAULT_DETAIL_GAIN)).with_seed(s.seed.unwrap_or(0));
            d.validate()?;
            Box::new(d)
        }
        other => return Err(Error::Usage(format!("unknown denoiser {other:?}; expected oracle or procedural"))),
    };
    let video = sample(&input, denoiser.as_ref(), &cfg, flows.as_deref().unwrap_or(&[]))?;
    let manifest = write_frame_sequence(&video, output)?;

    let record = UpscaleSettings {
        threads: None,
        ..s.clone()
    };
    let record_path = output.join(RUN_RECORD_NAME);
    std::fs::write(&record_path, config::to_toml(&record)?).map_err(|e| Error::io(&record_path, e))?;

    Ok(UpscaleReport {
        manifest,
        frames: video.len(),
        width: video.width(),
        height: video.height(),
        denoiser: name,
        steps: cfg.schedule.inference_steps().to_vec(),
        propagation_positions: cfg.schedule.propagation_steps().iter().copied().collect(),
        seed: cfg.rng_seed,
        color_fix: cfg.color_fix,
    })
}

fn metrics(s: &MetricsSettings) -> Result<MetricsReport> {
    let reference = read_frame_sequence(required(s.r#ref.as_ref(), "ref")?)?;
    let test = read_frame_sequence(required(s.test.as_ref(), "test")?)?;
    let flows = load_flows(s.flows.as_deref(), s.motion.as_deref(), &test)?;
    let report = evaluate(&reference, &test, flows.as_deref(), s.delta.unwrap_or(DEFAULT_DELTA))?;
    let profiles = match s.profile_row {
        Some(row) => {
            let dir = required(s.profile_dir.as_ref(), "profile-dir")?;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let paths = ProfilePaths {
                row,
                reference: dir.join(format!("profile_ref_row{row}.png")),
                test: dir.join(format!("profile_test_row{row}.png")),
            };
            write_rgb_image(&temporal_profile(&reference, row)?, &paths.reference)?;
            write_rgb_image(&temporal_profile(&test, row)?, &paths.test)?;
            Some(paths)
        }
        None => None,
    };
    Ok(MetricsReport {
        metrics: report,
        profiles,
    })
}

fn degrade_cmd(s: &DegradeSettings) -> Result<SequenceReport> {
    let input = read_frame_sequence(required(s.input.as_ref(), "input")?)?;
    let output = required(s.output.as_ref(), "output")?;
    let d = DegradeParams::default();
    let lq = degrade(
        &input,
        s.blur_sigma.unwrap_or(d.blur_sigma),
        s.scale.unwrap_or(DOWNSCALE),
        s.noise_sigma.unwrap_or(d.noise_sigma),
        s.seed.unwrap_or(d.seed),
    )?;
    let manifest = write_frame_sequence(&lq, output)?;
    Ok(SequenceReport {
        manifest,
        frames: lq.len(),
        width: lq.width(),
        height: lq.height(),
    })
}

fn profile(s: &ProfileSettings) -> Result<ProfileReport> {
    let video = read_frame_sequence(required(s.input.as_ref(), "input")?)?;
    let row = required(s.row, "row")?;
    let output = required(s.output.clone(), "output")?;
    let img = temporal_profile(&video, row)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_rgb_image(&img, &output)?;
    Ok(ProfileReport {
        output,
        row,
        frames: video.len(),
        width: video.width(),
    })
}

fn direction_stats(lead: &FlowField, other: &FlowField, delta: f64) -> Result<DirectionStats> {
    let map = consistency_error(lead, other)?;
    let mask = validity_mask(&map, delta)?;
    Ok(DirectionStats {
        max_error: map.max_error(),
        mean_error: map.mean_error(),
        valid_fraction: mask.fraction(),
        out_of_bounds: map.out_of_bounds.iter().filter(|&&b| b).count(),
    })
}

fn flow_check(s: &FlowCheckSettings) -> Result<FlowCheckReport> {
    let pairs = match (&s.forward, &s.backward, &s.flows, &s.motion) {
        (Some(f), Some(b), None, None) => vec![FlowPair::new(read_flow(f)?, read_flow(b)?, 0)?],
        (None, None, Some(dir), None) => read_flow_dir(dir)?,
        (None, None, None, Some(m)) => {
            let w = required(s.width, "width")?;
            let h = required(s.height, "height")?;
            synth_flows(m.parse()?, h, w, 1)?
        }
        _ => {
            return Err(Error::Usage(
                "give exactly one of --forward with --backward, --flows, or --motion".into(),
            ))
        }
    };
    if pairs.is_empty() {
        return Err(Error::MissingFlow("no flow pairs found".into()));
    }
    let delta = s.delta.unwrap_or(DEFAULT_DELTA);
    let mut stats = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        stats.push(PairStats {
            pair: i,
            forward: direction_stats(&p.forward, &p.backward, delta)?,
            backward: direction_stats(&p.backward, &p.forward, delta)?,
        });
    }
    let (height, width) = pairs[0].dims();
    let max_consistency_error = stats
        .iter()
        .map(|p| p.forward.max_error.max(p.backward.max_error))
        .fold(0.0, f64::max);
    Ok(FlowCheckReport {
        height,
        width,
        delta,
        max_consistency_error,
        pairs: stats,
    })
}

/// Default wavelet level count used by `--color-fix` without a value.
pub const DEFAULT_COLOR_FIX_LEVELS: usize = DEFAULT_LEVELS;
