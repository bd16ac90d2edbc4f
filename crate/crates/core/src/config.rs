//! Flat TOML run configuration mirroring the CLI flags.
//!
//! Every key is a flag name without the leading dashes:
//!
//! ```toml
//! input = "clip/manifest.json"
//! denoiser = "procedural"
//! steps = 30
//! tstar = "middle"
//! beta = 0.5
//! ```
//!
//! Flags given on the command line override keys from the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{
    scale_window, EARLY_PROPAGATION, LATE_PROPAGATION, MIDDLE_PROPAGATION, REFERENCE_STEPS,
};

macro_rules! settings {
    (
        $(#[$meta:meta])*
        pub struct $name:ident {
            $( $(#[$fmeta:meta])* $field:ident : $ty:ty, )*
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, rename_all = "kebab-case")]
        pub struct $name {
            $(
                $(#[$fmeta])*
                #[arg(long)]
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl Overlay for $name {
            fn overlay(self, top: Self) -> Self {
                $name { $( $field: top.$field.or(self.$field), )* }
            }
        }
    };
}

/// Field-wise merge where `top` wins.
pub trait Overlay: Sized {
    fn overlay(self, top: Self) -> Self;
}

settings! {
    /// Options of `upscale`.
    pub struct UpscaleSettings {
        /// Frame manifest of the low-resolution input.
        input: PathBuf,
        /// Output directory for the upscaled frame sequence.
        output: PathBuf,
        /// Directory of flow pairs on the input grid.
        flows: PathBuf,
        /// Synthesize flows from a motion instead: translate:dx,dy | rotate:a,cx,cy | zoom:s,cx,cy
        motion: String,
        /// oracle | procedural
        denoiser: String,
        /// Latent file the oracle denoiser reproduces (defaults to the embedded input).
        target: PathBuf,
        steps: usize,
        /// Propagation positions: none | early | middle | late | comma-separated list.
        tstar: String,
        beta: f64,
        delta: f64,
        /// forward-then-backward | forward | backward
        order: String,
        noise_level: usize,
        prompt_seed: u64,
        guidance_scale: f64,
        tile: usize,
        tile_overlap: usize,
        segment: usize,
        segment_overlap: usize,
        /// Enable wavelet color correction, optionally with a level count.
        #[arg(num_args = 0..=1, default_missing_value = "5")]
        color_fix: usize,
        seed: u64,
        /// linear | scaled-linear
        schedule: String,
        train_steps: usize,
        beta_start: f64,
        beta_end: f64,
        detail_gain: f64,
        threads: usize,
    }
}

settings! {
    /// Options of `metrics`.
    pub struct MetricsSettings {
        /// Reference frame manifest.
        r#ref: PathBuf,
        /// Test frame manifest.
        test: PathBuf,
        /// Flow directory on the test grid; enables the warping error.
        flows: PathBuf,
        /// Synthesize flows from a motion instead.
        motion: String,
        delta: f64,
        /// Also write the temporal profile of this row of both videos.
        profile_row: usize,
        /// Directory for the profile PNGs.
        profile_dir: PathBuf,
        threads: usize,
    }
}

settings! {
    /// Options of `degrade`.
    pub struct DegradeSettings {
        input: PathBuf,
        output: PathBuf,
        blur_sigma: f64,
        scale: usize,
        noise_sigma: f64,
        seed: u64,
        threads: usize,
    }
}

settings! {
    /// Options of `profile`.
    pub struct ProfileSettings {
        input: PathBuf,
        row: usize,
        /// PNG path of the profile image.
        output: PathBuf,
        threads: usize,
    }
}

settings! {
    /// Options of `flow-check`.
    pub struct FlowCheckSettings {
        /// Forward flow file (with --backward).
        forward: PathBuf,
        /// Backward flow file (with --forward).
        backward: PathBuf,
        /// Flow directory.
        flows: PathBuf,
        /// Synthesize a pair from a motion instead.
        motion: String,
        width: usize,
        height: usize,
        delta: f64,
        threads: usize,
    }
}

/// Reads a flat TOML settings document.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        what: "config",
        message: e.to_string(),
    })
}

/// File settings (if any) overlaid by flag settings.
pub fn resolve<T: DeserializeOwned + Overlay + Default>(file: Option<&Path>, flags: T) -> Result<T> {
    match file {
        Some(p) => Ok(load::<T>(p)?.overlay(flags)),
        None => Ok(flags),
    }
}

pub fn to_toml<T: Serialize>(settings: &T) -> Result<String> {
    toml::to_string(settings).map_err(|e| Error::Parse {
        what: "config",
        message: e.to_string(),
    })
}

/// Turns a `tstar` value into positions for an `n`-step run. Named windows
/// are rescaled from the reference step count; explicit lists are taken as is.
pub fn parse_tstar(spec: &str, n: usize) -> Result<Vec<usize>> {
    let named = |w: &[usize]| scale_window(w, REFERENCE_STEPS, n);
    match spec.trim() {
        "none" | "" => Ok(Vec::new()),
        "early" => Ok(named(&EARLY_PROPAGATION)),
        "middle" => Ok(named(&MIDDLE_PROPAGATION)),
        "late" => Ok(named(&LATE_PROPAGATION)),
        list => list
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad propagation position {p:?}")))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "steps = 20\nbeta = 0.25\ntstar = \"late\"\ncolor-fix = 4\n").unwrap();
        let flags = UpscaleSettings {
            steps: Some(10),
            ..Default::default()
        };
        let s = resolve(Some(&path), flags).unwrap();
        assert_eq!(s.steps, Some(10));
        assert_eq!(s.beta, Some(0.25));
        assert_eq!(s.tstar.as_deref(), Some("late"));
        assert_eq!(s.color_fix, Some(4));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "stepz = 20\n").unwrap();
        let err = resolve(Some(&path), UpscaleSettings::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { what: "config", .. }));
    }

    #[test]
    fn settings_round_trip_through_toml() {
        let s = UpscaleSettings {
            noise_level: Some(50),
            tstar: Some("3,4".into()),
            ..Default::default()
        };
        let text = to_toml(&s).unwrap();
        assert!(text.contains("noise-level = 50"));
        assert_eq!(toml::from_str::<UpscaleSettings>(&text).unwrap(), s);
    }

    #[test]
    fn tstar_forms() {
        assert_eq!(parse_tstar("middle", 30).unwrap(), vec![14, 15, 16, 17]);
        assert_eq!(parse_tstar("early", 30).unwrap(), vec![4, 5, 6, 7]);
        assert_eq!(parse_tstar("late", 30).unwrap(), vec![24, 25, 26, 27]);
        assert_eq!(parse_tstar("middle", 60).unwrap(), (28..36).collect::<Vec<_>>());
        assert_eq!(parse_tstar("none", 30).unwrap(), Vec::<usize>::new());
        assert_eq!(parse_tstar("1, 3", 30).unwrap(), vec![1, 3]);
        assert!(parse_tstar("x", 30).is_err());
    }
}
