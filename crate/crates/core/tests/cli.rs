mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use uav::tensorio::{read_frame_sequence, write_flow, write_flow_dir, write_frame_sequence};

use common::{translating_scene, translation_flows};

fn uav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uav")).args(args).output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn err_json(out: &Output, code: i32) -> Value {
    assert_eq!(out.status.code(), Some(code), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(keys(&v), set(&["code", "message", "context"]));
    v
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn set(k: &[&str]) -> BTreeSet<String> {
    k.iter().map(|s| s.to_string()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Clip {
    _dir: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
    flows: PathBuf,
}

fn clip(frames: usize, size: usize) -> Clip {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let manifest = write_frame_sequence(&translating_scene(frames, size, size, 1, 1), root.join("in")).unwrap();
    let flows = root.join("flows");
    write_flow_dir(&translation_flows(frames, size, size, 1), &flows).unwrap();
    Clip {
        _dir: dir,
        root,
        manifest,
        flows,
    }
}

#[test]
fn upscale_oracle_writes_four_times_larger_frames() {
    let c = clip(16, 64);
    let out = c.root.join("out");
    let v = ok_json(&uav(&["upscale", "--input", s(&c.manifest), "--output", s(&out), "--denoiser", "oracle"]));
    assert_eq!(
        keys(&v),
        set(&["manifest", "frames", "width", "height", "denoiser", "steps", "propagation_positions", "seed", "color_fix"])
    );
    assert_eq!((v["frames"].as_u64(), v["width"].as_u64(), v["height"].as_u64()), (Some(16), Some(256), Some(256)));
    assert_eq!(v["steps"].as_array().unwrap().len(), 30);
    assert_eq!(v["propagation_positions"], serde_json::json!([]));
    let video = read_frame_sequence(v["manifest"].as_str().unwrap()).unwrap();
    assert_eq!(video.shape(), [16, 3, 256, 256]);
    assert!(out.join(uav::cli::RUN_RECORD_NAME).exists());
}

#[test]
fn upscale_with_flows_uses_middle_window_and_config_file() {
    let c = clip(4, 16);
    let cfg = c.root.join("run.toml");
    std::fs::write(&cfg, "steps = 10\nbeta = 0.8\nseed = 3\ncolor-fix = 2\ndenoiser = \"procedural\"\n").unwrap();
    let out = c.root.join("out");
    let v = ok_json(&uav(&[
        "upscale", "--config", s(&cfg), "--input", s(&c.manifest), "--flows", s(&c.flows), "--output", s(&out),
        "--seed", "4",
    ]));
    assert_eq!(v["steps"].as_array().unwrap().len(), 10);
    assert_eq!(v["propagation_positions"], serde_json::json!([5]));
    assert_eq!(v["seed"], 4);
    assert_eq!(v["color_fix"], 2);
    let record = std::fs::read_to_string(out.join(uav::cli::RUN_RECORD_NAME)).unwrap();
    assert!(record.contains("seed = 4"));
    assert!(record.contains("beta = 0.8"));
}

#[test]
fn upscale_explicit_tstar_without_flows_fails() {
    let c = clip(3, 8);
    let v = err_json(
        &uav(&["upscale", "--input", s(&c.manifest), "--output", s(&c.root.join("o")), "--tstar", "2", "--steps", "5"]),
        1,
    );
    assert_eq!(v["code"], "MissingFlow");
}

#[test]
fn metrics_on_identical_sequences() {
    let c = clip(3, 16);
    let v = ok_json(&uav(&["metrics", "--ref", s(&c.manifest), "--test", s(&c.manifest)]));
    assert_eq!(keys(&v), set(&["psnr", "ssim", "e_warp", "per_frame", "profiles"]));
    assert_eq!(keys(&v["per_frame"]), set(&["psnr", "ssim", "e_warp"]));
    assert_eq!(v["psnr"], 100.0);
    assert_eq!(v["ssim"], 1.0);
    assert!(v["e_warp"].is_null());
    assert_eq!(v["per_frame"]["psnr"].as_array().unwrap().len(), 3);

    let prof = c.root.join("prof");
    let v = ok_json(&uav(&[
        "metrics", "--ref", s(&c.manifest), "--test", s(&c.manifest), "--flows", s(&c.flows), "--profile-row", "4",
        "--profile-dir", s(&prof),
    ]));
    assert!(v["e_warp"].as_f64().unwrap() < 1e-9);
    assert_eq!(v["per_frame"]["e_warp"].as_array().unwrap().len(), 2);
    assert_eq!(keys(&v["profiles"]), set(&["row", "reference", "test"]));
    let img = image::open(v["profiles"]["test"].as_str().unwrap()).unwrap();
    assert_eq!((img.width(), img.height()), (16, 3));
}

#[test]
fn degrade_and_profile() {
    let c = clip(2, 32);
    let out = c.root.join("lq");
    let v = ok_json(&uav(&["degrade", "--input", s(&c.manifest), "--output", s(&out), "--noise-sigma", "0"]));
    assert_eq!(keys(&v), set(&["manifest", "frames", "width", "height"]));
    assert_eq!((v["width"].as_u64(), v["height"].as_u64()), (Some(8), Some(8)));

    let png = c.root.join("p/row.png");
    let v = ok_json(&uav(&["profile", "--input", s(&c.manifest), "--row", "3", "--output", s(&png)]));
    assert_eq!(keys(&v), set(&["output", "row", "frames", "width"]));
    let img = image::open(&png).unwrap();
    assert_eq!((img.width(), img.height()), (32, 2));

    let v = err_json(&uav(&["profile", "--input", s(&c.manifest), "--row", "32", "--output", s(&png)]), 1);
    assert_eq!(v["code"], "RowOutOfRange");
    assert_eq!(v["context"]["height"], 32);

    let v = err_json(&uav(&["degrade", "--input", s(&c.manifest), "--output", s(&out), "--scale", "5"]), 1);
    assert_eq!(v["code"], "DimensionNotDivisible");
}

#[test]
fn flow_check_sources() {
    let v = ok_json(&uav(&["flow-check", "--motion", "translate:1,0", "--width", "12", "--height", "9"]));
    assert_eq!(keys(&v), set(&["height", "width", "delta", "max_consistency_error", "pairs"]));
    assert_eq!(v["max_consistency_error"], 0.0);
    let pair = &v["pairs"][0];
    assert_eq!(keys(pair), set(&["pair", "forward", "backward"]));
    assert_eq!(keys(&pair["forward"]), set(&["max_error", "mean_error", "valid_fraction", "out_of_bounds"]));

    let c = clip(3, 8);
    let v = ok_json(&uav(&["flow-check", "--flows", s(&c.flows)]));
    assert_eq!(v["pairs"].as_array().unwrap().len(), 2);

    let pair = &translation_flows(2, 5, 5, 2)[0];
    let (f, b) = (c.root.join("f.flo"), c.root.join("b.flo"));
    write_flow(&pair.forward, &f).unwrap();
    write_flow(&pair.backward, &b).unwrap();
    let v = ok_json(&uav(&["flow-check", "--forward", s(&f), "--backward", s(&b), "--delta", "0.5"]));
    assert_eq!(v["delta"], 0.5);
    assert_eq!(v["pairs"][0]["forward"]["out_of_bounds"], 10);
}

#[test]
fn errors_are_json_with_exit_codes() {
    let v = err_json(&uav(&["upscale", "--input", "/no/such/manifest.json", "--output", "/tmp/x"]), 1);
    assert_eq!(v["code"], "MissingFile");
    assert_eq!(v["context"]["path"], "/no/such/manifest.json");
    assert_eq!(v["context"]["command"], "upscale");

    assert_eq!(err_json(&uav(&["frobnicate"]), 2)["code"], "UsageError");
    assert_eq!(err_json(&uav(&["upscale", "--beta", "lots"]), 2)["code"], "UsageError");
    assert_eq!(err_json(&uav(&["metrics", "--test", "x"]), 2)["code"], "UsageError");
    assert_eq!(err_json(&uav(&["flow-check"]), 2)["code"], "UsageError");

    let c = clip(2, 8);
    let v = err_json(
        &uav(&["upscale", "--input", s(&c.manifest), "--output", s(&c.root.join("o")), "--denoiser", "magic"]),
        2,
    );
    assert_eq!(v["code"], "UsageError");
    let bad = c.root.join("bad.toml");
    std::fs::write(&bad, "no-such-key = 1\n").unwrap();
    let v = err_json(&uav(&["upscale", "--config", s(&bad)]), 1);
    assert_eq!(v["code"], "ParseFailure");
}

#[test]
fn help_exits_zero() {
    assert!(uav(&["--help"]).status.success());
    assert!(uav(&["upscale", "--help"]).status.success());
}
