//! Reading and writing frame sequences, flow fields and latent tensors.
//!
//! # Formats
//!
//! **Frame manifest** (`manifest.json`): either a bare JSON array of image
//! paths, or an object
//!
//! ```json
//! { "frames": ["frame_00000.png", "frame_00001.png"], "frame_rate": 24.0 }
//! ```
//!
//! Paths are relative to the manifest's directory. Frames are 8-bit RGB PNG;
//! samples map to `[0, 1]` as `value / 255`.
//!
//! **Flow** (`.flo`, Middlebury layout, little-endian): `f32` magic
//! `202021.25`, `i32` width, `i32` height, then `width * height` interleaved
//! `(x, y)` `f32` pairs in row-major order.
//!
//! **Flow directory**: pair `i` (frames `i` and `i + 1`) is stored as
//! `pair_{i:04}_forward.flo` (`f_{i -> i+1}`) and `pair_{i:04}_backward.flo`
//! (`f_{i+1 -> i}`).
//!
//! **Latent** (`.lat`): 8-byte ASCII magic `UAVLAT01`, four `u32` LE dims
//! `(T, C, H, W)`, then `T*C*H*W` `f32` LE values in `T, C, H, W` order.
//! Latents are held as `f64` in memory and narrowed to `f32` on write. The
//! step tag is not persisted.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Rgb};
use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowField, FlowPair};
use crate::tensor::{LatentVideo, Video};

pub const FLO_MAGIC: f32 = 202021.25;
pub const LATENT_MAGIC: &[u8; 8] = b"UAVLAT01";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_rate: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestDoc {
    List(Vec<String>),
    Full(Manifest),
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ManifestDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: "manifest",
        message: e.to_string(),
    })?;
    Ok(match doc {
        ManifestDoc::List(frames) => Manifest {
            frames,
            frame_rate: None,
        },
        ManifestDoc::Full(m) => m,
    })
}

pub fn read_frame_sequence(manifest_path: impl AsRef<Path>) -> Result<Video> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    if manifest.frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut decoded = Vec::with_capacity(manifest.frames.len());
    let mut dims: Option<(u32, u32)> = None;
    for (index, rel) in manifest.frames.iter().enumerate() {
        let path = base.join(rel);
        if !path.exists() {
            return Err(Error::MissingFile { path });
        }
        let img = image::open(&path)
            .map_err(|source| Error::Image {
                path: path.clone(),
                source,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        match dims {
            None => dims = Some((w, h)),
            Some((ew, eh)) if (ew, eh) != (w, h) => {
                return Err(Error::DimensionMismatch {
                    index,
                    path: rel.clone(),
                    expected_w: ew as usize,
                    expected_h: eh as usize,
                    found_w: w as usize,
                    found_h: h as usize,
                })
            }
            Some(_) => {}
        }
        decoded.push(img);
    }

    let (w, h) = dims.expect("at least one frame");
    let (w, h) = (w as usize, h as usize);
    let mut frames = Array4::<f32>::zeros((decoded.len(), 3, h, w));
    for (t, img) in decoded.iter().enumerate() {
        for (x, y, px) in img.enumerate_pixels() {
            for c in 0..3 {
                frames[[t, c, y as usize, x as usize]] = px[c] as f32 / 255.0;
            }
        }
    }
    let mut video = Video::new(frames)?;
    video.frame_rate = manifest.frame_rate;
    video.source_paths = manifest.frames;
    Ok(video)
}

/// Clamp to `[0, 1]`, then round to the nearest 8-bit level.
#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn frame_to_rgb8(video: &Video, t: usize) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let f = video.frame(t);
    let (h, w) = (video.height(), video.width());
    ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        Rgb([
            quantize(f[[0, y, x]]),
            quantize(f[[1, y, x]]),
            quantize(f[[2, y, x]]),
        ])
    })
}

fn save_png(img: &ImageBuffer<Rgb<u8>, Vec<u8>>, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            other => Error::Image {
                path: path.to_path_buf(),
                source: other,
            },
        })
}

/// Writes one PNG per frame plus `manifest.json` into `dir`, returning the
/// manifest path.
pub fn write_frame_sequence(video: &Video, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(video.len());
    for t in 0..video.len() {
        let name = format!("frame_{t:05}.png");
        save_png(&frame_to_rgb8(video, t), &dir.join(&name))?;
        names.push(name);
    }
    let manifest = Manifest {
        frames: names,
        frame_rate: video.frame_rate,
    };
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes an `H x W x 3` image (rows, columns, RGB) as PNG.
pub fn write_rgb_image(pixels: &Array3<f32>, path: impl AsRef<Path>) -> Result<()> {
    let (h, w, c) = pixels.dim();
    if c != 3 {
        return Err(Error::invalid(format!("expected H x W x 3 image, got {:?}", pixels.shape())));
    }
    let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        Rgb([
            quantize(pixels[[y, x, 0]]),
            quantize(pixels[[y, x, 1]]),
            quantize(pixels[[y, x, 2]]),
        ])
    });
    save_png(&img, path.as_ref())
}

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let (h, w) = flow.dims();
    let mut buf = Vec::with_capacity(12 + 8 * h * w);
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(w as i32).to_le_bytes());
    buf.extend_from_slice(&(h as i32).to_le_bytes());
    let v = flow.vectors();
    for y in 0..h {
        for x in 0..w {
            buf.extend_from_slice(&v[[0, y, x]].to_le_bytes());
            buf.extend_from_slice(&v[[1, y, x]].to_le_bytes());
        }
    }
    buf
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile {
            what: "flow header",
            expected: 12,
            found: bytes.len() as u64,
        });
    }
    if f32::from_le_bytes(bytes[0..4].try_into().unwrap()) != FLO_MAGIC {
        return Err(Error::BadMagic { what: "flow file" });
    }
    if bytes.len() < 12 {
        return Err(Error::TruncatedFile {
            what: "flow header",
            expected: 12,
            found: bytes.len() as u64,
        });
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(Error::Parse {
            what: "flow header",
            message: format!("non-positive dimensions {w}x{h}"),
        });
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + 8 * (w as u64) * (h as u64);
    if (bytes.len() as u64) < expected {
        return Err(Error::TruncatedFile {
            what: "flow payload",
            expected,
            found: bytes.len() as u64,
        });
    }
    let mut v = Array3::<f32>::zeros((2, h, w));
    let mut chunks = bytes[12..expected as usize].chunks_exact(4);
    for y in 0..h {
        for x in 0..w {
            for c in 0..2 {
                let b = chunks.next().expect("length checked");
                v[[c, y, x]] = f32::from_le_bytes(b.try_into().unwrap());
            }
        }
    }
    FlowField::new(v)
}

pub fn write_flow(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_flow(flow)).map_err(|e| Error::io(path, e))
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flow(&bytes)
}

pub fn flow_pair_paths(dir: &Path, pair: usize) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("pair_{pair:04}_forward.flo")),
        dir.join(format!("pair_{pair:04}_backward.flo")),
    )
}

pub fn write_flow_dir(flows: &[FlowPair], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, pair) in flows.iter().enumerate() {
        let (f, b) = flow_pair_paths(dir, i);
        write_flow(&pair.forward, f)?;
        write_flow(&pair.backward, b)?;
    }
    Ok(())
}

/// Reads every consecutive pair starting at 0 until the first missing index.
pub fn read_flow_dir(dir: impl AsRef<Path>) -> Result<Vec<FlowPair>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile {
            path: dir.to_path_buf(),
        });
    }
    let mut pairs = Vec::new();
    loop {
        let (f, b) = flow_pair_paths(dir, pairs.len());
        match (f.exists(), b.exists()) {
            (false, false) => break,
            (true, false) => return Err(Error::MissingFlow(b.display().to_string())),
            (false, true) => return Err(Error::MissingFlow(f.display().to_string())),
            (true, true) => {
                let i = pairs.len();
                pairs.push(FlowPair::new(read_flow(f)?, read_flow(b)?, i)?);
            }
        }
    }
    Ok(pairs)
}

pub fn encode_latent(latent: &LatentVideo) -> Result<Vec<u8>> {
    let shape = latent.shape();
    let mut buf = Vec::with_capacity(24 + 4 * shape.iter().product::<usize>());
    buf.extend_from_slice(LATENT_MAGIC);
    for d in shape {
        let d = u32::try_from(d).map_err(|_| Error::invalid("latent dimension exceeds u32"))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &v in latent.data().iter() {
        let narrowed = v as f32;
        if !narrowed.is_finite() {
            return Err(Error::NonFinite { what: "latent (f32 narrowing)" });
        }
        buf.extend_from_slice(&narrowed.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_latent(bytes: &[u8]) -> Result<LatentVideo> {
    if bytes.len() < 8 {
        return Err(Error::TruncatedFile {
            what: "latent header",
            expected: 24,
            found: bytes.len() as u64,
        });
    }
    if &bytes[0..8] != LATENT_MAGIC {
        return Err(Error::BadMagic { what: "latent file" });
    }
    if bytes.len() < 24 {
        return Err(Error::TruncatedFile {
            what: "latent header",
            expected: 24,
            found: bytes.len() as u64,
        });
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    let shape = [dim(0), dim(1), dim(2), dim(3)];
    let count = shape.iter().map(|&d| d as u64).product::<u64>();
    let expected = 24 + 4 * count;
    if (bytes.len() as u64) < expected {
        return Err(Error::TruncatedFile {
            what: "latent payload",
            expected,
            found: bytes.len() as u64,
        });
    }
    let values: Vec<f64> = bytes[24..expected as usize]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    let data = Array4::from_shape_vec(shape, values).map_err(|e| Error::Parse {
        what: "latent",
        message: e.to_string(),
    })?;
    LatentVideo::new(data)
}

pub fn write_latent(latent: &LatentVideo, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_latent(latent)?).map_err(|e| Error::io(path, e))
}

pub fn read_latent(path: impl AsRef<Path>) -> Result<LatentVideo> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_latent(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantizer_rounds_and_clamps() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.2), 255);
        assert_eq!(quantize(-0.3), 0);
        assert_eq!(quantize(0.0), 0);
    }

    #[test]
    fn hand_built_flow_file() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&202021.25f32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        for v in [1.0f32, 0.0, 0.0, -1.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let f = decode_flow(&bytes).unwrap();
        assert_eq!(f.dims(), (1, 2));
        assert_eq!(f.at(0, 0), (1.0, 0.0));
        assert_eq!(f.at(0, 1), (0.0, -1.0));
        assert_eq!(encode_flow(&f), bytes);
    }

    #[test]
    fn flow_errors() {
        let mut bytes = encode_flow(&FlowField::zeros(2, 2));
        bytes.pop();
        assert!(matches!(decode_flow(&bytes), Err(Error::TruncatedFile { .. })));
        bytes[0] ^= 0xff;
        assert!(matches!(decode_flow(&bytes), Err(Error::BadMagic { .. })));
        let mut nan = encode_flow(&FlowField::zeros(1, 1));
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_flow(&nan), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn unit_latent_file_layout() {
        let l = LatentVideo::zeros([1, 1, 1, 1]);
        let bytes = encode_latent(&l).unwrap();
        assert_eq!(bytes.len(), 8 + 16 + 4);
        assert_eq!(&bytes[..8], b"UAVLAT01");
        assert_eq!(&bytes[8..24], &[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        assert!(bytes[24..].iter().all(|&b| b == 0));
    }

    #[test]
    fn latent_errors() {
        let mut bytes = encode_latent(&LatentVideo::zeros([2, 1, 2, 2])).unwrap();
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(decode_latent(&bytes), Err(Error::TruncatedFile { .. })));
        bytes[0] = b'X';
        assert!(matches!(decode_latent(&bytes), Err(Error::BadMagic { .. })));
        let mut inf = encode_latent(&LatentVideo::zeros([1, 1, 1, 1])).unwrap();
        inf[24..28].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode_latent(&inf), Err(Error::NonFinite { .. })));
    }

    proptest! {
        #[test]
        fn latent_bytes_round_trip(vals in proptest::collection::vec(-1e6f32..1e6, 2 * 3 * 2 * 2)) {
            let data = Array4::from_shape_vec((2, 3, 2, 2), vals.iter().map(|&v| v as f64).collect()).unwrap();
            let l = LatentVideo::new(data).unwrap();
            let bytes = encode_latent(&l).unwrap();
            let back = decode_latent(&bytes).unwrap();
            prop_assert_eq!(&back, &l);
            prop_assert_eq!(encode_latent(&back).unwrap(), bytes);
        }

        #[test]
        fn flow_bytes_round_trip(vals in proptest::collection::vec(-100f32..100.0, 2 * 3 * 5)) {
            let f = FlowField::new(Array3::from_shape_vec((2, 3, 5), vals).unwrap()).unwrap();
            let back = decode_flow(&encode_flow(&f)).unwrap();
            prop_assert_eq!(back.vectors(), f.vectors());
        }
    }
}
