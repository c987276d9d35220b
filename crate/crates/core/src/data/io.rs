//! Frame directories (PGM / grayscale PNG), annotation sidecars and dataset manifests.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use crate::data::sequence::{FrameSequence, TargetAnnotation};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Real;

/// Sidecar file name inside a sequence directory.
pub const SIDECAR: &str = "annotations.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Pgm,
}

impl ImageFormat {
    fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Pgm => "pgm",
        }
    }
}

fn is_frame_file(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm")
    )
}

/// Numeric sort key: the digits of the file stem, then the name.
fn frame_key(p: &Path) -> (u64, String) {
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let digits: String = stem.chars().filter(char::is_ascii_digit).collect();
    (digits.parse().unwrap_or(u64::MAX), stem.to_string())
}

/// Image files of `dir` in numeric order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_frame_file(p))
        .collect();
    files.sort_by_key(|p| frame_key(p));
    Ok(files)
}

/// Reads one grayscale image, normalized by its container's maximum code value.
pub fn load_image(path: &Path) -> Result<Tensor<f64>> {
    let unreadable = |msg: String| Error::UnreadableImage {
        path: path.to_path_buf(),
        msg,
    };
    let img = image::ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?
        .decode()
        .map_err(|e| unreadable(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => other.to_luma16().into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
    };
    Tensor::image(h, w, data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Writes a `[1,1,H,W]` (or `[H,W]`) image with values clamped to `[0, 1]`.
pub fn save_image(img: &Tensor<f64>, path: &Path, depth: BitDepth) -> Result<()> {
    let (h, w) = img.hw();
    let (h32, w32) = (h as u32, w as u32);
    let quantize = |v: f64, max: f64| (v.clamp(0.0, 1.0) * max).round();
    let fail = |e: image::ImageError| Error::UnreadableImage {
        path: path.to_path_buf(),
        msg: format!("write failed: {e}"),
    };
    match depth {
        BitDepth::Eight => {
            let raw = img.data().iter().map(|&v| quantize(v, 255.0) as u8).collect();
            ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(w32, h32, raw)
                .expect("buffer sized from tensor")
                .save(path)
                .map_err(fail)
        }
        BitDepth::Sixteen => {
            let raw = img.data().iter().map(|&v| quantize(v, 65535.0) as u16).collect();
            ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w32, h32, raw)
                .expect("buffer sized from tensor")
                .save(path)
                .map_err(fail)
        }
    }
}

/// Parses sidecar text: one `frame_index x y a b` line per target, `#` comments allowed.
pub fn parse_sidecar(text: &str, frames: usize, path: &Path) -> Result<Vec<Vec<TargetAnnotation>>> {
    let mut out = vec![Vec::new(); frames];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::MalformedSidecar {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        let idx: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad frame index {:?}", fields[0])))?;
        let mut v = [0.0f64; 4];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| bad(format!("bad number {f:?}")))?;
            if !slot.is_finite() {
                return Err(bad(format!("non-finite value {f:?}")));
            }
        }
        if idx >= frames {
            return Err(bad(format!("frame index {idx} but only {frames} frames")));
        }
        out[idx].push(TargetAnnotation::new(v[0], v[1], v[2], v[3]));
    }
    Ok(out)
}

pub fn format_sidecar(annotations: &[Vec<TargetAnnotation>]) -> String {
    let mut s = String::from("# frame_index x y a b\n");
    for (i, list) in annotations.iter().enumerate() {
        for a in list {
            s.push_str(&format!("{i} {} {} {} {}\n", a.x, a.y, a.a, a.b));
        }
    }
    s
}

/// Loads every frame of `dir` plus its sidecar, if present.
pub fn load_sequence(dir: &Path) -> Result<FrameSequence> {
    let files = list_frames(dir)?;
    if files.is_empty() {
        return Err(Error::invalid("load_sequence", format!("no PNG/PGM frames in {}", dir.display())));
    }
    let mut frames = Vec::with_capacity(files.len());
    for (i, f) in files.iter().enumerate() {
        let img = load_image(f)?;
        if let Some(first) = frames.first() {
            let first: &Tensor<f64> = first;
            if first.hw() != img.hw() {
                return Err(Error::MixedFrameSizes {
                    dir: dir.to_path_buf(),
                    index: i,
                    expected: first.hw(),
                    got: img.hw(),
                });
            }
        }
        frames.push(img);
    }
    let seq = FrameSequence::new(frames)?;
    let sidecar = dir.join(SIDECAR);
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let ann = parse_sidecar(&text, seq.len(), &sidecar)?;
        return seq.with_annotations(ann);
    }
    Ok(seq)
}

/// Writes `frame_0000.<ext>`, … and the sidecar when annotations exist.
pub fn save_sequence(seq: &FrameSequence, dir: &Path, depth: BitDepth, format: ImageFormat) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in seq.frames().iter().enumerate() {
        save_image(f, &dir.join(format!("frame_{i:04}.{}", format.extension())), depth)?;
    }
    if let Some(ann) = seq.annotations() {
        let p = dir.join(SIDECAR);
        fs::write(&p, format_sidecar(ann)).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Extension of lossless real-valued maps (detector outputs).
pub const MAP_EXT: &str = "tmap";
const MAP_MAGIC: &[u8; 8] = b"IRSRMAP1";

/// Writes a single-plane `f64` map: magic, `u64` height, `u64` width, little-endian samples.
pub fn save_map(img: &Tensor<f64>, path: &Path) -> Result<()> {
    let (h, w) = img.hw();
    let mut bytes = Vec::with_capacity(24 + 8 * h * w);
    bytes.extend_from_slice(MAP_MAGIC);
    bytes.extend_from_slice(&(h as u64).to_le_bytes());
    bytes.extend_from_slice(&(w as u64).to_le_bytes());
    bytes.extend_from_slice(&f64::to_le_bytes_vec(img.data()));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_map(path: &Path) -> Result<Tensor<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::UnreadableImage {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    if bytes.len() < 24 || &bytes[..8] != MAP_MAGIC {
        return Err(bad("not a map file"));
    }
    let h = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let w = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    if bytes.len() != 24 + 8 * h * w {
        return Err(bad("map payload length does not match its header"));
    }
    Tensor::image(h, w, f64::from_le_bytes_slice(&bytes[24..]))
}

/// Map files of `dir` in numeric order.
pub fn list_maps(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(MAP_EXT))
        .collect();
    out.sort_by_key(|p| frame_key(p));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub split: String,
    pub path: PathBuf,
}

/// Parses a manifest of `split path` lines; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path, origin: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((split, path)) = line.split_once(char::is_whitespace) else {
            return Err(Error::MalformedConfig {
                kind: "manifest",
                path: origin.to_path_buf(),
                line: n + 1,
                msg: "expected \"split path\"".into(),
            });
        };
        let p = PathBuf::from(path.trim());
        out.push(ManifestEntry {
            split: split.to_string(),
            path: if p.is_absolute() { p } else { base.join(p) },
        });
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")), path)
}
