//! Video containers.
//!
//! RVID layout (little-endian):
//!
//! ```text
//! "RVID" | version u8 = 1 | T u32 | H u32 | W u32 | C u32 | T*H*W*C bytes
//! ```
//!
//! Bytes are row-major with time outermost and channel innermost; byte `b` decodes to `b / 255`.
//! The same container stores heatmap volumes, with `C` carrying the number of keypoints or limbs.
//!
//! A directory of binary PPM frames named `frame_000000.ppm`, `frame_000001.ppm`, ... is also
//! accepted as an RGB video.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{VideoTensor, Volume};

pub const RVID_MAGIC: &[u8; 4] = b"RVID";
pub const RVID_VERSION: u8 = 1;
pub const RVID_HEADER_LEN: usize = 4 + 1 + 16;

/// Quantizes an intensity in `[0, 1]` to a byte, rounding half away from zero.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round() as u8
}

#[inline]
pub fn dequantize(b: u8) -> f64 {
    b as f64 / 255.0
}

/// Encodes a volume as RVID bytes. Every value must be finite and within `[0, 1]`.
pub fn encode_rvid(v: &Volume) -> Result<Vec<u8>> {
    v.check_unit_range()?;
    let mut out = Vec::with_capacity(RVID_HEADER_LEN + v.data().len());
    out.extend_from_slice(RVID_MAGIC);
    out.push(RVID_VERSION);
    for d in v.dims() {
        let d = u32::try_from(d)
            .map_err(|_| Error::Shape(format!("dimension {d} does not fit in 32 bits")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend(v.data().iter().map(|&x| quantize(x)));
    Ok(out)
}

pub fn decode_rvid(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < 5 || &bytes[..4] != RVID_MAGIC {
        return Err(Error::Format("missing RVID magic".into()));
    }
    if bytes[4] != RVID_VERSION {
        return Err(Error::Format(format!("unsupported RVID version {}", bytes[4])));
    }
    if bytes.len() < RVID_HEADER_LEN {
        return Err(Error::parse_anywhere("truncated RVID header"));
    }
    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        let off = 5 + 4 * i;
        *d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    }
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("dimensions {dims:?} overflow")))?;
    let payload = &bytes[RVID_HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::parse_anywhere(format!(
            "truncated RVID payload: {} of {} bytes",
            payload.len(),
            expected
        )));
    }
    if payload.len() > expected {
        return Err(Error::parse_anywhere(format!(
            "RVID payload has {} trailing bytes",
            payload.len() - expected
        )));
    }
    Volume::new(dims, payload.iter().map(|&b| dequantize(b)).collect())
}

/// Loads a video from an RVID file or a directory of PPM frames.
pub fn load_video(path: &Path) -> Result<VideoTensor> {
    if path.is_dir() {
        return load_ppm_dir(path);
    }
    VideoTensor::new(load_volume(path)?)
}

/// Loads any RVID volume, including heatmap stacks with more than three channels.
pub fn load_volume(path: &Path) -> Result<Volume> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_rvid(&bytes)
}

pub fn save_video(v: &VideoTensor, path: &Path) -> Result<()> {
    save_volume(v.volume(), path)
}

pub fn save_volume(v: &Volume, path: &Path) -> Result<()> {
    let bytes = encode_rvid(v)?;
    super::write_atomic(path, &bytes)
}

fn load_ppm_dir(dir: &Path) -> Result<VideoTensor> {
    let mut frames: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(is_frame_name)
        })
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(Error::Format(format!(
            "{} contains no frame_%06d.ppm files",
            dir.display()
        )));
    }

    let mut dims: Option<(usize, usize)> = None;
    let mut data = Vec::new();
    for path in &frames {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (w, h, pixels) = decode_ppm(&bytes)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        match dims {
            None => dims = Some((h, w)),
            Some((h0, w0)) if (h0, w0) != (h, w) => {
                return Err(Error::Shape(format!(
                    "{} is {w}x{h}, earlier frames are {w0}x{h0}",
                    path.display()
                )))
            }
            _ => {}
        }
        data.extend(pixels);
    }
    let (h, w) = dims.unwrap();
    VideoTensor::from_data([frames.len(), h, w, 3], data)
}

fn is_frame_name(name: &str) -> bool {
    name.len() == "frame_000000.ppm".len()
        && name.starts_with("frame_")
        && name.ends_with(".ppm")
        && name[6..12].bytes().all(|b| b.is_ascii_digit())
}

/// Decodes a binary P6 PPM into `(width, height, intensities)`.
fn decode_ppm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    let mut pos = 0;
    let next_token = |pos: &mut usize| -> std::result::Result<String, String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("truncated PPM header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if next_token(&mut pos)? != "P6" {
        return Err("not a binary P6 PPM".into());
    }
    let num = |pos: &mut usize| -> std::result::Result<usize, String> {
        let tok = next_token(pos)?;
        tok.parse().map_err(|_| format!("bad PPM header field `{tok}`"))
    };
    let w = num(&mut pos)?;
    let h = num(&mut pos)?;
    let maxval = num(&mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported PPM maxval {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = w * h * 3;
    if bytes.len() < pos + n {
        return Err("truncated PPM raster".into());
    }
    let scale = maxval as f64;
    let pixels = bytes[pos..pos + n]
        .iter()
        .map(|&b| (b as f64 / scale).min(1.0))
        .collect();
    Ok((w, h, pixels))
}

/// Writes a 3-channel video as `frame_%06d.ppm` files into `dir` (created if needed).
pub fn save_ppm_frames(v: &VideoTensor, dir: &Path) -> Result<()> {
    if v.channels() != 3 {
        return Err(Error::Shape("PPM frames need 3 channels".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for t in 0..v.frames() {
        let mut bytes = format!("P6\n{} {}\n255\n", v.width(), v.height()).into_bytes();
        bytes.extend(v.frame(t).iter().map(|&x| quantize(x)));
        super::write_atomic(&dir.join(format!("frame_{t:06}.ppm")), &bytes)?;
    }
    Ok(())
}
