//! Per-frame 2-D keypoint sequences stored as JSON: `{"frames": [[[x, y, c], ...], ...]}`.
//!
//! Non-finite coordinates (`NaN`, `Infinity` or `null`) mark missing detections and are
//! stored as `(0, 0)` with confidence 0 so every frame keeps the same shape.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Detection confidence in `[0, 1]`; 0 means missing.
    pub c: f64,
}

impl Keypoint {
    pub const MISSING: Keypoint = Keypoint { x: 0.0, y: 0.0, c: 0.0 };

    pub fn new(x: f64, y: f64, c: f64) -> Self {
        Self { x, y, c }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    frames: Vec<Vec<Keypoint>>,
    keypoint_count: usize,
}

impl SkeletonSequence {
    pub fn new(frames: Vec<Vec<Keypoint>>, keypoint_count: usize) -> Result<Self> {
        for (t, frame) in frames.iter().enumerate() {
            if frame.len() != keypoint_count {
                return Err(Error::Shape(format!(
                    "frame {t} has {} keypoints, expected {keypoint_count}",
                    frame.len()
                )));
            }
            for (k, kp) in frame.iter().enumerate() {
                if !kp.x.is_finite() || !kp.y.is_finite() {
                    return Err(Error::Validation(format!(
                        "frame {t} keypoint {k} has non-finite coordinates"
                    )));
                }
                if !(0.0..=1.0).contains(&kp.c) {
                    return Err(Error::Validation(format!(
                        "frame {t} keypoint {k} has confidence {} outside [0, 1]",
                        kp.c
                    )));
                }
            }
        }
        Ok(Self {
            frames,
            keypoint_count,
        })
    }

    pub fn frames(&self) -> &[Vec<Keypoint>] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn keypoint_count(&self) -> usize {
        self.keypoint_count
    }

    pub fn into_frames(self) -> Vec<Vec<Keypoint>> {
        self.frames
    }

    pub fn to_json(&self) -> String {
        let frames: Vec<Vec<[f64; 3]>> = self
            .frames
            .iter()
            .map(|f| f.iter().map(|k| [k.x, k.y, k.c]).collect())
            .collect();
        serde_json::json!({ "frames": frames }).to_string()
    }

    pub fn parse(text: &str, expected_keypoints: usize) -> Result<Self> {
        let text = nonfinite_literals_to_null(text);
        let root: Value = serde_json::from_str(&text)
            .map_err(|e| Error::parse(e.line(), e.to_string()))?;
        let frames = root
            .get("frames")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse_anywhere("missing `frames` array"))?;

        let mut out = Vec::with_capacity(frames.len());
        for (t, frame) in frames.iter().enumerate() {
            let frame = frame
                .as_array()
                .ok_or_else(|| Error::parse_anywhere(format!("frame {t} is not an array")))?;
            if frame.len() != expected_keypoints {
                return Err(Error::Shape(format!(
                    "frame {t} has {} keypoints, expected {expected_keypoints}",
                    frame.len()
                )));
            }
            let mut kps = Vec::with_capacity(frame.len());
            for (k, triple) in frame.iter().enumerate() {
                kps.push(parse_keypoint(triple).map_err(|m| {
                    Error::parse_anywhere(format!("frame {t} keypoint {k}: {m}"))
                })?);
            }
            out.push(kps);
        }
        Self::new(out, expected_keypoints)
    }
}

fn parse_keypoint(v: &Value) -> std::result::Result<Keypoint, String> {
    let arr = v.as_array().ok_or("expected an [x, y, c] array")?;
    if arr.len() != 3 {
        return Err(format!("expected 3 values, found {}", arr.len()));
    }
    let mut vals = [0.0f64; 3];
    for (slot, item) in vals.iter_mut().zip(arr) {
        *slot = match item {
            Value::Null => f64::NAN,
            Value::Number(n) => n.as_f64().ok_or("number out of range")?,
            other => return Err(format!("non-numeric entry {other}")),
        };
    }
    let [x, y, c] = vals;
    if !x.is_finite() || !y.is_finite() || !c.is_finite() {
        return Ok(Keypoint::MISSING);
    }
    Ok(Keypoint::new(x, y, c))
}

/// Rewrites bare `NaN` / `Infinity` tokens (optionally signed) outside of strings to `null`.
fn nonfinite_literals_to_null(text: &str) -> String {
    const TOKENS: [&str; 6] = ["-Infinity", "+Infinity", "Infinity", "-NaN", "+NaN", "NaN"];
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        if in_string {
            if ch == b'\\' && i + 1 < bytes.len() {
                out.push_str(&text[i..i + 2]);
                i += 2;
                continue;
            }
            if ch == b'"' {
                in_string = false;
            }
        } else if ch == b'"' {
            in_string = true;
        } else if let Some(tok) = TOKENS.iter().find(|t| text[i..].starts_with(**t)) {
            out.push_str("null");
            i += tok.len();
            continue;
        }
        let len = text[i..].chars().next().map_or(1, char::len_utf8);
        out.push_str(&text[i..i + len]);
        i += len;
    }
    out
}

pub fn load_skeleton(path: &Path, expected_keypoints: usize) -> Result<SkeletonSequence> {
    SkeletonSequence::parse(&super::read_to_string(path)?, expected_keypoints)
}

pub fn save_skeleton(s: &SkeletonSequence, path: &Path) -> Result<()> {
    super::write_atomic(path, s.to_json().as_bytes())
}
