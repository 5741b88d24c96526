//! Sliding-window truncated Taylor video.
//!
//! Each output frame `t` summarizes the grayscale window `g[t..=t+tau]` with three channels:
//!
//! - channel 0: window mean of `g` (order 0)
//! - channel 1: window mean of the first forward difference (order 1, divided by 1!)
//! - channel 2: window mean of the second forward difference divided by 2!
//!
//! The signed channels are stored as `clamp(0.5 + c_k / (2 s_k), 0, 1)`, so zero motion is
//! mid-gray. A video of `T` frames yields `T - tau` output frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{VideoTensor, Volume};

/// Highest expansion order; the output has `MAX_ORDER + 1` channels.
pub const MAX_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaylorParams {
    /// Window length; each output frame consumes `tau + 1` input frames.
    pub tau: usize,
    /// Normalization scales for the first- and second-order channels.
    pub scale: [f64; 2],
}

impl Default for TaylorParams {
    fn default() -> Self {
        Self {
            tau: 4,
            scale: [1.0, 1.0],
        }
    }
}

impl TaylorParams {
    pub fn validate(&self) -> Result<()> {
        if self.tau < MAX_ORDER {
            return Err(Error::Validation(format!(
                "tau must be at least {MAX_ORDER}, got {}",
                self.tau
            )));
        }
        if self.scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Validation(format!(
                "Taylor scales must be positive, got {:?}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// Per-pixel mean of the three color channels.
pub fn to_grayscale(v: &VideoTensor) -> Result<VideoTensor> {
    if v.channels() != 3 {
        return Err(Error::Shape(format!(
            "grayscale conversion needs 3 channels, got {}",
            v.channels()
        )));
    }
    let [t, h, w, _] = v.dims();
    let data = v
        .data()
        .chunks_exact(3)
        .map(|px| (px[0] + px[1] + px[2]) / 3.0)
        .collect();
    VideoTensor::from_data([t, h, w, 1], data)
}

/// Converts a 1- or 3-channel video into its `(T - tau) × H × W × 3` Taylor video.
pub fn taylor_video(v: &VideoTensor, p: &TaylorParams) -> Result<VideoTensor> {
    p.validate()?;
    let tau = p.tau;
    if v.frames() <= tau {
        return Err(Error::Shape(format!(
            "Taylor transform with tau = {tau} needs more than {tau} frames, got {}",
            v.frames()
        )));
    }
    let gray;
    let g = if v.channels() == 3 {
        gray = to_grayscale(v)?;
        &gray
    } else {
        v
    };

    let [frames, h, w, _] = g.dims();
    let plane = h * w;
    let data = g.data();
    let out_frames = frames - tau;

    // first and second forward differences over the whole clip
    let d1: Vec<f64> = (0..(frames - 1) * plane)
        .map(|i| data[i + plane] - data[i])
        .collect();
    let d2: Vec<f64> = (0..(frames - 2) * plane)
        .map(|i| data[i + 2 * plane] - 2.0 * data[i + plane] + data[i])
        .collect();

    let n0 = (tau + 1) as f64;
    let n1 = tau as f64;
    // 1/2! folded into the averaging denominator
    let n2 = 2.0 * (tau - 1) as f64;
    let [s1, s2] = p.scale;

    let mut out = Volume::zeros([out_frames, h, w, 3]);
    par::for_each_chunk_mut(out.data_mut(), plane * 3, |t, frame| {
        for px in 0..plane {
            let (mut c0, mut c1, mut c2) = (0.0, 0.0, 0.0);
            for i in 0..=tau {
                c0 += data[(t + i) * plane + px];
            }
            for i in 0..tau {
                c1 += d1[(t + i) * plane + px];
            }
            for i in 0..tau - 1 {
                c2 += d2[(t + i) * plane + px];
            }
            let out = &mut frame[px * 3..px * 3 + 3];
            out[0] = (c0 / n0).clamp(0.0, 1.0);
            out[1] = (0.5 + (c1 / n1) / (2.0 * s1)).clamp(0.0, 1.0);
            out[2] = (0.5 + (c2 / n2) / (2.0 * s2)).clamp(0.0, 1.0);
        }
    });
    VideoTensor::new(out)
}
