//! Dense T×H×W×C arrays.

use crate::error::{Error, Result};

/// A dense T×H×W×C array stored row-major with time outermost and channel innermost.
///
/// `Volume` is the common carrier for videos and heatmap stacks. It only enforces that the
/// buffer matches the declared dimensions; value-range rules belong to the wrapping types.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Volume {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Shape(format!("dimensions {dims:?} overflow")))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "buffer of {} values does not match dimensions {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; len],
        }
    }

    /// Builds a volume by evaluating `f(t, y, x, c)` at every element.
    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let [t, h, w, c] = dims;
        let mut data = Vec::with_capacity(t * h * w * c);
        for ti in 0..t {
            for y in 0..h {
                for x in 0..w {
                    for ci in 0..c {
                        data.push(f(ti, y, x, ci));
                    }
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn frames(&self) -> usize {
        self.dims[0]
    }

    pub fn height(&self) -> usize {
        self.dims[1]
    }

    pub fn width(&self) -> usize {
        self.dims[2]
    }

    pub fn channels(&self) -> usize {
        self.dims[3]
    }

    pub fn frame_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, t: usize, y: usize, x: usize, c: usize) -> usize {
        let [_, h, w, ch] = self.dims;
        ((t * h + y) * w + x) * ch + c
    }

    #[inline]
    pub fn get(&self, t: usize, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(t, y, x, c)]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let len = self.frame_len();
        &self.data[t * len..(t + 1) * len]
    }

    /// Checks that every value is finite and within `[0, 1]`.
    pub fn check_unit_range(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            Some(i) => Err(Error::Validation(format!(
                "value {} at flat index {} is not a finite intensity in [0, 1]",
                self.data[i], i
            ))),
            None => Ok(()),
        }
    }
}

/// A video: a [`Volume`] with at least one frame, 1 or 3 channels and intensities in `[0, 1]`.
///
/// RGB, Taylor, optical-flow and depth videos all share this representation.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor(Volume);

impl VideoTensor {
    pub fn new(volume: Volume) -> Result<Self> {
        let [t, h, w, c] = volume.dims();
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "video needs at least one non-empty frame, got dimensions {:?}",
                volume.dims()
            )));
        }
        if c != 1 && c != 3 {
            return Err(Error::Shape(format!("video must have 1 or 3 channels, got {c}")));
        }
        volume.check_unit_range()?;
        Ok(Self(volume))
    }

    pub fn from_data(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        Self::new(Volume::new(dims, data)?)
    }

    pub fn volume(&self) -> &Volume {
        &self.0
    }

    pub fn into_volume(self) -> Volume {
        self.0
    }
}

impl std::ops::Deref for VideoTensor {
    type Target = Volume;

    fn deref(&self) -> &Volume {
        &self.0
    }
}
