//! Multimodal micro-gesture recognition at desk scale.
//!
//! The crate covers the numerical pipeline end to end:
//!
//! - [`io`]: manifests, skeleton files, RVID/PPM videos, probability CSVs and run configuration
//! - [`heatmap`]: keypoint subsets, limb vectors and Gaussian joint/limb heatmap volumes
//! - [`taylor`]: sliding-window truncated Taylor video transform
//! - [`classifier`]: pooled features and a multinomial logistic probe trained with cross-entropy
//! - [`fusion`]: alignment, average/weighted late fusion, top-1 evaluation and weight search
//! - [`synthetic`]: seeded generators for predictions, toy videos, skeletons and whole datasets
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled (the default) and
//! fall back to plain iterators otherwise. Results are bitwise identical either way.

pub mod classifier;
pub mod error;
pub mod fusion;
pub mod heatmap;
pub mod io;
mod par;
pub mod synthetic;
pub mod taylor;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{VideoTensor, Volume};

/// Number of keypoints in a raw OpenPose-style skeleton (body, face, both hands).
pub const RAW_KEYPOINTS: usize = 137;

/// Number of keypoints kept after subset selection.
pub const SUBSET_KEYPOINTS: usize = 36;

/// Default number of gesture classes (31 micro-gesture categories plus a non-gesture class).
pub const DEFAULT_CLASS_COUNT: usize = 32;
