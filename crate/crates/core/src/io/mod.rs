//! On-disk artifacts: manifests, skeletons, videos, probability matrices and run configuration.

pub mod config;
pub mod manifest;
pub mod probs;
pub mod skeleton;
pub mod video;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use config::RunConfig;
pub use manifest::{DatasetManifest, SampleEntry};
pub use probs::{load_probs, save_probs, ProbabilityMatrix};
pub use skeleton::{load_skeleton, save_skeleton, Keypoint, SkeletonSequence};
pub use video::{load_video, load_volume, save_ppm_frames, save_video, save_volume};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
///
/// A reader never observes a partially written file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
