//! Seeded synthetic data: complementary-error predictors, analytic toy videos and skeletons, and a
//! small on-disk dataset that exercises the whole pipeline.
//!
//! Every random draw comes from a ChaCha8 substream keyed by sample index, so output does not
//! depend on the number of worker threads.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::AlignedPredictions;
use crate::heatmap::{CropBox, HeatmapParams};
use crate::io::config::{CropMode, RunConfig};
use crate::io::manifest::{save_manifest, DatasetManifest, SampleEntry};
use crate::io::skeleton::{save_skeleton, Keypoint, SkeletonSequence};
use crate::io::video::save_video;
use crate::io::write_atomic;
use crate::par;
use crate::tensor::{VideoTensor, Volume};
use crate::RAW_KEYPOINTS;

/// Probability mass placed on the peak class of a generated row.
pub const PEAK_MASS: f64 = 0.7;

/// Rejection attempts per sample before falling back to the closest error pattern.
pub const MAX_ATTEMPTS: usize = 1000;

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Parameters of a set of synthetic per-modality predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub class_count: usize,
    /// Target top-1 accuracy of each modality.
    pub accuracies: Vec<f64>,
    /// Symmetric error-overlap matrix with unit diagonal: modalities `i` and `j` err together on a
    /// fraction `overlap[i][j] * min(e_i, e_j)` of samples, where `e = 1 - accuracy`.
    pub overlap: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Spec whose off-diagonal overlaps all equal `rho`.
    pub fn uniform_overlap(n: usize, class_count: usize, accuracies: Vec<f64>, rho: f64, seed: u64) -> Self {
        let m = accuracies.len();
        let overlap = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect();
        Self {
            n,
            class_count,
            accuracies,
            overlap,
            seed,
        }
    }

    pub fn modalities(&self) -> usize {
        self.accuracies.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.modalities();
        if self.n == 0 || self.class_count < 2 || m == 0 || m > 16 {
            return Err(Error::Validation(format!(
                "need n >= 1, at least 2 classes and 1..=16 modalities (n = {}, classes = {}, modalities = {m})",
                self.n, self.class_count
            )));
        }
        if let Some(a) = self.accuracies.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::Validation(format!("accuracy target {a} outside (0, 1]")));
        }
        if self.overlap.len() != m || self.overlap.iter().any(|r| r.len() != m) {
            return Err(Error::Shape(format!("overlap matrix must be {m}x{m}")));
        }
        for i in 0..m {
            if self.overlap[i][i] != 1.0 {
                return Err(Error::Validation(format!("overlap[{i}][{i}] must be 1")));
            }
            for j in 0..m {
                let r = self.overlap[i][j];
                if !(0.0..=1.0).contains(&r) || r != self.overlap[j][i] {
                    return Err(Error::Validation(format!(
                        "overlap[{i}][{j}] = {r} must lie in [0, 1] and be symmetric"
                    )));
                }
            }
        }
        Ok(())
    }

    fn error_rates(&self) -> Vec<f64> {
        self.accuracies.iter().map(|a| 1.0 - a).collect()
    }

    /// Target probability that modalities `i` and `j` both err on a sample.
    fn joint_error(&self, i: usize, j: usize) -> f64 {
        let e = self.error_rates();
        if i == j {
            e[i]
        } else {
            self.overlap[i][j] * e[i].min(e[j])
        }
    }

    fn check_feasible(&self) -> Result<()> {
        let e = self.error_rates();
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                let both = self.joint_error(i, j);
                let floor = (e[i] + e[j] - 1.0).max(0.0);
                if both + 1e-12 < floor {
                    return Err(Error::Feasibility {
                        i,
                        j,
                        reason: format!(
                            "joint error rate {both:.4} is below the minimum {floor:.4} implied by error rates {:.4} and {:.4}",
                            e[i], e[j]
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-sample error patterns: bit `i` set means modality `i` errs.
///
/// Tracked counts are the errors of each modality, the joint errors of each pair, and for each
/// ordered pair the samples where only the first of the two errs. A random
/// pattern is accepted when every count stays strictly within one sample of its running target or
/// at least does not drift further from it. When no draw qualifies, the pattern with the smallest
/// squared deviation over all tracked counts is taken, which also settles targets that cannot be
/// met together (error rates summing past one with no overlap allowed).
fn assign_error_patterns(spec: &SyntheticSpec) -> Vec<u32> {
    let m = spec.modalities();
    let e = spec.error_rates();
    // (i, j, false): i and j both err; (i, j, true): i errs and j does not
    let pairs: Vec<(usize, usize, bool)> = (0..m)
        .flat_map(|i| (0..m).flat_map(move |j| [(i, j, false), (i, j, true)]))
        .filter(|&(i, j, only)| if only { i != j } else { i <= j })
        .collect();
    let targets: Vec<f64> = pairs
        .iter()
        .map(|&(i, j, only)| if only { e[i] - spec.joint_error(i, j) } else { spec.joint_error(i, j) })
        .collect();
    let both = |z: u32, (i, j, only): (usize, usize, bool)| ((z >> i) & ((z >> j) ^ only as u32) & 1) as f64;
    let mut counts = vec![0.0; pairs.len()];
    let mut patterns = Vec::with_capacity(spec.n);

    for s in 0..spec.n {
        let (before, done) = (s as f64, (s + 1) as f64);
        let after = |z: u32, k: usize| counts[k] + both(z, pairs[k]) - targets[k] * done;
        let acceptable = |z: u32| {
            (0..pairs.len()).all(|k| {
                let a = after(z, k).abs();
                a < 1.0 || a <= (counts[k] - targets[k] * before).abs()
            })
        };
        let mut rng = substream(spec.seed, 2 * s as u64);
        let mut chosen = None;
        for _ in 0..MAX_ATTEMPTS {
            let z = (0..m).fold(0u32, |z, i| z | ((rng.random::<f64>() < e[i]) as u32) << i);
            if acceptable(z) {
                chosen = Some(z);
                break;
            }
        }
        let z = chosen.unwrap_or_else(|| {
            let cost = |z: u32| (0..pairs.len()).map(|k| after(z, k).powi(2)).sum::<f64>();
            (0..1u32 << m)
                .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
                .expect("at least one pattern")
        });
        for (k, c) in counts.iter_mut().enumerate() {
            *c += both(z, pairs[k]);
        }
        patterns.push(z);
    }
    patterns
}

/// Probability rows for every modality, with labels, ids `s000000..` and names `m0..`.
pub fn gen_predictions(spec: &SyntheticSpec) -> Result<AlignedPredictions> {
    spec.validate()?;
    spec.check_feasible()?;
    let (n, cls, m) = (spec.n, spec.class_count, spec.modalities());
    let patterns = assign_error_patterns(spec);
    let off_peak = (1.0 - PEAK_MASS) / (cls - 1) as f64;

    let per_sample = par::map_range(n, |s| {
        let mut rng = substream(spec.seed, 2 * s as u64 + 1);
        let label = rng.random_range(0..cls);
        let peaks: Vec<usize> = (0..m)
            .map(|i| {
                if (patterns[s] >> i) & 1 == 1 {
                    // uniform over the other classes
                    let k = rng.random_range(0..cls - 1);
                    if k >= label {
                        k + 1
                    } else {
                        k
                    }
                } else {
                    label
                }
            })
            .collect();
        (label, peaks)
    });

    let mut matrices = vec![Vec::with_capacity(n * cls); m];
    for (_, peaks) in &per_sample {
        for (mat, &peak) in matrices.iter_mut().zip(peaks) {
            mat.extend((0..cls).map(|k| if k == peak { PEAK_MASS } else { off_peak }));
        }
    }
    AlignedPredictions::from_parts(
        (0..n).map(|s| format!("s{s:06}")).collect(),
        (0..m).map(|i| format!("m{i}")).collect(),
        matrices,
        cls,
        Some(per_sample.iter().map(|(l, _)| *l).collect()),
    )
}

/// Analytic grayscale-intensity generators. Frame index `t` starts at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ToyVideo {
    Static { level: f64 },
    /// `base + beta * t` at every pixel.
    Ramp { base: f64, beta: f64 },
    /// `base + gamma * t^2` at every pixel.
    Quadratic { base: f64, gamma: f64 },
    /// Gaussian blob centred at `start + velocity * t`, peak 1 over `background`.
    MovingDot {
        start: (f64, f64),
        velocity: (f64, f64),
        sigma: f64,
        background: f64,
    },
}

impl ToyVideo {
    /// Blob centre at frame `t` in continuous pixel coordinates.
    pub fn dot_center(&self, t: usize) -> Option<(f64, f64)> {
        match self {
            ToyVideo::MovingDot { start, velocity, .. } => {
                Some((start.0 + velocity.0 * t as f64, start.1 + velocity.1 * t as f64))
            }
            _ => None,
        }
    }

    fn value(&self, t: usize, y: usize, x: usize) -> f64 {
        let tf = t as f64;
        match self {
            ToyVideo::Static { level } => *level,
            ToyVideo::Ramp { base, beta } => base + beta * tf,
            ToyVideo::Quadratic { base, gamma } => base + gamma * tf * tf,
            ToyVideo::MovingDot {
                sigma, background, ..
            } => {
                let (cx, cy) = self.dot_center(t).expect("moving dot");
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let g = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                background + (1.0 - background) * g
            }
        }
    }
}

/// Renders `kind` into a video of `dims = [T, H, W, C]`, copying the intensity to every channel.
pub fn gen_toy_video(kind: &ToyVideo, dims: [usize; 4]) -> Result<VideoTensor> {
    if let ToyVideo::MovingDot { sigma, .. } = kind {
        if sigma.is_nan() || *sigma <= 0.0 {
            return Err(Error::Validation(format!("dot sigma {sigma} must be positive")));
        }
    }
    VideoTensor::new(Volume::from_fn(dims, |t, y, x, _| kind.value(t, y, x)))
}

/// Analytic 137-keypoint skeleton generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ToySkeleton {
    /// Fixed rest pose around `center`.
    Static { center: (f64, f64) },
    /// Rest pose with keypoint `keypoint` at `circle_center + radius * (cos a_t, sin a_t)`,
    /// `a_t = phase + step * t`.
    CircleGesture {
        center: (f64, f64),
        keypoint: usize,
        circle_center: (f64, f64),
        radius: f64,
        phase: f64,
        step: f64,
    },
}

/// Rest position of raw keypoint `k`: a 12-wide lattice with 2-pixel spacing centred on `center`.
pub fn rest_position(k: usize, center: (f64, f64)) -> (f64, f64) {
    let (col, row) = ((k % 12) as f64, (k / 12) as f64);
    (center.0 + 2.0 * (col - 5.5), center.1 + 2.0 * (row - 5.5))
}

impl ToySkeleton {
    pub fn position(&self, k: usize, t: usize) -> (f64, f64) {
        match *self {
            ToySkeleton::Static { center } => rest_position(k, center),
            ToySkeleton::CircleGesture {
                center,
                keypoint,
                circle_center,
                radius,
                phase,
                step,
            } => {
                if k == keypoint {
                    let a = phase + step * t as f64;
                    (circle_center.0 + radius * a.cos(), circle_center.1 + radius * a.sin())
                } else {
                    rest_position(k, center)
                }
            }
        }
    }
}

pub fn gen_toy_skeleton(kind: &ToySkeleton, frames: usize) -> Result<SkeletonSequence> {
    if let ToySkeleton::CircleGesture { keypoint, radius, .. } = kind {
        if *keypoint >= RAW_KEYPOINTS || !(radius.is_finite() && *radius >= 0.0) {
            return Err(Error::Validation(format!("invalid circle gesture {kind:?}")));
        }
    }
    let data = (0..frames)
        .map(|t| {
            (0..RAW_KEYPOINTS)
                .map(|k| {
                    let (x, y) = kind.position(k, t);
                    Keypoint::new(x, y, 1.0)
                })
                .collect()
        })
        .collect();
    SkeletonSequence::new(data, RAW_KEYPOINTS)
}

/// Layout of the on-disk toy dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyDatasetSpec {
    /// Samples per class.
    pub per_class: usize,
    pub class_count: usize,
    pub frames: usize,
    /// Side of the square video frame and skeleton canvas.
    pub size: usize,
    pub seed: u64,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        Self {
            per_class: 15,
            class_count: 4,
            frames: 16,
            size: 24,
            seed: 0,
        }
    }
}

/// Raw keypoints animated by the toy skeletons; all belong to the default subset.
const GESTURE_KEYPOINTS: [usize; 4] = [4, 7, 99, 120];

/// Writes videos, skeletons, `manifest.jsonl` and a matching `config.json` under `dir`.
///
/// Each class has its own temporal signature in both modalities: a brightness oscillation in the
/// video and a confidence oscillation of the gesturing hand keypoints in the skeleton. Within each
/// class, samples split 3:1:1 into train, val and test by index, and one sample in three carries
/// no class signal in the video and another one in three none in the skeleton, so each modality
/// alone is imperfect while the two never fail together.
pub fn write_toy_dataset(dir: &Path, spec: &ToyDatasetSpec) -> Result<DatasetManifest> {
    if spec.per_class < 5 || spec.class_count < 2 || spec.frames < 8 || spec.size < 8 {
        return Err(Error::Validation(format!("toy dataset spec too small: {spec:?}")));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (train_end, val_end) = (spec.per_class * 3 / 5, spec.per_class * 4 / 5);
    let n = spec.per_class * spec.class_count;

    let entries = par::map_range(n, |i| -> Result<SampleEntry> {
        let (label, j) = (i % spec.class_count, i / spec.class_count);
        let split = if j < train_end {
            "train"
        } else if j < val_end {
            "val"
        } else {
            "test"
        };
        let mut rng = substream(spec.seed, i as u64);
        let id = format!("toy{i:04}");
        let phase = std::f64::consts::TAU * label as f64 / spec.class_count as f64;

        let video = toy_sample_video(spec, &mut rng, (j % 3 != 1).then_some(phase))?;
        let skeleton = toy_sample_skeleton(spec, &mut rng, (j % 3 != 2).then_some(phase))?;
        let video_name = format!("{id}.rgb.rvid");
        let skeleton_name = format!("{id}.skeleton.json");
        save_video(&video, &dir.join(&video_name))?;
        save_skeleton(&skeleton, &dir.join(&skeleton_name))?;
        Ok(SampleEntry {
            id,
            label,
            split: split.to_string(),
            modality_paths: [
                ("rgb".to_string(), video_name),
                ("skeleton".to_string(), skeleton_name),
            ]
            .into(),
        })
    });
    let manifest = DatasetManifest::new(entries.into_iter().collect::<Result<_>>()?, spec.class_count)?;
    save_manifest(&manifest, &dir.join("manifest.jsonl"))?;

    let mut cfg = RunConfig::default();
    cfg.heatmap.params = HeatmapParams {
        out_h: spec.size,
        out_w: spec.size,
        ..HeatmapParams::default()
    };
    cfg.heatmap.crop = CropMode::Fixed {
        bounds: CropBox::new(0.0, 0.0, spec.size as f64, spec.size as f64),
    };
    write_atomic(&dir.join("config.json"), cfg.to_json().as_bytes())?;
    Ok(manifest)
}

/// Moving dot over a background whose brightness oscillates with the class phase.
fn toy_sample_video(spec: &ToyDatasetSpec, rng: &mut ChaCha8Rng, phase: Option<f64>) -> Result<VideoTensor> {
    let size = spec.size as f64;
    let jitter = rng.random_range(-0.3..0.3);
    let start = (rng.random_range(0.25..0.75) * size, rng.random_range(0.25..0.75) * size);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let speed = 0.25 * size / spec.frames as f64;
    let dot = ToyVideo::MovingDot {
        start,
        velocity: (speed * angle.cos(), speed * angle.sin()),
        sigma: 1.5,
        background: 0.0,
    };
    let period = spec.frames as f64;
    let dims = [spec.frames, spec.size, spec.size, 3];
    let noise: Vec<f64> = (0..spec.frames * spec.size * spec.size)
        .map(|_| rng.random_range(-0.02..0.02))
        .collect();
    let volume = Volume::from_fn(dims, |t, y, x, c| {
        let bg = match phase {
            Some(p) => 0.4 + 0.2 * (std::f64::consts::TAU * t as f64 / period + p + jitter).sin(),
            None => 0.4,
        };
        let tint = [1.0, 0.9, 0.8][c];
        let v = bg * tint + (1.0 - bg * tint) * 0.6 * dot.value(t, y, x);
        (v + noise[(t * spec.size + y) * spec.size + x]).clamp(0.0, 1.0)
    });
    VideoTensor::new(volume)
}

/// Circle gesture of one hand whose keypoint confidences oscillate with the class phase.
fn toy_sample_skeleton(
    spec: &ToyDatasetSpec,
    rng: &mut ChaCha8Rng,
    phase: Option<f64>,
) -> Result<SkeletonSequence> {
    let size = spec.size as f64;
    let center = (size / 2.0, size / 2.0);
    let jitter = rng.random_range(-0.3..0.3);
    let gesture = ToySkeleton::CircleGesture {
        center,
        keypoint: GESTURE_KEYPOINTS[0],
        circle_center: (size * 0.7, size * 0.3),
        radius: size * rng.random_range(0.08..0.15),
        phase: rng.random_range(0.0..std::f64::consts::TAU),
        step: std::f64::consts::TAU / spec.frames as f64,
    };
    let base = gen_toy_skeleton(&gesture, spec.frames)?;
    let period = spec.frames as f64;
    let frames = base
        .into_frames()
        .into_iter()
        .enumerate()
        .map(|(t, mut kps)| {
            let c = match phase {
                Some(p) => 0.55 + 0.45 * (std::f64::consts::TAU * t as f64 / period + p + jitter).sin(),
                None => 0.55,
            };
            for &k in &GESTURE_KEYPOINTS {
                kps[k].c = c;
            }
            for kp in kps.iter_mut() {
                kp.x += rng.random_range(-0.2..0.2);
                kp.y += rng.random_range(-0.2..0.2);
            }
            kps
        })
        .collect();
    SkeletonSequence::new(frames, RAW_KEYPOINTS)
}
