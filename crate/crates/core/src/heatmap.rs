//! Skeleton to pseudo-heatmap volumes.
//!
//! A skeleton sequence is reduced to a fixed keypoint subset, mapped into the output frame and
//! rendered as a T×H×W×K stack of Gaussians: one channel per joint (`K = V`) or one channel per
//! limb segment (`K = E`).
//!
//! Pixel `(x, y)` samples the continuous output-frame point `(x + 0.5, y + 0.5)`. A joint at
//! `(u, v)` with confidence `c` contributes `c * exp(-((px-u)^2 + (py-v)^2) / (2 sigma^2))`; a limb
//! uses the distance from the sample point to the segment and the smaller endpoint confidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::skeleton::{Keypoint, SkeletonSequence};
use crate::par;
use crate::tensor::Volume;
use crate::{RAW_KEYPOINTS, SUBSET_KEYPOINTS};

/// Ordered indices of the kept keypoints within the raw 137-point skeleton.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct KeypointSubset {
    indices: Vec<usize>,
}

impl KeypointSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.len() != SUBSET_KEYPOINTS {
            return Err(Error::Validation(format!(
                "keypoint subset must have {SUBSET_KEYPOINTS} indices, got {}",
                indices.len()
            )));
        }
        let mut seen = [false; RAW_KEYPOINTS];
        for &i in &indices {
            if i >= RAW_KEYPOINTS {
                return Err(Error::Validation(format!(
                    "subset index {i} is not below {RAW_KEYPOINTS}"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Validation(format!("subset index {i} repeated")));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl TryFrom<Vec<usize>> for KeypointSubset {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<KeypointSubset> for Vec<usize> {
    fn from(s: KeypointSubset) -> Self {
        s.indices
    }
}

// Raw layout: body 0..25, face 25..95, left hand 95..116, right hand 116..137.
const FACE: usize = 25;
const LEFT_HAND: usize = 95;
const RIGHT_HAND: usize = 116;
const HAND_POINTS: [usize; 6] = [0, 4, 8, 12, 16, 20];

impl Default for KeypointSubset {
    /// Upper body and head (12), facial landmarks (12), wrist plus fingertips of each hand (6 + 6).
    fn default() -> Self {
        let mut idx = vec![0, 1, 2, 3, 4, 5, 6, 7, 15, 16, 17, 18];
        idx.extend([0, 8, 16, 19, 24, 30, 36, 45, 48, 51, 54, 57].map(|i| FACE + i));
        idx.extend(HAND_POINTS.map(|i| LEFT_HAND + i));
        idx.extend(HAND_POINTS.map(|i| RIGHT_HAND + i));
        Self::new(idx).expect("default subset is valid")
    }
}

/// Skeletal edges between subset-local keypoint indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    edges: Vec<(usize, usize)>,
}

impl EdgeList {
    pub fn new(edges: Vec<(usize, usize)>, vertex_count: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::Validation(format!("edge ({a}, {b}) is a self-loop")));
            }
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) has an endpoint outside [0, {vertex_count})"
                )));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Validation(format!("edge ({a}, {b}) repeated")));
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

impl Default for EdgeList {
    /// Edges over [`KeypointSubset::default`]: arms and head, face outline and mouth, wrist to
    /// hand root and hand root to each fingertip.
    fn default() -> Self {
        let mut e = vec![
            (0, 1), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6), (6, 7),
            (0, 8), (8, 10), (0, 9), (9, 11),
            (12, 13), (13, 14), (15, 18), (16, 19), (0, 17), (17, 21),
            (20, 21), (21, 22), (20, 23), (23, 22),
        ];
        for (body_wrist, root) in [(7, 24), (4, 30)] {
            e.push((body_wrist, root));
            e.extend((1..6).map(|f| (root, root + f)));
        }
        Self::new(e, SUBSET_KEYPOINTS).expect("default edges are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatmapKind {
    Joint,
    Limb,
}

impl HeatmapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeatmapKind::Joint => "joint",
            HeatmapKind::Limb => "limb",
        }
    }
}

impl std::str::FromStr for HeatmapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(HeatmapKind::Joint),
            "limb" => Ok(HeatmapKind::Limb),
            other => Err(Error::Validation(format!("unknown heatmap kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapParams {
    pub out_h: usize,
    pub out_w: usize,
    /// Gaussian bandwidth in output pixels.
    pub sigma: f64,
    /// Zero out responses farther than 3 sigma from the generating point or segment.
    pub truncate_3sigma: bool,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        Self {
            out_h: 56,
            out_w: 56,
            sigma: 0.6,
            truncate_3sigma: false,
        }
    }
}

impl HeatmapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Validation(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.out_h < 2 || self.out_w < 2 {
            return Err(Error::Validation(format!(
                "heatmap output must be at least 2x2, got {}x{}",
                self.out_h, self.out_w
            )));
        }
        Ok(())
    }
}

/// T×H×W×K stack of joint or limb responses in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapVolume {
    pub kind: HeatmapKind,
    pub volume: Volume,
}

/// Source-frame rectangle `[x0, x1) × [y0, y1)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl CropBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite())
            && self.width() > 0.0
            && self.height() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("crop box {self:?} has no area")))
        }
    }
}

/// Picks `subset.indices()[k]` into slot `k` of every frame.
pub fn select_subset(s: &SkeletonSequence, subset: &KeypointSubset) -> Result<SkeletonSequence> {
    if s.keypoint_count() != RAW_KEYPOINTS {
        return Err(Error::Shape(format!(
            "subset selection needs {RAW_KEYPOINTS} keypoints per frame, got {}",
            s.keypoint_count()
        )));
    }
    let frames = s
        .frames()
        .iter()
        .map(|f| subset.indices().iter().map(|&i| f[i]).collect())
        .collect();
    SkeletonSequence::new(frames, subset.len())
}

/// Displacement `b - a` of one edge in one frame, with the weaker endpoint's confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimbVector {
    pub dx: f64,
    pub dy: f64,
    pub c: f64,
}

/// Per-frame E×2 limb displacements.
pub fn limb_vectors(s: &SkeletonSequence, edges: &EdgeList) -> Result<Vec<Vec<LimbVector>>> {
    check_edges(s, edges)?;
    Ok(s.frames()
        .iter()
        .map(|f| {
            edges
                .edges()
                .iter()
                .map(|&(a, b)| LimbVector {
                    dx: f[b].x - f[a].x,
                    dy: f[b].y - f[a].y,
                    c: f[a].c.min(f[b].c),
                })
                .collect()
        })
        .collect())
}

fn check_edges(s: &SkeletonSequence, edges: &EdgeList) -> Result<()> {
    let k = s.keypoint_count();
    match edges.edges().iter().find(|&&(a, b)| a >= k || b >= k) {
        Some(&(a, b)) => Err(Error::Shape(format!(
            "edge ({a}, {b}) refers past the {k} keypoints of the skeleton"
        ))),
        None => Ok(()),
    }
}

/// Affine map sending the crop box onto an `out_h × out_w` frame.
///
/// Confidences are kept, except that points landing outside `[0, W) × [0, H)` get `c = 0`.
pub fn transform_coords(
    s: &SkeletonSequence,
    crop: &CropBox,
    out_h: usize,
    out_w: usize,
) -> Result<SkeletonSequence> {
    crop.validate()?;
    let sx = out_w as f64 / crop.width();
    let sy = out_h as f64 / crop.height();
    let (w, h) = (out_w as f64, out_h as f64);
    let frames = s
        .frames()
        .iter()
        .map(|f| {
            f.iter()
                .map(|kp| {
                    let x = (kp.x - crop.x0) * sx;
                    let y = (kp.y - crop.y0) * sy;
                    let inside = (0.0..w).contains(&x) && (0.0..h).contains(&y);
                    Keypoint::new(x, y, if inside { kp.c } else { 0.0 })
                })
                .collect()
        })
        .collect();
    SkeletonSequence::new(frames, s.keypoint_count())
}

/// Square box around all confident keypoints, grown by `padding` times its longer side.
///
/// Returns `None` when no keypoint has positive confidence.
pub fn auto_crop_box(s: &SkeletonSequence, padding: f64) -> Option<CropBox> {
    let mut bounds: Option<(f64, f64, f64, f64)> = None;
    for kp in s.frames().iter().flatten().filter(|k| k.c > 0.0) {
        let b = bounds.get_or_insert((kp.x, kp.y, kp.x, kp.y));
        b.0 = b.0.min(kp.x);
        b.1 = b.1.min(kp.y);
        b.2 = b.2.max(kp.x);
        b.3 = b.3.max(kp.y);
    }
    let (x0, y0, x1, y1) = bounds?;
    let side = (x1 - x0).max(y1 - y0).max(1.0) * (1.0 + 2.0 * padding);
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    Some(CropBox::new(cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0))
}

/// Seeded random rescale and shift of a crop box for scale/crop augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropJitter {
    pub seed: u64,
    pub min_scale: f64,
    pub max_scale: f64,
    /// Maximum center shift as a fraction of the box side.
    pub max_shift: f64,
}

impl Default for CropJitter {
    fn default() -> Self {
        Self {
            seed: 0,
            min_scale: 0.9,
            max_scale: 1.1,
            max_shift: 0.05,
        }
    }
}

impl CropJitter {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_scale > 0.0
            && self.max_scale >= self.min_scale
            && self.max_scale.is_finite()
            && (0.0..1.0).contains(&self.max_shift);
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid crop jitter {self:?}")))
        }
    }

    /// Samples a jittered box; `stream` selects an independent substream (e.g. per sample).
    pub fn sample(&self, base: &CropBox, stream: u64) -> CropBox {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let scale = if self.max_scale > self.min_scale {
            rng.random_range(self.min_scale..self.max_scale)
        } else {
            self.min_scale
        };
        let (mut dx, mut dy) = (0.0, 0.0);
        if self.max_shift > 0.0 {
            dx = rng.random_range(-self.max_shift..self.max_shift) * base.width();
            dy = rng.random_range(-self.max_shift..self.max_shift) * base.height();
        }
        let (cx, cy) = ((base.x0 + base.x1) / 2.0 + dx, (base.y0 + base.y1) / 2.0 + dy);
        let (hw, hh) = (base.width() * scale / 2.0, base.height() * scale / 2.0);
        CropBox::new(cx - hw, cy - hh, cx + hw, cy + hh)
    }
}

/// Euclidean distance from `p` to the segment `ab` (to `a` when the segment is degenerate).
pub fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    segment_distance_sq(p, a, b).sqrt()
}

#[inline]
fn segment_distance_sq(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let len_sq = abx * abx + aby * aby;
    if len_sq == 0.0 {
        return apx * apx + apy * apy;
    }
    let r = ((apx * abx + apy * aby) / len_sq).clamp(0.0, 1.0);
    let (dx, dy) = (p.0 - (a.0 + r * abx), p.1 - (a.1 + r * aby));
    dx * dx + dy * dy
}

/// Joint-position heatmaps: one channel per keypoint of `s`.
pub fn joint_heatmap_volume(s: &SkeletonSequence, p: &HeatmapParams) -> Result<HeatmapVolume> {
    p.validate()?;
    let sources: Vec<Vec<Source>> = s
        .frames()
        .iter()
        .map(|f| {
            f.iter()
                .map(|kp| Source {
                    a: (kp.x, kp.y),
                    b: (kp.x, kp.y),
                    c: kp.c,
                })
                .collect()
        })
        .collect();
    let volume = render(&sources, s.keypoint_count(), p);
    Ok(HeatmapVolume {
        kind: HeatmapKind::Joint,
        volume,
    })
}

/// Limb-connection heatmaps: one channel per edge, driven by point-to-segment distance.
pub fn limb_heatmap_volume(
    s: &SkeletonSequence,
    edges: &EdgeList,
    p: &HeatmapParams,
) -> Result<HeatmapVolume> {
    p.validate()?;
    check_edges(s, edges)?;
    let sources: Vec<Vec<Source>> = s
        .frames()
        .iter()
        .map(|f| {
            edges
                .edges()
                .iter()
                .map(|&(a, b)| Source {
                    a: (f[a].x, f[a].y),
                    b: (f[b].x, f[b].y),
                    c: f[a].c.min(f[b].c),
                })
                .collect()
        })
        .collect();
    let volume = render(&sources, edges.len(), p);
    Ok(HeatmapVolume {
        kind: HeatmapKind::Limb,
        volume,
    })
}

#[derive(Clone, Copy)]
struct Source {
    a: (f64, f64),
    b: (f64, f64),
    c: f64,
}

fn render(sources: &[Vec<Source>], channels: usize, p: &HeatmapParams) -> Volume {
    let (h, w) = (p.out_h, p.out_w);
    let mut volume = Volume::zeros([sources.len(), h, w, channels]);
    let two_sigma_sq = 2.0 * p.sigma * p.sigma;
    let cutoff_sq = if p.truncate_3sigma {
        9.0 * p.sigma * p.sigma
    } else {
        f64::INFINITY
    };
    par::for_each_chunk_mut(volume.data_mut(), h * w * channels, |t, frame| {
        for (k, src) in sources[t].iter().enumerate() {
            if src.c <= 0.0 {
                continue;
            }
            for y in 0..h {
                let py = y as f64 + 0.5;
                for x in 0..w {
                    let d_sq = segment_distance_sq((x as f64 + 0.5, py), src.a, src.b);
                    if d_sq > cutoff_sq {
                        continue;
                    }
                    frame[(y * w + x) * channels + k] = src.c * (-d_sq / two_sigma_sq).exp();
                }
            }
        }
    });
    volume
}
