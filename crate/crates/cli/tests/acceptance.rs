//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mmgesture_core::classifier::{loss_and_gradient, train, train_paired, FeatureMatrix, LinearModel, TrainConfig};
use mmgesture_core::fusion::{
    average_fuse, search_weights, top1, weighted_fuse, AlignedPredictions, EvalReport, FusionWeights,
    SearchConfig, SearchMode,
};
use mmgesture_core::heatmap::{joint_heatmap_volume, limb_heatmap_volume, segment_distance, EdgeList, HeatmapParams};
use mmgesture_core::io::video::{decode_rvid, encode_rvid};
use mmgesture_core::io::{Keypoint, ProbabilityMatrix, SkeletonSequence};
use mmgesture_core::synthetic::{gen_predictions, SyntheticSpec};
use mmgesture_core::taylor::{taylor_video, TaylorParams};
use mmgesture_core::{VideoTensor, Volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn skeleton(frames: &[Vec<(f64, f64, f64)>]) -> SkeletonSequence {
    let k = frames[0].len();
    let data = frames
        .iter()
        .map(|f| f.iter().map(|&(x, y, c)| Keypoint::new(x, y, c)).collect())
        .collect();
    SkeletonSequence::new(data, k).unwrap()
}

fn hm_params(h: usize, w: usize, sigma: f64) -> HeatmapParams {
    HeatmapParams {
        out_h: h,
        out_w: w,
        sigma,
        truncate_3sigma: false,
    }
}

fn gaussian(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Minimum over `r` sampled at 1e-4 steps, polished by ternary search in the winning bracket.
fn parametric_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let dist = |r: f64| ((p.0 - a.0 - r * (b.0 - a.0)).powi(2) + (p.1 - a.1 - r * (b.1 - a.1)).powi(2)).sqrt();
    let best = (0..=10_000usize)
        .min_by(|&i, &j| dist(i as f64 * 1e-4).total_cmp(&dist(j as f64 * 1e-4)))
        .unwrap();
    let (mut lo, mut hi) = (best.saturating_sub(1) as f64 * 1e-4, (best + 1).min(10_000) as f64 * 1e-4);
    for _ in 0..100 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if dist(m1) <= dist(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    dist((lo + hi) / 2.0).min(dist(best as f64 * 1e-4))
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (t, h, w, k) = (4, 16, 16, 5);
    let edges: Vec<(usize, usize)> = vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
    let el = EdgeList::new(edges.clone(), k).unwrap();
    let mut worst = 0.0f64;
    let mut worst_distance = 0.0f64;
    for _ in 0..20 {
        let sigma = rng.random_range(0.4..3.0);
        let frames: Vec<Vec<(f64, f64, f64)>> = (0..t)
            .map(|_| {
                (0..k)
                    .map(|_| (rng.random_range(-2.0..18.0), rng.random_range(-2.0..18.0), rng.random_range(0.0..=1.0)))
                    .collect()
            })
            .collect();
        let s = skeleton(&frames);
        let p = hm_params(h, w, sigma);
        let joint = joint_heatmap_volume(&s, &p).map_err(|e| e.to_string())?.volume;
        let limb = limb_heatmap_volume(&s, &el, &p).map_err(|e| e.to_string())?.volume;
        for (ti, f) in frames.iter().enumerate() {
            for y in 0..h {
                for x in 0..w {
                    let px = (x as f64 + 0.5, y as f64 + 0.5);
                    for (j, &(u, v, c)) in f.iter().enumerate() {
                        let d2 = (px.0 - u).powi(2) + (px.1 - v).powi(2);
                        worst = worst.max((joint.get(ti, y, x, j) - c * gaussian(d2, sigma)).abs());
                    }
                    for (e, &(a, b)) in edges.iter().enumerate() {
                        let (pa, pb) = ((f[a].0, f[a].1), (f[b].0, f[b].1));
                        let d = parametric_distance(px, pa, pb);
                        worst_distance = worst_distance.max((segment_distance(px, pa, pb) - d).abs());
                        // the value itself is checked against the closed-form projection distance
                        let len2 = (pb.0 - pa.0).powi(2) + (pb.1 - pa.1).powi(2);
                        let r = if len2 == 0.0 {
                            0.0
                        } else {
                            (((px.0 - pa.0) * (pb.0 - pa.0) + (px.1 - pa.1) * (pb.1 - pa.1)) / len2).clamp(0.0, 1.0)
                        };
                        let q = (pa.0 + r * (pb.0 - pa.0), pa.1 + r * (pb.1 - pa.1));
                        let d2 = (px.0 - q.0).powi(2) + (px.1 - q.1).powi(2);
                        let expected = f[a].2.min(f[b].2) * gaussian(d2, sigma);
                        worst = worst.max((limb.get(ti, y, x, e) - expected).abs());
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("heatmap deviation {worst:e}"))?;
    ensure(worst_distance <= 1e-6, || format!("distance deviation {worst_distance:e}"))?;
    let took = within(Duration::from_secs(10), start)?;
    Ok(format!("max |Δ| {worst:.1e}, distance |Δ| {worst_distance:.1e}, {took:.2?}"))
}

fn criterion_2() -> Check {
    let mut worst = 0.0f64;
    for (c, sigma) in [(1.0, 0.6), (0.37, 1.0), (0.8, 2.2)] {
        let s = skeleton(&[vec![(6.5, 5.5, c), (6.5 + sigma, 5.5, c)]]);
        let v = joint_heatmap_volume(&s, &hm_params(12, 12, sigma)).map_err(|e| e.to_string())?.volume;
        let peak = v.get(0, 5, 6, 0);
        let max = (0..12 * 12).map(|i| v.get(0, i / 12, i % 12, 0)).fold(0.0, f64::max);
        ensure(peak == max, || "peak is not the maximum".into())?;
        worst = worst.max((peak - c).abs());
        worst = worst.max((v.get(0, 5, 6, 1) - c * (-0.5f64).exp()).abs());
    }
    let frames = vec![vec![(3.3, 7.1, 0.9), (3.3, 7.1, 0.4)], vec![(9.0, 2.0, 0.2), (9.0, 2.0, 0.7)]];
    let s = skeleton(&frames);
    let p = hm_params(12, 12, 0.9);
    let joint = joint_heatmap_volume(&s, &p).map_err(|e| e.to_string())?.volume;
    let limb = limb_heatmap_volume(&s, &EdgeList::new(vec![(0, 1)], 2).unwrap(), &p)
        .map_err(|e| e.to_string())?
        .volume;
    for (t, f) in frames.iter().enumerate() {
        let scale = f[0].2.min(f[1].2) / f[0].2;
        for y in 0..12 {
            for x in 0..12 {
                worst = worst.max((limb.get(t, y, x, 0) - scale * joint.get(t, y, x, 0)).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("deviation {worst:e}"))?;
    Ok(format!("max |Δ| {worst:.1e}"))
}

fn taylor_oracle(frames: &[Vec<f64>], tau: usize, scale: [f64; 2]) -> Vec<f64> {
    let plane = frames[0].len();
    let mut out = Vec::new();
    for t in 0..frames.len() - tau {
        for px in 0..plane {
            let g = |i: usize| frames[t + i][px];
            let c0 = (0..=tau).map(g).sum::<f64>() / (tau + 1) as f64;
            let c1 = (0..tau).map(|i| g(i + 1) - g(i)).sum::<f64>() / tau as f64;
            let c2 = (0..tau - 1).map(|i| g(i + 2) - 2.0 * g(i + 1) + g(i)).sum::<f64>() / (tau - 1) as f64 / 2.0;
            out.push(c0);
            out.push((0.5 + c1 / (2.0 * scale[0])).clamp(0.0, 1.0));
            out.push((0.5 + c2 / (2.0 * scale[1])).clamp(0.0, 1.0));
        }
    }
    out
}

fn gray(frames: &[Vec<f64>], h: usize, w: usize) -> VideoTensor {
    VideoTensor::from_data([frames.len(), h, w, 1], frames.concat()).unwrap()
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let p = TaylorParams::default();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (t, h, w) = (rng.random_range(5..=8), rng.random_range(1..=8), rng.random_range(1..=8));
        let frames: Vec<Vec<f64>> = (0..t).map(|_| (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect()).collect();
        let out = taylor_video(&gray(&frames, h, w), &p).map_err(|e| e.to_string())?;
        ensure(out.frames() == t - p.tau, || format!("{} frames from {t}", out.frames()))?;
        for (a, b) in out.data().iter().zip(taylor_oracle(&frames, p.tau, p.scale)) {
            worst = worst.max((a - b).abs());
        }
    }
    let static_frames: Vec<Vec<f64>> = (0..8).map(|_| vec![0.42; 4]).collect();
    let out = taylor_video(&gray(&static_frames, 2, 2), &p).map_err(|e| e.to_string())?;
    for px in out.data().chunks(3) {
        worst = worst.max((px[0] - 0.42).abs()).max((px[1] - 0.5).abs()).max((px[2] - 0.5).abs());
    }
    for beta in [0.02, 0.06] {
        let ramp: Vec<Vec<f64>> = (0..12).map(|t| vec![beta * t as f64]).collect();
        let out = taylor_video(&gray(&ramp, 1, 1), &p).map_err(|e| e.to_string())?;
        ensure(out.frames() == 8, || "ramp length".into())?;
        for px in out.data().chunks(3) {
            worst = worst.max((px[1] - (0.5 + beta / 2.0).clamp(0.0, 1.0)).abs()).max((px[2] - 0.5).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("deviation {worst:e}"))?;
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("max |Δ| {worst:.1e}, {took:.2?}"))
}

fn naive_loss(w: &[f64], b: &[f64], x: &[Vec<f64>], y: &[usize], cls: usize) -> f64 {
    let mut total = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z: Vec<f64> = (0..cls)
            .map(|k| b[k] + xi.iter().enumerate().map(|(j, v)| v * w[j * cls + k]).sum::<f64>())
            .collect();
        let norm: f64 = z.iter().map(|v| v.exp()).sum();
        total -= (z[yi].exp() / norm).ln();
    }
    total / x.len() as f64
}

fn criterion_4() -> Check {
    let (n, d, cls) = (3, 4, 3);
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..cls)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let model = LinearModel::random(d, cls, 0.01, seed, "mean").unwrap();
        let (_, g) = loss_and_gradient(&model, &x, &y, 0.0).map_err(|e| e.to_string())?;
        let eps = 1e-5;
        let mut fd = Vec::new();
        for i in 0..d * cls {
            let (mut up, mut down) = (model.weights.clone(), model.weights.clone());
            up[i] += eps;
            down[i] -= eps;
            fd.push((naive_loss(&up, &model.bias, &rows, &y, cls) - naive_loss(&down, &model.bias, &rows, &y, cls)) / (2.0 * eps));
        }
        for k in 0..cls {
            let (mut up, mut down) = (model.bias.clone(), model.bias.clone());
            up[k] += eps;
            down[k] -= eps;
            fd.push((naive_loss(&model.weights, &up, &rows, &y, cls) - naive_loss(&model.weights, &down, &rows, &y, cls)) / (2.0 * eps));
        }
        let analytic: Vec<f64> = g.weights.iter().chain(&g.bias).copied().collect();
        let diff = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    ensure(worst <= 1e-4, || format!("gradient relative error {worst:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let y: Vec<usize> = (0..20).map(|i| i % 4).collect();
    let mut feats = |d: usize| {
        let rows: Vec<Vec<f64>> = y
            .iter()
            .map(|&l| (0..d).map(|j| (j % 4 == l) as u8 as f64 + rng.random_range(-0.5..0.5)).collect())
            .collect();
        FeatureMatrix::from_rows(&rows).unwrap()
    };
    let (x1, x2) = (feats(6), feats(9));
    let cfg = TrainConfig::default();
    let (p1, p2, _) = train_paired(&x1, &x2, &y, 4, &cfg, "mean").map_err(|e| e.to_string())?;
    let (s1, _) = train(&x1, &y, 4, &cfg, "mean").map_err(|e| e.to_string())?;
    let (s2, _) = train(&x2, &y, 4, &cfg, "mean").map_err(|e| e.to_string())?;
    let bitwise = |a: &LinearModel, b: &LinearModel| {
        a.weights.iter().chain(&a.bias).map(|v| v.to_bits()).eq(b.weights.iter().chain(&b.bias).map(|v| v.to_bits()))
    };
    ensure(bitwise(&p1, &s1) && bitwise(&p2, &s2), || "paired branches differ from independent runs".into())?;
    Ok(format!("max relative error {worst:.1e}, paired training bitwise equal"))
}

fn criterion_5() -> Check {
    let names = |n: &[&str]| n.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let ids = |n: usize| (0..n).map(|i| format!("s{i}")).collect::<Vec<_>>();

    let a = AlignedPredictions::from_parts(ids(1), names(&["R", "J"]), vec![vec![0.8, 0.2], vec![0.4, 0.6]], 2, None)
        .map_err(|e| e.to_string())?;
    let avg = average_fuse(&a, &["R", "J"]).map_err(|e| e.to_string())?;
    ensure((avg.row(0)[0] - 0.6).abs() <= 1e-15 && (avg.row(0)[1] - 0.4).abs() <= 1e-15, || {
        format!("average row {:?}", avg.row(0))
    })?;
    let a3 = AlignedPredictions::from_parts(
        ids(1),
        names(&["a", "b", "c"]),
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
        2,
        None,
    )
    .map_err(|e| e.to_string())?;
    let w = FusionWeights::new(names(&["a", "b", "c"]), vec![0.5, 0.3, 0.2]).unwrap();
    let p = weighted_fuse(&a3, &w).map_err(|e| e.to_string())?;
    ensure((p.row(0)[0] - 0.6).abs() <= 1e-15 && (p.row(0)[1] - 0.4).abs() <= 1e-15, || {
        format!("weighted row {:?}", p.row(0))
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, cls, m) = (200, 7, 4);
    let mats: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..n)
                .flat_map(|_| {
                    let r: Vec<f64> = (0..cls).map(|_| rng.random_range(0.01..1.0)).collect();
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(move |v| v / s)
                })
                .collect()
        })
        .collect();
    let list: Vec<String> = (0..m).map(|i| format!("m{i}")).collect();
    let a = AlignedPredictions::from_parts(ids(n), list.clone(), mats, cls, None).map_err(|e| e.to_string())?;
    let refs: Vec<&str> = list.iter().map(|s| s.as_str()).collect();
    let avg = average_fuse(&a, &refs).map_err(|e| e.to_string())?;
    let uni = weighted_fuse(&a, &FusionWeights::uniform(&list).unwrap()).map_err(|e| e.to_string())?;
    let uniform_gap = avg.probs().iter().zip(uni.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(uniform_gap <= 1e-15, || format!("uniform vs average {uniform_gap:e}"))?;
    for (i, name) in list.iter().enumerate() {
        let mut one_hot = vec![0.0; m];
        one_hot[i] = 1.0;
        let p = weighted_fuse(&a, &FusionWeights::new(list.clone(), one_hot).unwrap()).map_err(|e| e.to_string())?;
        ensure(p.probs() == a.matrix(name).unwrap().probs(), || format!("one-hot {name} is not a passthrough"))?;
    }
    let w = FusionWeights::new(list.clone(), (0..m).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let p = weighted_fuse(&a, &w).map_err(|e| e.to_string())?;
    let row_gap = p.rows().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    ensure(row_gap <= 1e-12, || format!("row sum deviation {row_gap:e}"))?;
    Ok(format!("uniform/average gap {uniform_gap:.1e}, row-sum gap {row_gap:.1e}"))
}

fn complementary_spec() -> SyntheticSpec {
    SyntheticSpec::uniform_overlap(2000, 32, vec![0.65; 3], 0.0, 2024)
}

/// Brute force over all `k / 20` weights of three modalities in name order; first best wins.
fn grid_oracle(a: &AlignedPredictions) -> ([u32; 3], usize) {
    let mut order: Vec<String> = a.names().to_vec();
    order.sort();
    let mats: Vec<ProbabilityMatrix> = order.iter().map(|n| a.matrix(n).unwrap()).collect();
    let labels = a.labels().unwrap();
    let cls = a.class_count();
    let mut best: Option<([u32; 3], usize)> = None;
    for k0 in 0..=20u32 {
        for k1 in 0..=20 - k0 {
            let k = [k0, k1, 20 - k0 - k1];
            let raw: Vec<f64> = k.iter().map(|&v| v as f64 / 20.0).collect();
            let total: f64 = raw.iter().sum();
            let correct = (0..labels.len())
                .filter(|&r| {
                    let mut fused = vec![0.0; cls];
                    for (mat, wi) in mats.iter().zip(&raw) {
                        for (f, v) in fused.iter_mut().zip(mat.row(r)) {
                            *f += wi / total * v;
                        }
                    }
                    let arg = (1..cls).fold(0, |b, c| if fused[c] > fused[b] { c } else { b });
                    arg == labels[r]
                })
                .count();
            if best.is_none_or(|(_, c)| correct > c) {
                best = Some((k, correct));
            }
        }
    }
    best.unwrap()
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let a = gen_predictions(&complementary_spec()).map_err(|e| e.to_string())?;
    let (k, correct) = grid_oracle(&a);
    let (w, report) = search_weights(&a, &SearchConfig::default()).map_err(|e| e.to_string())?;
    ensure(report.correct == correct, || format!("search {} vs oracle {correct} correct", report.correct))?;
    let same = w.names().iter().map(|s| s.as_str()).eq(["m0", "m1", "m2"])
        && w.weights().iter().zip(k).all(|(x, k)| (x - k as f64 / 20.0).abs() <= 1e-12);
    ensure(same, || format!("weights {:?} vs oracle {k:?}/20", w.weights()))?;
    let refine = SearchConfig {
        mode: SearchMode::Refine,
        ..SearchConfig::default()
    };
    let (_, r) = search_weights(&a, &refine).map_err(|e| e.to_string())?;
    let gap = report.top1 - r.top1;
    ensure(gap <= 0.005, || format!("refine is {gap} below exhaustive"))?;
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "top-1 {} at {k:?}/20, refine gap {gap:.4}, {took:.2?}",
        report.top1_percent()
    ))
}

fn best_single(a: &AlignedPredictions) -> f64 {
    a.names()
        .iter()
        .map(|n| top1(&a.matrix(n).unwrap(), a.labels().unwrap()).unwrap().top1)
        .fold(0.0, f64::max)
}

fn criterion_7() -> Check {
    let a = gen_predictions(&complementary_spec()).map_err(|e| e.to_string())?;
    let (_, fused) = search_weights(&a, &SearchConfig::default()).map_err(|e| e.to_string())?;
    let single = best_single(&a);
    ensure(fused.top1 >= single + 0.10, || format!("disjoint: fused {} vs single {single}", fused.top1))?;
    let overlap = SyntheticSpec::uniform_overlap(2000, 32, vec![0.65; 3], 1.0, 2024);
    let b = gen_predictions(&overlap).map_err(|e| e.to_string())?;
    let (_, fused_b) = search_weights(&b, &SearchConfig::default()).map_err(|e| e.to_string())?;
    let single_b = best_single(&b);
    ensure(fused_b.top1 <= single_b + 0.005, || {
        format!("overlapping: fused {} vs single {single_b}", fused_b.top1)
    })?;
    Ok(format!(
        "disjoint fused {:.4} vs single {single:.4}; overlapping fused {:.4} vs single {single_b:.4}",
        fused.top1, fused_b.top1
    ))
}

fn run_cli(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mmgesture"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("`{}` exited {:?}: {}", args.join(" "), out.status.code(), String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out)
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn criterion_8() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path().to_str().unwrap();
    run_cli(&["--root", root, "synth-dataset", "--out-dir", "data"])?;
    let mut timings = Vec::new();
    for run in ["run1", "run2"] {
        let start = Instant::now();
        run_cli(&[
            "--root", root, "--config", "data/config.json", "pipeline", "--manifest", "data/manifest.jsonl",
            "--out-dir", run,
        ])?;
        timings.push(within(Duration::from_secs(60), start)?);
    }
    let (a, b) = (files_under(&tmp.path().join("run1")), files_under(&tmp.path().join("run2")));
    ensure(!a.is_empty() && a == b, || "pipeline outputs differ between runs".into())?;
    let reports: BTreeMap<String, EvalReport> =
        serde_json::from_slice(&a[Path::new("test_report.json")]).map_err(|e| e.to_string())?;
    let fused = reports.get("fused").ok_or("no fused report")?.top1;
    let mut summary = Vec::new();
    for (name, r) in &reports {
        ensure(fused >= r.top1 - 0.02, || format!("fused {fused} below {name} {}", r.top1))?;
        summary.push(format!("{name} {}", r.top1_percent()));
    }
    Ok(format!(
        "{} files identical, runs {:.1?} / {:.1?}; {}",
        a.len(),
        timings[0],
        timings[1],
        summary.join(", ")
    ))
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<f64> = (0..3 * 4 * 5 * 3).map(|_| rng.random_range(0.0..=1.0)).collect();
    let v = Volume::new([3, 4, 5, 3], data).unwrap();
    let bytes = encode_rvid(&v).map_err(|e| e.to_string())?;
    ensure(bytes.len() == 21 + 180, || format!("RVID size {}", bytes.len()))?;
    let back = decode_rvid(&bytes).map_err(|e| e.to_string())?;
    let q = v.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(q <= 1.0 / 510.0 + 1e-15, || format!("RVID error {q}"))?;

    let ids: Vec<String> = (0..20).map(|i| format!("s{i}")).collect();
    let probs: Vec<f64> = (0..20)
        .flat_map(|_| {
            let r: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(move |x| x / s)
        })
        .collect();
    let p = ProbabilityMatrix::new(ids, 5, probs).unwrap();
    let parsed = ProbabilityMatrix::parse(&p.to_csv()).map_err(|e| e.to_string())?;
    let pe = p.probs().iter().zip(parsed.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(pe <= 1e-9 && parsed.sample_ids() == p.sample_ids(), || format!("probs round trip {pe:e}"))?;
    ensure(ProbabilityMatrix::parse("#mmgesture-probs v1 classes=2\na,0.6,0.402\n").is_err(), || {
        "row outside the band accepted".into()
    })?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = tmp.path().join("m.jsonl");
    std::fs::write(
        &manifest,
        "{\"classes\": 3}\n{\"id\": \"a\", \"label\": 0, \"split\": \"test\"}\n{\"id\": \"b\", \"label\": 2, \"split\": \"test\"}\n",
    )
    .unwrap();
    let probs_path = tmp.path().join("p.csv");
    std::fs::write(&probs_path, "#mmgesture-probs v1 classes=3\na,1,0,0\nb,0,0,1\n").unwrap();
    let out = run_cli(&[
        "evaluate", "--probs", probs_path.to_str().unwrap(), "--manifest", manifest.to_str().unwrap(),
    ])?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure(stdout.lines().any(|l| l.trim() == "top-1 100.000"), || format!("evaluate printed {stdout:?}"))?;
    Ok(format!("RVID max error {q:.2e}, probs max error {pe:.1e}, evaluate prints 100.000"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("heatmap oracle equivalence", criterion_1),
        ("heatmap closed forms", criterion_2),
        ("Taylor laws", criterion_3),
        ("classifier gradient and paired training", criterion_4),
        ("fusion arithmetic", criterion_5),
        ("weight-search oracle", criterion_6),
        ("complementarity trend", criterion_7),
        ("end-to-end pipeline", criterion_8),
        ("format conformance", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why})", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {}: FAIL {name} (panicked)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
