use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmgesture_core::io::manifest::{load_manifest, save_manifest};
use mmgesture_core::io::{load_probs, save_probs, save_video, DatasetManifest, ProbabilityMatrix, SampleEntry};
use mmgesture_core::synthetic::{gen_toy_video, ToyVideo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn mmgesture(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmgesture"))
        .arg("--root")
        .arg(root)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Ten-sample, two-class toy dataset under `<root>/d`.
fn toy_dataset(root: &Path) {
    let out = mmgesture(
        root,
        &["synth-dataset", "--out-dir", "d", "--per-class", "5", "--classes", "2", "--frames", "8", "--size", "8"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut all = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        all.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
    }
    all
}

fn entry(id: &str, label: usize, split: &str, modality: &str, file: &str) -> SampleEntry {
    SampleEntry {
        id: id.into(),
        label,
        split: split.into(),
        modality_paths: BTreeMap::from([(modality.to_string(), file.to_string())]),
    }
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    toy_dataset(root);

    assert_eq!(code(&mmgesture(root, &["no-such-command"])), 1);
    assert_eq!(code(&mmgesture(root, &["train", "--manifest", "d/manifest.jsonl"])), 1);
    assert_eq!(code(&mmgesture(root, &["preprocess-heatmaps", "--manifest", "d/manifest.jsonl", "--kind", "bone", "--out-dir", "f"])), 1);

    fs::write(root.join("broken.json"), "{").unwrap();
    let out = mmgesture(root, &["--config", "broken.json", "preprocess-taylor", "--manifest", "d/manifest.jsonl", "--out-dir", "f"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));

    let mut cfg = read_json(&root.join("d/config.json"));
    cfg["taylor"]["tau"] = 0.into();
    fs::write(root.join("tau0.json"), cfg.to_string()).unwrap();
    let out = mmgesture(root, &["--config", "tau0.json", "preprocess-taylor", "--manifest", "d/manifest.jsonl", "--out-dir", "f"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));

    let out = mmgesture(root, &["evaluate", "--probs", "missing.csv", "--manifest", "d/manifest.jsonl"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("missing.csv"));
}

#[test]
fn missing_skeleton_is_a_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    toy_dataset(root);
    let mut m = load_manifest(&root.join("d/manifest.jsonl")).unwrap();
    m.entries.truncate(3);
    m.entries[1].modality_paths.insert("skeleton".into(), "gone.skeleton.json".into());
    save_manifest(&m, &root.join("d/partial.jsonl")).unwrap();

    let out = mmgesture(
        root,
        &["--config", "d/config.json", "preprocess-heatmaps", "--manifest", "d/partial.jsonl", "--kind", "limb", "--out-dir", "f"],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let index = read_json(&root.join("f/limb.index.json"));
    let produced: Vec<&str> = index["produced"].as_array().unwrap().iter().map(|p| p["id"].as_str().unwrap()).collect();
    assert_eq!(produced, ["toy0000", "toy0002"]);
    let failed = index["failed"].as_array().unwrap();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["id"], "toy0001");
    assert!(failed[0]["error"].as_str().unwrap().contains("gone.skeleton.json"));

    let expected = hex::encode(Sha256::digest(index["params"].to_string().as_bytes()));
    assert_eq!(index["params_hash"], expected.as_str());
    assert!(root.join("f/toy0000.limb.rvid").exists());
    assert!(!root.join("f/toy0001.limb.rvid").exists());
}

#[test]
fn heatmap_outputs_do_not_depend_on_workers_or_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    toy_dataset(root);
    let run = |workers: &str, out: &str| {
        for kind in ["joint", "limb"] {
            let o = mmgesture(
                root,
                &["--config", "d/config.json", "--workers", workers, "preprocess-heatmaps", "--manifest", "d/manifest.jsonl", "--kind", kind, "--out-dir", out],
            );
            assert_eq!(code(&o), 0, "{}", stderr(&o));
        }
        files(&root.join(out))
    };
    let one = run("1", "w1");
    assert_eq!(one.len(), 2 * 10 + 2);
    assert_eq!(one, run("4", "w4"));
    assert_eq!(one, run("4", "w1"));
}

#[test]
fn taylor_lengths_and_static_clip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let still = gen_toy_video(&ToyVideo::Static { level: 0.4 }, [12, 3, 5, 3]).unwrap();
    let short = gen_toy_video(&ToyVideo::Ramp { base: 0.1, beta: 0.05 }, [4, 3, 5, 1]).unwrap();
    save_video(&still, &root.join("still.rvid")).unwrap();
    save_video(&short, &root.join("short.rvid")).unwrap();
    let m = DatasetManifest::new(
        vec![entry("still", 0, "train", "rgb", "still.rvid"), entry("short", 1, "train", "rgb", "short.rvid")],
        2,
    )
    .unwrap();
    save_manifest(&m, &root.join("manifest.jsonl")).unwrap();

    let out = mmgesture(root, &["preprocess-taylor", "--manifest", "manifest.jsonl", "--out-dir", "t"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let bytes = fs::read(root.join("t/still.taylor.rvid")).unwrap();
    assert_eq!(&bytes[..5], b"RVID\x01");
    let header: Vec<u32> = bytes[5..21].chunks(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(header, [8, 3, 5, 3]);
    let payload = &bytes[21..];
    assert_eq!(payload.len(), 8 * 3 * 5 * 3);
    for px in payload.chunks(3) {
        assert_eq!(&px[1..], &[128, 128]);
    }

    let index = read_json(&root.join("t/taylor.index.json"));
    assert_eq!(index["produced"][0]["dims"], serde_json::json!([8, 3, 5, 3]));
    assert_eq!(index["failed"][0]["id"], "short");
    assert!(index["failed"][0]["error"].as_str().unwrap().contains("shape"));
    assert!(!root.join("t/short.taylor.rvid").exists());
}

fn train_joint(root: &Path, config: &str, model: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "--config", config, "train", "--manifest", "d/manifest.jsonl", "--modality", "joint", "--features", "f", "--model", model,
    ];
    args.extend_from_slice(extra);
    mmgesture(root, &args)
}

fn joint_features(root: &Path) {
    let out = mmgesture(
        root,
        &["--config", "d/config.json", "preprocess-heatmaps", "--manifest", "d/manifest.jsonl", "--kind", "joint", "--out-dir", "f"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn predict_follows_split_order() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    toy_dataset(root);
    joint_features(root);
    let out = train_joint(root, "d/config.json", "joint.json", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = mmgesture(
        root,
        &["predict", "--manifest", "d/manifest.jsonl", "--modality", "joint", "--features", "f", "--model", "joint.json", "--split", "val", "--out", "val.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let probs = load_probs(&root.join("val.csv")).unwrap();
    let m = load_manifest(&root.join("d/manifest.jsonl")).unwrap();
    let val: Vec<String> = m.entries.iter().filter(|e| e.split == "val").map(|e| e.id.clone()).collect();
    assert!(!val.is_empty());
    assert_eq!(probs.sample_ids(), &val[..]);
    assert_eq!(probs.class_count(), 2);
}

#[test]
fn warm_start_from_zeros_matches_cold_start() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    toy_dataset(root);
    joint_features(root);
    let mut cfg = read_json(&root.join("d/config.json"));
    cfg["classifier"]["train"]["init_std"] = 0.0.into();
    fs::write(root.join("zero.json"), cfg.to_string()).unwrap();

    let out = train_joint(root, "zero.json", "cold.json", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut zero = read_json(&root.join("cold.json"));
    for key in ["weights", "bias"] {
        for v in zero[key].as_array_mut().unwrap() {
            *v = 0.0.into();
        }
    }
    fs::write(root.join("init.json"), zero.to_string()).unwrap();

    let out = train_joint(root, "zero.json", "warm.json", &["--warm-start", "init.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(root.join("cold.json")).unwrap(), fs::read(root.join("warm.json")).unwrap());
}

#[test]
fn predict_reports_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    toy_dataset(root);
    joint_features(root);
    assert_eq!(code(&train_joint(root, "d/config.json", "joint.json", &[])), 0);
    let d = read_json(&root.join("joint.json"))["d"].as_u64().unwrap();

    let out = mmgesture(
        root,
        &["predict", "--manifest", "d/manifest.jsonl", "--modality", "rgb", "--model", "joint.json", "--out", "p.csv"],
    );
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains(&format!("model dimension {d}")), "{err}");
    assert!(err.contains("feature dimension"), "{err}");
    assert!(!root.join("p.csv").exists());
}

fn random_probs(ids: &[String], cls: usize, seed: u64) -> ProbabilityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    for _ in ids {
        let row: Vec<f64> = (0..cls).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = row.iter().sum();
        data.extend(row.into_iter().map(|v| v / s));
    }
    ProbabilityMatrix::new(ids.to_vec(), cls, data).unwrap()
}

#[test]
fn uniform_fuse_reproduces_plain_average() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let ids: Vec<String> = (0..25).map(|i| format!("s{i:02}")).collect();
    let (cls, a, b) = (5, random_probs(&ids, 5, 1), random_probs(&ids, 5, 2));
    save_probs(&a, &root.join("a.csv")).unwrap();
    save_probs(&b, &root.join("b.csv")).unwrap();

    let out = mmgesture(root, &["fuse", "--probs", "a=a.csv", "--probs", "b=b.csv", "--weights", "uniform", "--out", "fused.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // average what the fuse command itself reads back from disk
    let (a, b) = (load_probs(&root.join("a.csv")).unwrap(), load_probs(&root.join("b.csv")).unwrap());
    let avg: Vec<f64> = a.probs().iter().zip(b.probs()).map(|(x, y)| (x + y) / 2.0).collect();
    save_probs(&ProbabilityMatrix::new(ids, cls, avg).unwrap(), &root.join("oracle.csv")).unwrap();
    assert_eq!(fs::read(root.join("fused.csv")).unwrap(), fs::read(root.join("oracle.csv")).unwrap());
}

#[test]
fn evaluate_prints_top1() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let entries = (0..4).map(|i| entry(&format!("v{i}"), i % 2, "test", "rgb", "x.rvid")).collect();
    save_manifest(&DatasetManifest::new(entries, 2).unwrap(), &root.join("m.jsonl")).unwrap();
    let ids: Vec<String> = (0..4).map(|i| format!("v{i}")).collect();
    let p = ProbabilityMatrix::new(ids, 2, vec![0.9, 0.1, 0.2, 0.8, 0.3, 0.7, 0.6, 0.4]).unwrap();
    save_probs(&p, &root.join("p.csv")).unwrap();

    let out = mmgesture(root, &["evaluate", "--probs", "p.csv", "--manifest", "m.jsonl", "--report", "r.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.trim() == "top-1 50.000"), "{stdout}");
    let report = read_json(&root.join("r.json"));
    assert_eq!(report["n"], 4);
}
