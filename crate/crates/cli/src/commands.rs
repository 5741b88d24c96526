use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mmgesture_core::classifier::{
    pool_features, predict_probs, train, train_from, train_paired, FeatureMatrix, LinearModel,
    PoolingSpec, Standardizer, TrainReport,
};
use mmgesture_core::fusion::{
    align, average_fuse, search_weights, top1, weighted_fuse, EvalReport, FusionWeights,
};
use mmgesture_core::heatmap::{
    joint_heatmap_volume, limb_heatmap_volume, select_subset, transform_coords, HeatmapKind,
};
use mmgesture_core::io::manifest::load_manifest;
use mmgesture_core::io::{
    load_probs, load_skeleton, load_video, load_volume, save_probs, save_video, save_volume,
    write_atomic, DatasetManifest, ProbabilityMatrix, RunConfig, SampleEntry,
};
use mmgesture_core::synthetic::{write_toy_dataset, ToyDatasetSpec};
use mmgesture_core::taylor::taylor_video;
use mmgesture_core::{Volume, RAW_KEYPOINTS};
use serde::Serialize;

use crate::args::{
    Cli, Command, EvaluateArgs, FuseArgs, HeatmapArgs, NamedPath, PipelineArgs, PredictArgs,
    SearchArgs, SynthArgs, TaylorArgs, TrainArgs,
};
use crate::index::{Failure, Produced, StageIndex};
use crate::workers;

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some samples failed and were skipped.
    Partial,
}

impl Outcome {
    fn and(self, other: Outcome) -> Outcome {
        if self == Outcome::Partial || other == Outcome::Partial {
            Outcome::Partial
        } else {
            Outcome::Complete
        }
    }

    fn from_failures(failed: &[Failure]) -> Outcome {
        if failed.is_empty() {
            Outcome::Complete
        } else {
            Outcome::Partial
        }
    }
}

struct Ctx {
    root: Option<PathBuf>,
    config: RunConfig,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    workers::configure(cli.workers)?;
    let root = cli.root.clone();
    let config = match &cli.config {
        Some(p) => {
            let p = match &root {
                Some(r) if p.is_relative() => r.join(p),
                _ => p.clone(),
            };
            RunConfig::load(&p).with_context(|| format!("loading configuration {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    let ctx = Ctx { root, config };
    match cli.command {
        Command::PreprocessHeatmaps(a) => preprocess_heatmaps(&ctx, &a),
        Command::PreprocessTaylor(a) => preprocess_taylor(&ctx, &a),
        Command::Train(a) => train_cmd(&ctx, &a),
        Command::Predict(a) => predict_cmd(&ctx, &a),
        Command::Fuse(a) => fuse_cmd(&ctx, &a),
        Command::SearchWeights(a) => search_cmd(&ctx, &a),
        Command::Evaluate(a) => evaluate_cmd(&ctx, &a).map(|(o, _)| o),
        Command::Pipeline(a) => pipeline(&ctx, &a),
        Command::SynthDataset(a) => synth_dataset(&ctx, &a),
    }
}

/// Manifest plus the directory its relative paths are resolved against.
struct LoadedManifest {
    manifest: DatasetManifest,
    base: PathBuf,
}

impl LoadedManifest {
    fn load(path: &Path) -> Result<Self> {
        let manifest =
            load_manifest(path).with_context(|| format!("loading manifest {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { manifest, base })
    }

    fn modality_path(&self, entry: &SampleEntry, modality: &str) -> Result<PathBuf, String> {
        entry
            .modality_paths
            .get(modality)
            .map(|p| self.base.join(p))
            .ok_or_else(|| format!("sample `{}` has no `{modality}` path", entry.id))
    }

    fn split_entries(&self, split: &str) -> Result<Vec<&SampleEntry>> {
        if !self.manifest.split_names.contains(split) {
            bail!(mmgesture_core::Error::Validation(format!("manifest declares no split `{split}`")));
        }
        let entries: Vec<_> = self.manifest.entries.iter().filter(|e| e.split == split).collect();
        if entries.is_empty() {
            bail!(mmgesture_core::Error::Validation(format!("split `{split}` is empty")));
        }
        Ok(entries)
    }

    fn labels(&self, split: Option<&str>) -> BTreeMap<String, usize> {
        self.manifest
            .entries
            .iter()
            .filter(|e| split.is_none_or(|s| e.split == s))
            .map(|e| (e.id.clone(), e.label))
            .collect()
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| mmgesture_core::Error::Io { path: dir.to_path_buf(), source: e })
        .map_err(Into::into)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn log(stage: &str, message: impl AsRef<str>) {
    eprintln!("[{stage}] {}", message.as_ref());
}

fn preprocess_heatmaps(ctx: &Ctx, a: &HeatmapArgs) -> Result<Outcome> {
    let lm = LoadedManifest::load(&ctx.path(&a.manifest))?;
    let out_dir = ctx.path(&a.out_dir);
    create_dir(&out_dir)?;
    let kind = HeatmapKind::from(a.kind);
    let hc = &ctx.config.heatmap;
    let edges = hc.edge_list()?;

    let results = workers::map(&lm.manifest.entries, |i, entry| -> Result<Produced, String> {
        let path = lm.modality_path(entry, &a.source)?;
        let run = || -> mmgesture_core::Result<Produced> {
            let raw = load_skeleton(&path, RAW_KEYPOINTS)?;
            let s = select_subset(&raw, &hc.subset)?;
            let crop = hc.crop_box(&s, i as u64)?;
            let s = transform_coords(&s, &crop, hc.params.out_h, hc.params.out_w)?;
            let hv = match kind {
                HeatmapKind::Joint => joint_heatmap_volume(&s, &hc.params)?,
                HeatmapKind::Limb => limb_heatmap_volume(&s, &edges, &hc.params)?,
            };
            let file = format!("{}.{}.rvid", entry.id, kind.as_str());
            save_volume(&hv.volume, &out_dir.join(&file))?;
            Ok(Produced::new(&entry.id, file, hv.volume.dims()))
        };
        run().map_err(|e| e.to_string())
    });

    let params = serde_json::json!({ "kind": kind.as_str(), "heatmap": hc });
    let index = StageIndex::collect(&format!("heatmaps-{}", kind.as_str()), params, &lm.manifest.entries, results);
    write_json(&index, &out_dir.join(format!("{}.index.json", kind.as_str())))?;
    log(
        "preprocess-heatmaps",
        format!("{} {} volumes, {} failed", index.produced.len(), kind.as_str(), index.failed.len()),
    );
    Ok(Outcome::from_failures(&index.failed))
}

fn preprocess_taylor(ctx: &Ctx, a: &TaylorArgs) -> Result<Outcome> {
    let lm = LoadedManifest::load(&ctx.path(&a.manifest))?;
    let out_dir = ctx.path(&a.out_dir);
    create_dir(&out_dir)?;
    let params = &ctx.config.taylor;
    params.validate()?;

    let results = workers::map(&lm.manifest.entries, |_, entry| -> Result<Produced, String> {
        let path = lm.modality_path(entry, &a.source)?;
        let run = || -> mmgesture_core::Result<Produced> {
            let video = load_video(&path)?;
            let tv = taylor_video(&video, params)?;
            let file = format!("{}.taylor.rvid", entry.id);
            save_video(&tv, &out_dir.join(&file))?;
            Ok(Produced::new(&entry.id, file, tv.dims()))
        };
        run().map_err(|e| e.to_string())
    });

    let index = StageIndex::collect(
        "taylor",
        serde_json::json!({ "taylor": params }),
        &lm.manifest.entries,
        results,
    );
    write_json(&index, &out_dir.join("taylor.index.json"))?;
    log(
        "preprocess-taylor",
        format!("{} Taylor videos, {} failed", index.produced.len(), index.failed.len()),
    );
    Ok(Outcome::from_failures(&index.failed))
}

fn feature_path(
    lm: &LoadedManifest,
    features: Option<&Path>,
    entry: &SampleEntry,
    modality: &str,
) -> Result<PathBuf, String> {
    match features {
        Some(dir) => Ok(dir.join(format!("{}.{modality}.rvid", entry.id))),
        None => lm.modality_path(entry, modality),
    }
}

fn read_tensor(path: &Path) -> mmgesture_core::Result<Volume> {
    if path.is_dir() {
        Ok(load_video(path)?.into_volume())
    } else {
        load_volume(path)
    }
}

/// Pooled features of the given entries; entries whose tensor cannot be read are reported.
struct Features<'a> {
    entries: Vec<&'a SampleEntry>,
    rows: Vec<Vec<f64>>,
    failed: Vec<Failure>,
}

impl Features<'_> {
    fn matrix(&self, modality: &str, split: &str) -> Result<FeatureMatrix> {
        if self.rows.is_empty() {
            bail!(mmgesture_core::Error::Validation(format!(
                "no `{modality}` features could be read for split `{split}`"
            )));
        }
        Ok(FeatureMatrix::from_rows(&self.rows)?)
    }

    /// Keeps only samples whose id satisfies `keep`.
    fn retain(&mut self, keep: impl Fn(&str) -> bool) {
        let (entries, rows) = self
            .entries
            .iter()
            .zip(self.rows.drain(..))
            .filter(|(e, _)| keep(&e.id))
            .map(|(e, r)| (*e, r))
            .unzip();
        self.entries = entries;
        self.rows = rows;
    }
}

fn load_features<'a>(
    ctx: &Ctx,
    lm: &LoadedManifest,
    entries: &[&'a SampleEntry],
    features: Option<&Path>,
    modality: &str,
    pooling: &PoolingSpec,
) -> Features<'a> {
    let features = features.map(|f| ctx.path(f));
    let pooled = workers::map(entries, |_, entry| -> Result<Vec<f64>, String> {
        let path = feature_path(lm, features.as_deref(), entry, modality)?;
        let v = read_tensor(&path).map_err(|e| e.to_string())?;
        Ok(pool_features(&v, pooling).map_err(|e| e.to_string())?.values)
    });
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (entry, r) in entries.iter().zip(pooled) {
        match r {
            Ok(row) => {
                kept.push(*entry);
                rows.push(row);
            }
            Err(error) => failed.push(Failure { id: entry.id.clone(), error }),
        }
    }
    for f in &failed {
        log(modality, format!("skipping `{}`: {}", f.id, f.error));
    }
    Features { entries: kept, rows, failed }
}

fn standardize(ctx: &Ctx, x: &FeatureMatrix) -> Result<(FeatureMatrix, Option<Standardizer>)> {
    if ctx.config.classifier.standardize {
        let s = Standardizer::fit(x);
        Ok((s.apply(x)?, Some(s)))
    } else {
        Ok((x.clone(), None))
    }
}

fn report_path(explicit: Option<&PathBuf>, ctx: &Ctx, primary: &Path) -> PathBuf {
    match explicit {
        Some(p) => ctx.path(p),
        None => primary.with_extension("report.json"),
    }
}

fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> Result<Outcome> {
    let lm = LoadedManifest::load(&ctx.path(&a.manifest))?;
    let entries = lm.split_entries(&a.split)?;
    let cc = &ctx.config.classifier;
    let pooling = PoolingSpec::parse(&cc.pooling)?;
    let cls = lm.manifest.class_count;

    let mut f1 = load_features(ctx, &lm, &entries, a.features.as_deref(), &a.modality, &pooling);
    let model_path = ctx.path(&a.model);

    if let Some(pair) = &a.pair_modality {
        let pair_model = a.pair_model.as_ref().context("--pair-model is required")?;
        let mut f2 = load_features(ctx, &lm, &entries, a.pair_features.as_deref(), pair, &pooling);
        // both branches must see the same samples
        let ids1: HashSet<String> = f1.entries.iter().map(|e| e.id.clone()).collect();
        let ids2: HashSet<String> = f2.entries.iter().map(|e| e.id.clone()).collect();
        f1.retain(|id| ids2.contains(id));
        f2.retain(|id| ids1.contains(id));
        let (x1, s1) = standardize(ctx, &f1.matrix(&a.modality, &a.split)?)?;
        let (x2, s2) = standardize(ctx, &f2.matrix(pair, &a.split)?)?;
        let labels: Vec<usize> = f1.entries.iter().map(|e| e.label).collect();
        let (mut m1, mut m2, report) = train_paired(&x1, &x2, &labels, cls, &cc.train, &cc.pooling)?;
        m1.standardizer = s1;
        m2.standardizer = s2;
        write_atomic(&model_path, m1.to_json().as_bytes())?;
        write_atomic(&ctx.path(pair_model), m2.to_json().as_bytes())?;
        write_json(&report, &report_path(a.report.as_ref(), ctx, &model_path))?;
        log_training(&format!("{}+{pair}", a.modality), &report, labels.len());
        return Ok(if labels.len() < entries.len() {
            Outcome::Partial
        } else {
            Outcome::Complete
        });
    }

    let (x, standardizer) = standardize(ctx, &f1.matrix(&a.modality, &a.split)?)?;
    let labels: Vec<usize> = f1.entries.iter().map(|e| e.label).collect();
    let (mut model, report) = match &a.warm_start {
        Some(p) => {
            let p = ctx.path(p);
            let text = fs::read_to_string(&p)
                .map_err(|e| mmgesture_core::Error::Io { path: p.clone(), source: e })?;
            let init = LinearModel::from_json(&text)
                .with_context(|| format!("reading warm-start model {}", p.display()))?;
            if init.cls != cls {
                bail!(mmgesture_core::Error::Shape(format!(
                    "warm-start model has {} classes, manifest has {cls}",
                    init.cls
                )));
            }
            train_from(init, &x, &labels, &cc.train)?
        }
        None => train(&x, &labels, cls, &cc.train, &cc.pooling)?,
    };
    model.standardizer = standardizer;
    write_atomic(&model_path, model.to_json().as_bytes())?;
    write_json(&report, &report_path(a.report.as_ref(), ctx, &model_path))?;
    log_training(&a.modality, &report, labels.len());
    Ok(Outcome::from_failures(&f1.failed))
}

fn log_training(name: &str, report: &TrainReport, n: usize) {
    let first = report.loss_trace.first().copied().unwrap_or(f64::NAN);
    let last = report.loss_trace.last().copied().unwrap_or(f64::NAN);
    log(
        "train",
        format!(
            "{name}: {n} samples, loss {first:.4} -> {last:.4}, train top-1 {:.3}",
            report.final_train_accuracy * 100.0
        ),
    );
}

fn predict_cmd(ctx: &Ctx, a: &PredictArgs) -> Result<Outcome> {
    let lm = LoadedManifest::load(&ctx.path(&a.manifest))?;
    let entries = lm.split_entries(&a.split)?;
    let model_path = ctx.path(&a.model);
    let text = fs::read_to_string(&model_path)
        .map_err(|e| mmgesture_core::Error::Io { path: model_path.clone(), source: e })?;
    let model = LinearModel::from_json(&text)
        .with_context(|| format!("reading model {}", model_path.display()))?;
    if model.cls != lm.manifest.class_count {
        bail!(mmgesture_core::Error::Shape(format!(
            "model has {} classes, manifest has {}",
            model.cls, lm.manifest.class_count
        )));
    }
    let pooling = PoolingSpec::parse(&model.pooling_spec)?;
    let f = load_features(ctx, &lm, &entries, a.features.as_deref(), &a.modality, &pooling);
    let x = f.matrix(&a.modality, &a.split)?;
    let ids = f.entries.iter().map(|e| e.id.clone()).collect();
    let probs = predict_probs(&model, &x, ids)?;
    save_probs(&probs, &ctx.path(&a.out))?;
    log("predict", format!("{}: {} rows for split `{}`", a.modality, probs.len(), a.split));
    Ok(Outcome::from_failures(&f.failed))
}

fn load_named(ctx: &Ctx, probs: &[NamedPath]) -> Result<Vec<(String, ProbabilityMatrix)>> {
    probs
        .iter()
        .map(|np| {
            let path = ctx.path(&np.path);
            let m = load_probs(&path).with_context(|| format!("loading {}", path.display()))?;
            Ok((np.name.clone(), m))
        })
        .collect()
}

fn report_dropped(stage: &str, dropped: &[String]) {
    if !dropped.is_empty() {
        log(stage, format!("{} samples not shared by every input were dropped", dropped.len()));
    }
}

fn fuse_cmd(ctx: &Ctx, a: &FuseArgs) -> Result<Outcome> {
    let preds = load_named(ctx, &a.probs)?;
    let aligned = align(&preds, None)?;
    report_dropped("fuse", aligned.dropped());
    let fused = if a.weights == "uniform" {
        let names: Vec<&str> = aligned.names().iter().map(String::as_str).collect();
        average_fuse(&aligned, &names)?
    } else {
        let path = ctx.path(Path::new(&a.weights));
        let text = fs::read_to_string(&path)
            .map_err(|e| mmgesture_core::Error::Io { path: path.clone(), source: e })?;
        weighted_fuse(&aligned, &FusionWeights::from_json(&text)?)?
    };
    save_probs(&fused, &ctx.path(&a.out))?;
    log("fuse", format!("{} modalities over {} samples", aligned.names().len(), fused.len()));
    Ok(Outcome::Complete)
}

fn search_cmd(ctx: &Ctx, a: &SearchArgs) -> Result<Outcome> {
    let lm = LoadedManifest::load(&ctx.path(&a.manifest))?;
    lm.split_entries(&a.split)?;
    let preds = load_named(ctx, &a.probs)?;
    let labels = lm.labels(Some(&a.split));
    let aligned = align(&preds, Some(&labels))?;
    report_dropped("search-weights", aligned.dropped());
    let (weights, report) = search_weights(&aligned, &ctx.config.fusion.search)?;
    let out = ctx.path(&a.out);
    write_atomic(&out, format!("{}\n", weights.to_json()).as_bytes())?;
    write_json(&report, &report_path(a.report.as_ref(), ctx, &out))?;
    let summary: Vec<String> = weights
        .names()
        .iter()
        .zip(weights.weights())
        .map(|(n, w)| format!("{n}={w:.3}"))
        .collect();
    log(
        "search-weights",
        format!("{} -> {} top-1 {}", summary.join(" "), a.split, report.top1_percent()),
    );
    Ok(Outcome::Complete)
}

fn evaluate_cmd(ctx: &Ctx, a: &EvaluateArgs) -> Result<(Outcome, EvalReport)> {
    let lm = LoadedManifest::load(&ctx.path(&a.manifest))?;
    let path = ctx.path(&a.probs);
    let probs = load_probs(&path).with_context(|| format!("loading {}", path.display()))?;
    let labels = lm.labels(a.split.as_deref());
    let aligned = align(&[("probs".to_string(), probs)], Some(&labels))?;
    report_dropped("evaluate", aligned.dropped());
    let report = top1(&aligned.matrix("probs")?, aligned.labels().unwrap_or_default())?;
    print!("{}", report.to_table());
    println!("top-1 {}", report.top1_percent());
    if let Some(r) = &a.report {
        write_json(&report, &ctx.path(r))?;
    }
    Ok((Outcome::Complete, report))
}

fn synth_dataset(ctx: &Ctx, a: &SynthArgs) -> Result<Outcome> {
    let spec = ToyDatasetSpec {
        per_class: a.per_class,
        class_count: a.classes,
        frames: a.frames,
        size: a.size,
        seed: a.seed,
    };
    let dir = ctx.path(&a.out_dir);
    let m = write_toy_dataset(&dir, &spec)?;
    log(
        "synth-dataset",
        format!("{} samples, {} classes in {}", m.entries.len(), m.class_count, dir.display()),
    );
    Ok(Outcome::Complete)
}

/// Modalities trained by the pipeline: name and whether features come from the preprocessing
/// directory (`true`) or straight from the manifest.
const PIPELINE_MODALITIES: [(&str, bool); 4] =
    [("joint", true), ("limb", true), ("taylor", true), ("rgb", false)];

fn pipeline(ctx: &Ctx, a: &PipelineArgs) -> Result<Outcome> {
    let out = ctx.path(&a.out_dir);
    let features = out.join("features");
    let models = out.join("models");
    let probs = out.join("probs");
    for d in [&out, &features, &models, &probs] {
        create_dir(d)?;
    }
    let manifest = ctx.path(&a.manifest);
    let lm = LoadedManifest::load(&manifest)?;
    let has = |m: &str| lm.manifest.entries.iter().any(|e| e.modality_paths.contains_key(m));

    let mut outcome = Outcome::Complete;
    let mut modalities = Vec::new();
    if has("skeleton") {
        for kind in [crate::args::Kind::Joint, crate::args::Kind::Limb] {
            outcome = outcome.and(preprocess_heatmaps(
                ctx,
                &HeatmapArgs {
                    manifest: manifest.clone(),
                    kind,
                    out_dir: features.clone(),
                    source: "skeleton".into(),
                },
            )?);
        }
        modalities.extend(["joint", "limb"]);
    }
    if has("rgb") {
        outcome = outcome.and(preprocess_taylor(
            ctx,
            &TaylorArgs {
                manifest: manifest.clone(),
                out_dir: features.clone(),
                source: "rgb".into(),
            },
        )?);
        modalities.extend(["taylor", "rgb"]);
    }
    if modalities.is_empty() {
        bail!(mmgesture_core::Error::Validation(
            "manifest has neither `skeleton` nor `rgb` paths".into()
        ));
    }

    let mut val_probs = Vec::new();
    let mut test_probs = Vec::new();
    for (name, from_features) in PIPELINE_MODALITIES.iter().filter(|(n, _)| modalities.contains(n)) {
        let feats = from_features.then(|| features.clone());
        let model = models.join(format!("{name}.json"));
        outcome = outcome.and(train_cmd(
            ctx,
            &TrainArgs {
                manifest: manifest.clone(),
                modality: name.to_string(),
                features: feats.clone(),
                model: model.clone(),
                split: "train".into(),
                warm_start: None,
                report: None,
                pair_modality: None,
                pair_features: None,
                pair_model: None,
            },
        )?);
        for (split, list) in [("val", &mut val_probs), ("test", &mut test_probs)] {
            let path = probs.join(format!("{name}.{split}.csv"));
            outcome = outcome.and(predict_cmd(
                ctx,
                &PredictArgs {
                    manifest: manifest.clone(),
                    modality: name.to_string(),
                    features: feats.clone(),
                    model: model.clone(),
                    split: split.into(),
                    out: path.clone(),
                },
            )?);
            list.push(NamedPath { name: name.to_string(), path });
        }
    }

    let weights_path = out.join("weights.json");
    match &ctx.config.fusion.weights {
        Some(w) => {
            write_atomic(&weights_path, format!("{}\n", w.canonical()?.to_json()).as_bytes())?;
            log("pipeline", "using fusion weights from the configuration");
        }
        None => {
            search_cmd(
                ctx,
                &SearchArgs {
                    probs: val_probs,
                    manifest: manifest.clone(),
                    split: "val".into(),
                    out: weights_path.clone(),
                    report: Some(out.join("val_report.json")),
                },
            )?;
        }
    }
    let fused = probs.join("fused.test.csv");
    fuse_cmd(
        ctx,
        &FuseArgs {
            probs: test_probs.clone(),
            weights: weights_path.to_string_lossy().into_owned(),
            out: fused.clone(),
        },
    )?;

    let mut reports = BTreeMap::new();
    for np in test_probs.iter().chain([&NamedPath { name: "fused".into(), path: fused }]) {
        let (_, report) = evaluate_quiet(ctx, &manifest, &np.path, "test")?;
        log("evaluate", format!("{} test top-1 {}", np.name, report.top1_percent()));
        reports.insert(np.name.clone(), report);
    }
    write_json(&reports, &out.join("test_report.json"))?;
    let fused_report = &reports["fused"];
    println!("top-1 {}", fused_report.top1_percent());
    Ok(outcome)
}

fn evaluate_quiet(ctx: &Ctx, manifest: &Path, probs: &Path, split: &str) -> Result<(Outcome, EvalReport)> {
    let lm = LoadedManifest::load(manifest)?;
    let p = load_probs(&ctx.path(probs))?;
    let labels = lm.labels(Some(split));
    let aligned = align(&[("probs".to_string(), p)], Some(&labels))?;
    let report = top1(&aligned.matrix("probs")?, aligned.labels().unwrap_or_default())?;
    Ok((Outcome::Complete, report))
}
