//! Linear probe over pooled tensor statistics.
//!
//! Every modality gets the same desk-scale classifier: a tensor is pooled into a short feature
//! vector, and a multinomial logistic regression is fit by full-batch gradient descent on
//!
//! ```text
//! L = (1/N) sum_i CE(softmax(W^T x_i + b), y_i) + lambda * ||W||^2
//! ```
//!
//! Two branches can be trained in one loop on the sum of their losses; since the branches share
//! no parameters this is exactly two independent fits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::probs::ProbabilityMatrix;
use crate::par;
use crate::tensor::Volume;

pub const DEFAULT_POOLING: &str = "mean,std,temporal8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PoolTerm {
    Mean,
    Std,
    Temporal(usize),
}

/// Parsed pooling description such as `"mean,std,temporal8"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolingSpec {
    terms: Vec<PoolTerm>,
    text: String,
}

impl PoolingSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for tok in text.split(',').map(str::trim) {
            let term = match tok {
                "mean" => PoolTerm::Mean,
                "std" => PoolTerm::Std,
                t if t.starts_with("temporal") => match t["temporal".len()..].parse() {
                    Ok(n) if n > 0 => PoolTerm::Temporal(n),
                    _ => return Err(Error::Validation(format!("bad temporal pooling term `{t}`"))),
                },
                other => return Err(Error::Validation(format!("unknown pooling term `{other}`"))),
            };
            terms.push(term);
        }
        Ok(Self {
            terms,
            text: text.to_string(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Features produced per input channel.
    pub fn per_channel(&self) -> usize {
        self.terms
            .iter()
            .map(|t| match t {
                PoolTerm::Temporal(n) => *n,
                _ => 1,
            })
            .sum()
    }

    pub fn dim(&self, channels: usize) -> usize {
        self.per_channel() * channels
    }
}

impl Default for PoolingSpec {
    fn default() -> Self {
        Self::parse(DEFAULT_POOLING).expect("default pooling parses")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub pooling_spec: String,
}

/// Pools a T×H×W×C tensor into per-channel statistics, block by block in spec order.
///
/// `temporalN` splits time into `N` bins of `ceil(T / N)` frames (the last may be short); bins
/// that receive no frame repeat the spatial mean of the final frame.
pub fn pool_features(v: &Volume, spec: &PoolingSpec) -> Result<FeatureVector> {
    if v.is_empty() {
        return Err(Error::Shape(format!("cannot pool empty tensor {:?}", v.dims())));
    }
    let [t, h, w, c] = v.dims();
    let plane = h * w;
    let data = v.data();

    // frame_sums[ti * c + ci] = sum over the frame's pixels of channel ci
    let mut frame_sums = vec![0.0; t * c];
    for ti in 0..t {
        for val in v.frame(ti).chunks_exact(c) {
            for (ci, x) in val.iter().enumerate() {
                frame_sums[ti * c + ci] += x;
            }
        }
    }
    let count = (t * plane) as f64;
    let means: Vec<f64> = (0..c)
        .map(|ci| (0..t).map(|ti| frame_sums[ti * c + ci]).sum::<f64>() / count)
        .collect();

    let mut values = Vec::with_capacity(spec.dim(c));
    for term in &spec.terms {
        match *term {
            PoolTerm::Mean => values.extend_from_slice(&means),
            PoolTerm::Std => {
                let mut acc = vec![0.0; c];
                for chunk in data.chunks_exact(c) {
                    for ci in 0..c {
                        let d = chunk[ci] - means[ci];
                        acc[ci] += d * d;
                    }
                }
                values.extend(acc.iter().map(|s| (s / count).sqrt()));
            }
            PoolTerm::Temporal(bins) => {
                let size = t.div_ceil(bins);
                for ci in 0..c {
                    let last = frame_sums[(t - 1) * c + ci] / plane as f64;
                    for b in 0..bins {
                        let (start, end) = (b * size, ((b + 1) * size).min(t));
                        if start >= end {
                            values.push(last);
                            continue;
                        }
                        let s: f64 = (start..end).map(|ti| frame_sums[ti * c + ci]).sum();
                        values.push(s / ((end - start) * plane) as f64);
                    }
                }
            }
        }
    }
    Ok(FeatureVector {
        values,
        pooling_spec: spec.as_str().to_string(),
    })
}

/// Row-major N×d feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::Shape(format!(
                "{} feature values for {n} samples of dimension {d}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("features must be finite".into()));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Shape(format!(
                "feature rows of dimension {} and {d} mixed",
                r.len()
            )));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Per-feature affine normalization `(x - shift) / scale` fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Mean and population std per column; near-constant columns keep scale 1.
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.n.max(1) as f64;
        let mut shift = vec![0.0; x.d];
        for i in 0..x.n {
            for (s, v) in shift.iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        shift.iter_mut().for_each(|s| *s /= n);
        let mut var = vec![0.0; x.d];
        for i in 0..x.n {
            for ((acc, v), m) in var.iter_mut().zip(x.row(i)).zip(&shift) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { shift, scale }
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.d != self.shift.len() {
            return Err(Error::Shape(format!(
                "standardizer expects dimension {}, features have {}",
                self.shift.len(),
                x.d
            )));
        }
        let data = x
            .data
            .chunks(x.d.max(1))
            .flat_map(|row| {
                row.iter()
                    .zip(&self.shift)
                    .zip(&self.scale)
                    .map(|((v, m), s)| (v - m) / s)
            })
            .collect();
        FeatureMatrix::new(x.n, x.d, data)
    }
}

/// Multinomial logistic model: `logits = W^T x + b` with `W` stored row-major as d×cls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub d: usize,
    pub cls: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub pooling_spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
}

impl LinearModel {
    pub fn zeros(d: usize, cls: usize, pooling_spec: &str) -> Self {
        Self {
            d,
            cls,
            weights: vec![0.0; d * cls],
            bias: vec![0.0; cls],
            pooling_spec: pooling_spec.to_string(),
            standardizer: None,
        }
    }

    /// Weights drawn from `N(0, std^2)` with a seeded ChaCha stream; bias zero.
    pub fn random(d: usize, cls: usize, std: f64, seed: u64, pooling_spec: &str) -> Result<Self> {
        let mut m = Self::zeros(d, cls, pooling_spec);
        if std > 0.0 {
            let normal = Normal::new(0.0, std)
                .map_err(|e| Error::Validation(format!("bad init std {std}: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            m.weights.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cls == 0 || self.weights.len() != self.d * self.cls || self.bias.len() != self.cls {
            return Err(Error::Shape(format!(
                "model claims d = {}, cls = {} but has {} weights and {} biases",
                self.d,
                self.cls,
                self.weights.len(),
                self.bias.len()
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Validation("model parameters must be finite".into()));
        }
        if let Some(s) = &self.standardizer {
            if s.shift.len() != self.d || s.scale.len() != self.d {
                return Err(Error::Shape("standardizer dimension differs from model".into()));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &FeatureMatrix) -> Result<()> {
        if x.d != self.d {
            return Err(Error::Shape(format!(
                "feature dimension {} does not match model dimension {}",
                x.d, self.d
            )));
        }
        Ok(())
    }

    fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (j, xj) in x.iter().enumerate() {
            let row = &self.weights[j * self.cls..(j + 1) * self.cls];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xj * w;
            }
        }
    }

    /// N×cls logits of already-standardized features.
    pub fn logits(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; x.n * self.cls];
        for (i, o) in out.chunks_mut(self.cls).enumerate() {
            self.logits_into(x.row(i), o);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), format!("bad model JSON: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub iterations: usize,
    pub l2: f64,
    pub seed: u64,
    /// Std of the normal weight initialization; 0 starts from zeros.
    pub init_std: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.5,
            iterations: 300,
            l2: 1e-4,
            seed: 0,
            init_std: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr >= 0.0
            && self.l2.is_finite()
            && self.l2 >= 0.0
            && self.init_std.is_finite()
            && self.init_std >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Objective before each update, plus the objective at the returned parameters.
    pub loss_trace: Vec<f64>,
    pub final_train_accuracy: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// Gradient of the training objective with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn check_labels(x: &FeatureMatrix, labels: &[usize], cls: usize) -> Result<()> {
    if labels.len() != x.n {
        return Err(Error::Shape(format!(
            "{} labels for {} feature rows",
            labels.len(),
            x.n
        )));
    }
    if x.n == 0 {
        return Err(Error::Validation("training needs at least one sample".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= cls) {
        return Err(Error::Validation(format!("label {l} outside [0, {cls})")));
    }
    Ok(())
}

/// Objective value and its gradient at `model`.
pub fn loss_and_gradient(
    model: &LinearModel,
    x: &FeatureMatrix,
    labels: &[usize],
    l2: f64,
) -> Result<(f64, Gradient)> {
    model.check_input(x)?;
    check_labels(x, labels, model.cls)?;
    let cls = model.cls;
    let inv_n = 1.0 / x.n as f64;
    let mut grad = Gradient {
        weights: vec![0.0; model.weights.len()],
        bias: vec![0.0; cls],
    };
    let mut loss = 0.0;
    let mut z = vec![0.0; cls];
    for (i, &y) in labels.iter().enumerate() {
        let xi = x.row(i);
        model.logits_into(xi, &mut z);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shifted_y = z[y] - max;
        let mut sum = 0.0;
        for v in z.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        loss += sum.ln() - shifted_y;
        for v in z.iter_mut() {
            *v /= sum;
        }
        z[y] -= 1.0;
        for (gb, r) in grad.bias.iter_mut().zip(&z) {
            *gb += r * inv_n;
        }
        for (j, xj) in xi.iter().enumerate() {
            let g = &mut grad.weights[j * cls..(j + 1) * cls];
            for (gw, r) in g.iter_mut().zip(&z) {
                *gw += xj * r * inv_n;
            }
        }
    }
    loss *= inv_n;
    if l2 > 0.0 {
        let mut sq = 0.0;
        for (g, w) in grad.weights.iter_mut().zip(&model.weights) {
            sq += w * w;
            *g += 2.0 * l2 * w;
        }
        loss += l2 * sq;
    }
    Ok((loss, grad))
}

fn step(model: &mut LinearModel, grad: &Gradient, lr: f64) {
    for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
        *w -= lr * g;
    }
    for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
        *b -= lr * g;
    }
}

fn accuracy(model: &LinearModel, x: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
    let logits = model.logits(x)?;
    let correct = logits
        .chunks(model.cls)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Fits a model from the seeded random initialization in `cfg`.
pub fn train(
    x: &FeatureMatrix,
    labels: &[usize],
    class_count: usize,
    cfg: &TrainConfig,
    pooling_spec: &str,
) -> Result<(LinearModel, TrainReport)> {
    cfg.validate()?;
    let init = LinearModel::random(x.d, class_count, cfg.init_std, cfg.seed, pooling_spec)?;
    train_from(init, x, labels, cfg)
}

/// Fits a model starting from `init` (warm start).
pub fn train_from(
    init: LinearModel,
    x: &FeatureMatrix,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainReport)> {
    cfg.validate()?;
    init.validate()?;
    init.check_input(x)?;
    check_labels(x, labels, init.cls)?;
    let mut model = init;
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for it in 0..=cfg.iterations {
        let (loss, grad) = loss_and_gradient(&model, x, labels, cfg.l2)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: it, loss });
        }
        trace.push(loss);
        if it < cfg.iterations {
            step(&mut model, &grad, cfg.lr);
        }
    }
    let report = TrainReport {
        loss_trace: trace,
        final_train_accuracy: accuracy(&model, x, labels)?,
        iterations: cfg.iterations,
        seed: cfg.seed,
    };
    Ok((model, report))
}

/// Trains two parameter-disjoint branches on `L_1 + L_2` in a single loop.
///
/// The reported accuracy is that of the averaged branch probabilities.
pub fn train_paired(
    x1: &FeatureMatrix,
    x2: &FeatureMatrix,
    labels: &[usize],
    class_count: usize,
    cfg: &TrainConfig,
    pooling_spec: &str,
) -> Result<(LinearModel, LinearModel, TrainReport)> {
    cfg.validate()?;
    let m1 = LinearModel::random(x1.d, class_count, cfg.init_std, cfg.seed, pooling_spec)?;
    let m2 = LinearModel::random(x2.d, class_count, cfg.init_std, cfg.seed, pooling_spec)?;
    train_paired_from([m1, m2], x1, x2, labels, cfg)
}

pub fn train_paired_from(
    init: [LinearModel; 2],
    x1: &FeatureMatrix,
    x2: &FeatureMatrix,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(LinearModel, LinearModel, TrainReport)> {
    cfg.validate()?;
    if x1.n != x2.n {
        return Err(Error::Shape(format!(
            "paired branches have {} and {} samples",
            x1.n, x2.n
        )));
    }
    let [mut m1, mut m2] = init;
    for (m, x) in [(&m1, x1), (&m2, x2)] {
        m.validate()?;
        m.check_input(x)?;
        check_labels(x, labels, m.cls)?;
    }
    if m1.cls != m2.cls {
        return Err(Error::Shape("paired branches disagree on class count".into()));
    }
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for it in 0..=cfg.iterations {
        let (l1, g1) = loss_and_gradient(&m1, x1, labels, cfg.l2)?;
        let (l2, g2) = loss_and_gradient(&m2, x2, labels, cfg.l2)?;
        let loss = l1 + l2;
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: it, loss });
        }
        trace.push(loss);
        if it < cfg.iterations {
            step(&mut m1, &g1, cfg.lr);
            step(&mut m2, &g2, cfg.lr);
        }
    }
    let p1 = softmax_rows(&m1.logits(x1)?, m1.cls);
    let p2 = softmax_rows(&m2.logits(x2)?, m2.cls);
    let avg: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| (a + b) / 2.0).collect();
    let correct = avg
        .chunks(m1.cls)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    let report = TrainReport {
        loss_trace: trace,
        final_train_accuracy: correct as f64 / labels.len() as f64,
        iterations: cfg.iterations,
        seed: cfg.seed,
    };
    Ok((m1, m2, report))
}

fn softmax_into(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn softmax_rows(logits: &[f64], cls: usize) -> Vec<f64> {
    let mut out = logits.to_vec();
    out.chunks_mut(cls).for_each(softmax_into);
    out
}

/// Row-wise softmax of the model logits. Applies the model's standardizer when it has one.
pub fn predict_probs(
    model: &LinearModel,
    x: &FeatureMatrix,
    sample_ids: Vec<String>,
) -> Result<ProbabilityMatrix> {
    model.check_input(x)?;
    if sample_ids.len() != x.n {
        return Err(Error::Shape(format!(
            "{} sample ids for {} feature rows",
            sample_ids.len(),
            x.n
        )));
    }
    let standardized;
    let x = match &model.standardizer {
        Some(s) => {
            standardized = s.apply(x)?;
            &standardized
        }
        None => x,
    };
    let rows = par::map_range(x.n, |i| {
        let mut row = vec![0.0; model.cls];
        model.logits_into(x.row(i), &mut row);
        softmax_into(&mut row);
        row
    });
    ProbabilityMatrix::new(sample_ids, model.cls, rows.concat())
}
