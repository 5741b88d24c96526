//! Probability-level late fusion and top-1 evaluation.
//!
//! Per-modality probability matrices are aligned on their common sample ids and then combined
//! row by row, either as a plain mean or as `P = sum_i w_i P_i` with non-negative weights
//! normalized to sum to one. Fused rows are accumulated in ascending modality order.
//!
//! Weights can be chosen on labelled validation data by scanning a grid on the probability
//! simplex. Grid points are ranked by correct count, then by the lexicographically smallest
//! weight vector with modalities ordered by name, so the result does not depend on input order
//! or on how the scan is scheduled.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::argmax;
use crate::error::{Error, Result};
use crate::io::probs::ProbabilityMatrix;
use crate::par;

/// Non-negative weights per named modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    names: Vec<String>,
    w: Vec<f64>,
}

impl FusionWeights {
    pub fn new(names: Vec<String>, w: Vec<f64>) -> Result<Self> {
        let fw = Self { names, w };
        fw.validate()?;
        Ok(fw)
    }

    pub fn uniform(names: &[String]) -> Result<Self> {
        Self::new(names.to_vec(), vec![1.0; names.len()])?.canonical()
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.is_empty() || self.names.len() != self.w.len() {
            return Err(Error::Validation(format!(
                "{} names for {} weights",
                self.names.len(),
                self.w.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Validation(format!("modality `{dup}` weighted twice")));
        }
        if let Some(w) = self.w.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Validation(format!("weight {w} is not a finite non-negative number")));
        }
        if self.w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Validation("weights sum to zero".into()));
        }
        Ok(())
    }

    /// The same weights scaled to sum to one.
    ///
    /// The total is accumulated in name order so listing order never changes the result.
    pub fn canonical(&self) -> Result<Self> {
        self.validate()?;
        let mut order: Vec<usize> = (0..self.w.len()).collect();
        order.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        let sum: f64 = order.iter().map(|&i| self.w[i]).sum();
        Ok(Self {
            names: self.names.clone(),
            w: self.w.iter().map(|w| w / sum).collect(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.w[i])
    }

    /// Canonical weights reordered to `order`; names must match exactly.
    fn coefficients(&self, order: &[String]) -> Result<Vec<f64>> {
        let canon = self.canonical()?;
        if let Some(extra) = canon.names.iter().find(|n| !order.contains(n)) {
            return Err(Error::Key(extra.clone()));
        }
        order
            .iter()
            .map(|name| canon.get(name).ok_or_else(|| Error::Key(name.clone())))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), format!("bad weights JSON: {e}")))?;
        w.validate()?;
        Ok(w)
    }
}

/// Several modalities' probabilities over one shared, ordered list of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPredictions {
    sample_ids: Vec<String>,
    names: Vec<String>,
    matrices: Vec<Vec<f64>>,
    class_count: usize,
    labels: Option<Vec<usize>>,
    dropped: Vec<String>,
}

impl AlignedPredictions {
    /// Builds aligned predictions from matrices that already share row order.
    pub fn from_parts(
        sample_ids: Vec<String>,
        names: Vec<String>,
        matrices: Vec<Vec<f64>>,
        class_count: usize,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if names.is_empty() || names.len() != matrices.len() {
            return Err(Error::Validation("need one matrix per modality name".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Validation(format!("modality `{dup}` given twice")));
        }
        for (name, m) in names.iter().zip(&matrices) {
            // reuse the matrix invariants: non-negative, row-stochastic, unique ids
            ProbabilityMatrix::new(sample_ids.clone(), class_count, m.clone())
                .map_err(|e| Error::Validation(format!("modality `{name}`: {e}")))?;
        }
        if let Some(l) = &labels {
            if l.len() != sample_ids.len() {
                return Err(Error::Shape(format!(
                    "{} labels for {} samples",
                    l.len(),
                    sample_ids.len()
                )));
            }
            if let Some(bad) = l.iter().find(|&&y| y >= class_count) {
                return Err(Error::Validation(format!("label {bad} outside [0, {class_count})")));
            }
        }
        Ok(Self {
            sample_ids,
            names,
            matrices,
            class_count,
            labels,
            dropped: Vec::new(),
        })
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Ids removed during alignment because some input lacked them.
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn matrix(&self, name: &str) -> Result<ProbabilityMatrix> {
        let i = self.index_of(name)?;
        ProbabilityMatrix::new(self.sample_ids.clone(), self.class_count, self.matrices[i].clone())
    }

    fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Key(name.to_string()))
    }

    /// Copy with modalities reordered by name.
    fn sorted_by_name(&self) -> Self {
        let mut order: Vec<usize> = (0..self.names.len()).collect();
        order.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        Self {
            sample_ids: self.sample_ids.clone(),
            names: order.iter().map(|&i| self.names[i].clone()).collect(),
            matrices: order.iter().map(|&i| self.matrices[i].clone()).collect(),
            class_count: self.class_count,
            labels: self.labels.clone(),
            dropped: self.dropped.clone(),
        }
    }

    /// Writes `sum_m coef[m] * P_m[row]` into `out`, accumulating in modality order.
    fn fuse_row(&self, coef: &[f64], row: usize, out: &mut [f64]) {
        let cls = self.class_count;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (m, c) in coef.iter().enumerate() {
            let p = &self.matrices[m][row * cls..(row + 1) * cls];
            for (o, v) in out.iter_mut().zip(p) {
                *o += c * v;
            }
        }
    }

    fn correct_count(&self, coef: &[f64], labels: &[usize]) -> usize {
        let mut buf = vec![0.0; self.class_count];
        (0..self.len())
            .filter(|&r| {
                self.fuse_row(coef, r, &mut buf);
                argmax(&buf) == labels[r]
            })
            .count()
    }
}

/// Intersects the inputs' sample ids, keeping the first matrix's order.
///
/// With `labels`, samples that have no label are dropped as well.
pub fn align(
    preds: &[(String, ProbabilityMatrix)],
    labels: Option<&BTreeMap<String, usize>>,
) -> Result<AlignedPredictions> {
    let (_, first) = preds
        .first()
        .ok_or_else(|| Error::Validation("nothing to align".into()))?;
    let cls = first.class_count();
    if let Some((name, m)) = preds.iter().find(|(_, m)| m.class_count() != cls) {
        return Err(Error::Shape(format!(
            "modality `{name}` has {} classes, expected {cls}",
            m.class_count()
        )));
    }
    let mut seen = HashSet::new();
    if let Some((dup, _)) = preds.iter().find(|(n, _)| !seen.insert(n.as_str())) {
        return Err(Error::Validation(format!("modality `{dup}` given twice")));
    }

    let indexes: Vec<HashMap<&str, usize>> = preds
        .iter()
        .map(|(_, m)| {
            m.sample_ids()
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect()
        })
        .collect();
    let keep = |id: &str| {
        indexes.iter().all(|ix| ix.contains_key(id)) && labels.is_none_or(|l| l.contains_key(id))
    };

    let sample_ids: Vec<String> = first
        .sample_ids()
        .iter()
        .filter(|id| keep(id))
        .cloned()
        .collect();
    let mut dropped = Vec::new();
    let mut dropped_seen = HashSet::new();
    for (_, m) in preds {
        for id in m.sample_ids() {
            if !keep(id) && dropped_seen.insert(id.clone()) {
                dropped.push(id.clone());
            }
        }
    }
    if sample_ids.is_empty() {
        return Err(Error::Alignment(format!(
            "no sample id is shared by all {} inputs{}",
            preds.len(),
            if labels.is_some() { " and the labels" } else { "" }
        )));
    }

    let matrices = preds
        .iter()
        .zip(&indexes)
        .map(|((_, m), ix)| {
            sample_ids
                .iter()
                .flat_map(|id| m.row(ix[id.as_str()]).iter().copied())
                .collect()
        })
        .collect();
    Ok(AlignedPredictions {
        labels: labels.map(|l| sample_ids.iter().map(|id| l[id]).collect()),
        sample_ids,
        names: preds.iter().map(|(n, _)| n.clone()).collect(),
        matrices,
        class_count: cls,
        dropped,
    })
}

/// Row-wise arithmetic mean of the named modalities.
pub fn average_fuse(a: &AlignedPredictions, subset: &[&str]) -> Result<ProbabilityMatrix> {
    if subset.is_empty() {
        return Err(Error::Validation("average fusion needs at least one modality".into()));
    }
    let mut idx: Vec<usize> = subset
        .iter()
        .map(|n| a.index_of(n))
        .collect::<Result<_>>()?;
    idx.sort_unstable();
    idx.dedup();
    let m = idx.len() as f64;
    let mut out = vec![0.0; a.len() * a.class_count];
    for &i in &idx {
        for (o, v) in out.iter_mut().zip(&a.matrices[i]) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= m);
    ProbabilityMatrix::new(a.sample_ids.clone(), a.class_count, out)
}

/// `sum_i w_i P_i` with the weights scaled to sum to one.
pub fn weighted_fuse(a: &AlignedPredictions, w: &FusionWeights) -> Result<ProbabilityMatrix> {
    let coef = w.coefficients(&a.names)?;
    let cls = a.class_count;
    let mut out = vec![0.0; a.len() * cls];
    for (r, row) in out.chunks_mut(cls).enumerate() {
        a.fuse_row(&coef, r, row);
    }
    ProbabilityMatrix::new(a.sample_ids.clone(), cls, out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub top1: f64,
    pub n: usize,
    pub correct: usize,
    /// Per true class, the fraction predicted correctly (0 for classes without samples).
    pub per_class_accuracy: Vec<f64>,
    pub support: Vec<usize>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    /// Top-1 accuracy as a percentage with three decimals, e.g. `73.213`.
    pub fn top1_percent(&self) -> String {
        format!("{:.3}", self.top1 * 100.0)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>6} {:>8} {:>10}", "class", "support", "top-1 (%)");
        for (c, (acc, sup)) in self.per_class_accuracy.iter().zip(&self.support).enumerate() {
            if *sup > 0 {
                let _ = writeln!(s, "{c:>6} {sup:>8} {:>10.3}", acc * 100.0);
            }
        }
        let _ = writeln!(s, "{:>6} {:>8} {:>10}", "all", self.n, self.top1_percent());
        s
    }
}

/// Argmax accuracy with ties resolved to the smallest class index.
pub fn top1(p: &ProbabilityMatrix, labels: &[usize]) -> Result<EvalReport> {
    if labels.len() != p.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} probability rows",
            labels.len(),
            p.len()
        )));
    }
    let cls = p.class_count();
    if let Some(bad) = labels.iter().find(|&&y| y >= cls) {
        return Err(Error::Validation(format!("label {bad} outside [0, {cls})")));
    }
    let mut confusion = vec![vec![0usize; cls]; cls];
    for (row, &y) in p.rows().zip(labels) {
        confusion[y][argmax(row)] += 1;
    }
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let correct: usize = (0..cls).map(|c| confusion[c][c]).sum();
    let per_class_accuracy = (0..cls)
        .map(|c| {
            if support[c] == 0 {
                0.0
            } else {
                confusion[c][c] as f64 / support[c] as f64
            }
        })
        .collect();
    Ok(EvalReport {
        top1: if labels.is_empty() {
            0.0
        } else {
            correct as f64 / labels.len() as f64
        },
        n: labels.len(),
        correct,
        per_class_accuracy,
        support,
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exhaustive,
    Refine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Grid step for exhaustive mode.
    pub step: f64,
    pub coarse_step: f64,
    pub fine_step: f64,
    /// Half-width of the fine box around the coarse incumbent.
    pub radius: f64,
    /// Largest grid exhaustive mode may enumerate.
    pub max_grid_points: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            mode: SearchMode::Exhaustive,
            step: 0.05,
            coarse_step: 0.1,
            fine_step: 0.02,
            radius: 0.1,
            max_grid_points: 100_000,
        }
    }
}

/// Point `k / n` of the simplex grid with `sum(k) == n`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct GridPoint {
    k: Vec<u32>,
    n: u32,
}

impl GridPoint {
    fn weights(&self) -> Vec<f64> {
        self.k.iter().map(|&k| k as f64 / self.n as f64).collect()
    }

    /// Lexicographic order of the exact rational weights.
    fn cmp_weights(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.k.iter().zip(&other.k) {
            let ord = (*a as u64 * other.n as u64).cmp(&(*b as u64 * self.n as u64));
            if ord.is_ne() {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    }
}

fn divisions(step: f64) -> Result<u32> {
    let n = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || (n * step - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("grid step {step} must divide 1")));
    }
    Ok(n as u32)
}

/// Number of points of the `m`-dimensional simplex grid with `n` divisions: C(n+m-1, m-1).
pub fn simplex_grid_size(n: u32, m: usize) -> u64 {
    let (n, m) = (n as u128, m as u128);
    let mut acc: u128 = 1;
    for i in 1..m {
        acc = acc * (n + i) / i;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn simplex_grid(n: u32, m: usize) -> Vec<GridPoint> {
    fn rec(rest: u32, m: usize, prefix: &mut Vec<u32>, n: u32, out: &mut Vec<GridPoint>) {
        if prefix.len() + 1 == m {
            prefix.push(rest);
            out.push(GridPoint { k: prefix.clone(), n });
            prefix.pop();
            return;
        }
        for k in 0..=rest {
            prefix.push(k);
            rec(rest - k, m, prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, m, &mut Vec::with_capacity(m), n, &mut out);
    out
}

/// Grid points with `n` divisions whose weights are within `radius` of `center` in every coordinate.
fn box_grid(n: u32, center: &[f64], radius: f64) -> Vec<GridPoint> {
    let eps = 1e-9;
    let ranges: Vec<(u32, u32)> = center
        .iter()
        .map(|&c| {
            let lo = ((c - radius) * n as f64 - eps).ceil().max(0.0) as u32;
            let hi = ((c + radius) * n as f64 + eps).floor().min(n as f64) as u32;
            (lo, hi)
        })
        .collect();
    let m = center.len();
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(m);
    fn rec(
        ranges: &[(u32, u32)],
        sum: u32,
        n: u32,
        prefix: &mut Vec<u32>,
        out: &mut Vec<GridPoint>,
    ) {
        let i = prefix.len();
        if i + 1 == ranges.len() {
            let last = n - sum;
            if (ranges[i].0..=ranges[i].1).contains(&last) {
                prefix.push(last);
                out.push(GridPoint { k: prefix.clone(), n });
                prefix.pop();
            }
            return;
        }
        for k in ranges[i].0..=ranges[i].1.min(n - sum) {
            prefix.push(k);
            rec(ranges, sum + k, n, prefix, out);
            prefix.pop();
        }
    }
    rec(&ranges, 0, n, &mut prefix, &mut out);
    out
}

/// Evaluates every point and returns the best one with its correct count.
fn best_of(a: &AlignedPredictions, labels: &[usize], points: Vec<GridPoint>) -> Result<(GridPoint, usize)> {
    let names = a.names.clone();
    let scored: Vec<Result<usize>> = par::map_slice(&points, |p| {
        let fw = FusionWeights::new(names.clone(), p.weights())?;
        Ok(a.correct_count(&fw.coefficients(&names)?, labels))
    });
    let mut best: Option<(usize, usize)> = None;
    for (i, s) in scored.into_iter().enumerate() {
        let s = s?;
        let better = match best {
            None => true,
            Some((bi, bs)) => s > bs || (s == bs && points[i].cmp_weights(&points[bi]).is_lt()),
        };
        if better {
            best = Some((i, s));
        }
    }
    let (i, s) = best.ok_or_else(|| Error::Validation("empty weight grid".into()))?;
    Ok((points[i].clone(), s))
}

/// Chooses fusion weights by validation top-1 over a simplex grid.
///
/// Returned weights are canonical (sum to one) with modalities ordered by name.
pub fn search_weights(
    a_val: &AlignedPredictions,
    cfg: &SearchConfig,
) -> Result<(FusionWeights, EvalReport)> {
    let labels = a_val
        .labels()
        .ok_or_else(|| Error::Validation("weight search needs validation labels".into()))?;
    let m = a_val.names.len();
    if m < 2 {
        return Err(Error::Validation(format!("weight search needs at least 2 modalities, got {m}")));
    }
    let a = a_val.sorted_by_name();
    let labels = labels.to_vec();

    let best = match cfg.mode {
        SearchMode::Exhaustive => {
            let n = divisions(cfg.step)?;
            let points = simplex_grid_size(n, m);
            if points > cfg.max_grid_points {
                return Err(Error::Budget {
                    points,
                    budget: cfg.max_grid_points,
                });
            }
            best_of(&a, &labels, simplex_grid(n, m))?.0
        }
        SearchMode::Refine => {
            let nc = divisions(cfg.coarse_step)?;
            let nf = divisions(cfg.fine_step)?;
            if !(cfg.radius.is_finite() && cfg.radius >= 0.0) {
                return Err(Error::Validation(format!("bad refine radius {}", cfg.radius)));
            }
            let (coarse, cs) = best_of(&a, &labels, simplex_grid(nc, m))?;
            let fine_points = box_grid(nf, &coarse.weights(), cfg.radius);
            let (fine, fs) = best_of(&a, &labels, fine_points)?;
            if fs > cs || (fs == cs && fine.cmp_weights(&coarse).is_lt()) {
                fine
            } else {
                coarse
            }
        }
    };

    let weights = FusionWeights::new(a.names.clone(), best.weights())?.canonical()?;
    let report = top1(&weighted_fuse(&a, &weights)?, &labels)?;
    Ok((weights, report))
}
