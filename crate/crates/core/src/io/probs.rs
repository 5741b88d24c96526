//! Per-sample class probability matrices and their CSV container.
//!
//! ```text
//! #mmgesture-probs v1 classes=4
//! s1,0.25,0.25,0.25,0.25
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const PROBS_HEADER_PREFIX: &str = "#mmgesture-probs v1 classes=";

/// Rows whose sum lies within this distance of 1 are renormalized on load; others are rejected.
pub const RENORMALIZE_BAND: f64 = 1e-3;

/// Maximum row-sum deviation accepted by [`ProbabilityMatrix::new`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// N×cls row-stochastic matrix; row `i` holds the class distribution of `sample_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    sample_ids: Vec<String>,
    class_count: usize,
    probs: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn new(sample_ids: Vec<String>, class_count: usize, probs: Vec<f64>) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::Shape("class count must be positive".into()));
        }
        if probs.len() != sample_ids.len() * class_count {
            return Err(Error::Shape(format!(
                "{} probabilities for {} samples of {} classes",
                probs.len(),
                sample_ids.len(),
                class_count
            )));
        }
        check_unique(&sample_ids)?;
        for (i, row) in probs.chunks(class_count).enumerate() {
            if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::Validation(format!(
                    "row `{}` has invalid probability {p}",
                    sample_ids[i]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Normalization {
                    line: i + 1,
                    id: sample_ids[i].clone(),
                    sum,
                });
            }
        }
        Ok(Self {
            sample_ids,
            class_count,
            probs,
        })
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
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

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.class_count..(i + 1) * self.class_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.class_count)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{PROBS_HEADER_PREFIX}{}\n", self.class_count);
        for (id, row) in self.sample_ids.iter().zip(self.rows()) {
            out.push_str(id);
            for p in row {
                out.push(',');
                out.push_str(&format_sig9(*p));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("empty probability file".into()))?;
        let class_count: usize = header
            .strip_prefix(PROBS_HEADER_PREFIX)
            .and_then(|c| c.trim().parse().ok())
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::Format(format!("bad probability header `{header}`")))?;

        let mut ids = Vec::new();
        let mut seen = HashSet::new();
        let mut probs = Vec::new();
        let mut row = Vec::with_capacity(class_count);
        for (line, text) in lines {
            if text.trim().is_empty() {
                continue;
            }
            let mut fields = text.split(',');
            let id = fields.next().unwrap_or_default().trim().to_string();
            if id.is_empty() {
                return Err(Error::parse(line, "empty sample id"));
            }
            row.clear();
            for f in fields {
                let p: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad probability `{f}`")))?;
                row.push(p);
            }
            if row.len() != class_count {
                return Err(Error::parse(
                    line,
                    format!("expected {class_count} probabilities, found {}", row.len()),
                ));
            }
            if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::Validation(format!(
                    "line {line}: invalid probability {p} for `{id}`"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > RENORMALIZE_BAND {
                return Err(Error::Normalization { line, id, sum });
            }
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateSample(id));
            }
            probs.extend(row.iter().map(|p| p / sum));
            ids.push(id);
        }
        Self::new(ids, class_count, probs)
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateSample(id.clone()));
        }
    }
    Ok(())
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros trimmed.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let mut s = trim_zeros(mantissa.to_string());
        let _ = write!(s, "e{exp}");
        s
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn load_probs(path: &Path) -> Result<ProbabilityMatrix> {
    ProbabilityMatrix::parse(&super::read_to_string(path)?)
}

pub fn save_probs(p: &ProbabilityMatrix, path: &Path) -> Result<()> {
    super::write_atomic(path, p.to_csv().as_bytes())
}
