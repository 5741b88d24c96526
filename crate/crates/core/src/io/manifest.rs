//! JSON-lines dataset manifests.
//!
//! The first line is a header object `{"classes": cls}` (optionally with `"splits": [...]`),
//! followed by one [`SampleEntry`] object per line.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::DEFAULT_CLASS_COUNT;

pub const DEFAULT_SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub label: usize,
    pub split: String,
    /// Modality name to file path. Unknown modality names are kept as-is.
    #[serde(default, rename = "modalities")]
    pub modality_paths: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<SampleEntry>,
    pub class_count: usize,
    pub split_names: BTreeSet<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    splits: Option<Vec<String>>,
}

// Raw entry with a signed label so out-of-range values surface as LabelRange, not ParseError.
#[derive(Deserialize)]
struct RawEntry {
    id: String,
    label: i64,
    split: String,
    #[serde(default)]
    modalities: BTreeMap<String, String>,
}

impl DatasetManifest {
    /// Builds a manifest with the canonical train/val/test splits, validating every invariant.
    pub fn new(entries: Vec<SampleEntry>, class_count: usize) -> Result<Self> {
        let split_names = DEFAULT_SPLITS.iter().map(|s| s.to_string()).collect();
        Self::with_splits(entries, class_count, split_names)
    }

    pub fn with_splits(
        entries: Vec<SampleEntry>,
        class_count: usize,
        split_names: BTreeSet<String>,
    ) -> Result<Self> {
        let manifest = Self {
            entries,
            class_count,
            split_names,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 {
            return Err(Error::Validation("class count must be positive".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateSample(e.id.clone()));
            }
            if e.label >= self.class_count {
                return Err(Error::LabelRange {
                    id: e.id.clone(),
                    label: e.label as i64,
                    class_count: self.class_count,
                });
            }
            if !self.split_names.contains(&e.split) {
                return Err(Error::Validation(format!(
                    "sample `{}` has undeclared split `{}`",
                    e.id, e.split
                )));
            }
        }
        Ok(())
    }

    /// Entries of one split, in manifest order.
    pub fn split<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a SampleEntry> + 'a {
        self.entries.iter().filter(move |e| e.split == name)
    }

    /// Map from sample id to label.
    pub fn labels(&self) -> BTreeMap<String, usize> {
        self.entries
            .iter()
            .map(|e| (e.id.clone(), e.label))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (header_line, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "manifest is empty; expected a header object"))?;
        let header: Header = serde_json::from_str(header)
            .map_err(|e| Error::parse(header_line, format!("bad header: {e}")))?;
        let split_names: BTreeSet<String> = match header.splits {
            Some(s) => s.into_iter().collect(),
            None => DEFAULT_SPLITS.iter().map(|s| s.to_string()).collect(),
        };
        if header.classes == 0 {
            return Err(Error::parse(header_line, "header `classes` must be positive"));
        }

        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (line, text) in lines {
            let raw: RawEntry = serde_json::from_str(text).map_err(|e| Error::parse(line, e.to_string()))?;
            if raw.label < 0 || raw.label as u64 >= header.classes as u64 {
                return Err(Error::LabelRange {
                    id: raw.id,
                    label: raw.label,
                    class_count: header.classes,
                });
            }
            if !seen.insert(raw.id.clone()) {
                return Err(Error::DuplicateSample(raw.id));
            }
            entries.push(SampleEntry {
                id: raw.id,
                label: raw.label as usize,
                split: raw.split,
                modality_paths: raw.modalities,
            });
        }
        Self::with_splits(entries, header.classes, split_names)
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            classes: self.class_count,
            splits: if self.has_default_splits() {
                None
            } else {
                Some(self.split_names.iter().cloned().collect())
            },
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    fn has_default_splits(&self) -> bool {
        self.split_names.len() == DEFAULT_SPLITS.len()
            && DEFAULT_SPLITS.iter().all(|s| self.split_names.contains(*s))
    }
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            class_count: DEFAULT_CLASS_COUNT,
            split_names: DEFAULT_SPLITS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    DatasetManifest::parse(&super::read_to_string(path)?)
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    super::write_atomic(path, manifest.to_jsonl().as_bytes())
}
