//! Sidecar index written next to preprocessing outputs.

use mmgesture_core::io::SampleEntry;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Produced {
    pub id: String,
    pub file: String,
    /// `[T, H, W, C]` of the written volume.
    pub dims: [usize; 4],
}

impl Produced {
    pub fn new(id: &str, file: String, dims: [usize; 4]) -> Self {
        Self {
            id: id.to_string(),
            file,
            dims,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageIndex {
    pub stage: String,
    /// SHA-256 of the compact JSON of `params`.
    pub params_hash: String,
    pub params: serde_json::Value,
    pub produced: Vec<Produced>,
    pub failed: Vec<Failure>,
}

pub fn params_hash(params: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(params.to_string().as_bytes()))
}

impl StageIndex {
    /// Splits per-sample results, kept in manifest order, into produced and failed lists.
    pub fn collect(
        stage: &str,
        params: serde_json::Value,
        entries: &[SampleEntry],
        results: Vec<Result<Produced, String>>,
    ) -> Self {
        let mut produced = Vec::new();
        let mut failed = Vec::new();
        for (entry, r) in entries.iter().zip(results) {
            match r {
                Ok(p) => produced.push(p),
                Err(error) => failed.push(Failure {
                    id: entry.id.clone(),
                    error,
                }),
            }
        }
        Self {
            stage: stage.to_string(),
            params_hash: params_hash(&params),
            params,
            produced,
            failed,
        }
    }
}
