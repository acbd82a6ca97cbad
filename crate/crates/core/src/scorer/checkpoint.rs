//! Checkpoint container.
//!
//! Layout: the 4-byte magic `STCK`, a little-endian `u32` format version, a
//! little-endian `u64` manifest length, the JSON manifest, then every array
//! as raw little-endian `f64` values in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::params::{ScorerParams, Task, Tensor};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"STCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    pub stage: String,
    pub manifest_hash: String,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub soft_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    task: Task,
    seed: u64,
    max_len: usize,
    vocab: Vocabulary,
    lineage: Lineage,
    arrays: Vec<ArrayEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ScorerParams,
    pub vocab: Vocabulary,
    pub max_len: usize,
    pub lineage: Lineage,
}

impl Checkpoint {
    pub fn task(&self) -> Task {
        self.params.task
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            task: self.params.task,
            seed: self.params.seed,
            max_len: self.max_len,
            vocab: self.vocab.clone(),
            lineage: self.lineage.clone(),
            arrays: self
                .params
                .tensors
                .iter()
                .map(|t| ArrayEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * self.params.num_values());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.params.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |message: String| Error::Checkpoint {
            path: path.to_path_buf(),
            message,
        };
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(fail("not a checkpoint (bad magic or truncated header)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(fail(format!("unsupported format version {version}")));
        }
        let json_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < json_len {
            return Err(fail("truncated manifest".into()));
        }
        let manifest: Manifest =
            serde_json::from_slice(&body[..json_len]).map_err(|e| fail(format!("bad manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(fail(format!("unsupported format version {}", manifest.format_version)));
        }
        let mut data = &body[json_len..];
        let expected: usize = manifest
            .arrays
            .iter()
            .map(|a| a.shape.iter().product::<usize>() * 8)
            .sum();
        if data.len() != expected {
            return Err(fail(format!(
                "array section has {} bytes, manifest needs {expected}{}",
                data.len(),
                if data.len() < expected { " (truncated)" } else { "" }
            )));
        }
        let mut tensors = Vec::with_capacity(manifest.arrays.len());
        for a in &manifest.arrays {
            let n: usize = a.shape.iter().product();
            let values = data[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            data = &data[n * 8..];
            tensors.push(Tensor {
                name: a.name.clone(),
                shape: a.shape.clone(),
                data: values,
            });
        }
        let params = ScorerParams {
            task: manifest.task,
            seed: manifest.seed,
            tensors,
        };
        params.check_layout(manifest.task)?;
        if params.vocab_size() != manifest.vocab.len() {
            return Err(Error::Shape(format!(
                "embedding has {} rows but vocabulary has {} ids",
                params.vocab_size(),
                manifest.vocab.len()
            )));
        }
        Ok(Self {
            params,
            vocab: manifest.vocab,
            max_len: manifest.max_len,
            lineage: manifest.lineage,
        })
    }

    /// Writes the checkpoint and returns its id (hex SHA-256 of the bytes).
    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io("scorer", parent, e))?;
        }
        std::fs::write(path, &bytes).map_err(|e| Error::io("scorer", path, e))?;
        Ok(digest(&bytes))
    }

    /// Loads a checkpoint and its id.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io("scorer", path, e))?;
        Ok((Self::from_bytes(&bytes, path)?, digest(&bytes)))
    }

    /// Loads a checkpoint whose head must serve `task`.
    pub fn load_for(path: &Path, task: Task) -> Result<(Self, String)> {
        let (ckpt, id) = Self::load(path)?;
        ckpt.params.check_layout(task)?;
        Ok((ckpt, id))
    }

    pub fn id(&self) -> String {
        digest(&self.to_bytes())
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn save_params(params: &ScorerParams, vocab: &Vocabulary, max_len: usize, path: &Path) -> Result<String> {
    Checkpoint {
        params: params.clone(),
        vocab: vocab.clone(),
        max_len,
        lineage: Lineage::default(),
    }
    .save(path)
}

pub fn load_params(path: &Path, task: Task) -> Result<ScorerParams> {
    Ok(Checkpoint::load_for(path, task)?.0.params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(task: Task) -> Checkpoint {
        let vocab = Vocabulary::build(["abcdef"]);
        Checkpoint {
            params: ScorerParams::init(task, vocab.len(), 4, 11),
            vocab,
            max_len: 32,
            lineage: Lineage {
                stage: "teacher".into(),
                manifest_hash: "abc".into(),
                parent: None,
                soft_files: vec![],
            },
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ckpt");
        let c = sample(Task::MultipleChoice);
        let id = c.save(&path).unwrap();
        let (back, id2) = Checkpoint::load(&path).unwrap();
        assert_eq!(id, id2);
        assert_eq!(back, c);
        for (a, b) in back.params.tensors.iter().zip(&c.params.tensors) {
            assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ckpt");
        let bytes = sample(Task::Extractive).to_bytes();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = Checkpoint::load(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        std::fs::write(&path, &bytes[..10]).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut bytes = sample(Task::Extractive).to_bytes();
        bytes[4] = 9;
        let err = Checkpoint::from_bytes(&bytes, Path::new("x")).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }

    #[test]
    fn mc_params_rejected_for_span_head() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mc.ckpt");
        sample(Task::MultipleChoice).save(&path).unwrap();
        assert!(matches!(
            Checkpoint::load_for(&path, Task::Extractive),
            Err(Error::Shape(_))
        ));
        assert!(load_params(&path, Task::MultipleChoice).is_ok());
    }
}
