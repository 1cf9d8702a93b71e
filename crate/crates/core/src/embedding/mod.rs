//! Text-to-vector providers and the embedding table they fill.

mod file;
mod hash;

use std::collections::{btree_map, BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::prompt::PromptRelation;
use crate::tag::normalize_text;

pub use file::{parse_emb, read_emb, read_emb_file, write_emb, write_emb_file, MAGIC, VERSION};
pub(crate) use hash::splitmix64;
pub use hash::{hash_embed, token_hash, tokenize};

pub const DEFAULT_DIM: usize = 384;

/// Fixed-dimension vectors keyed by normalized text.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(dim: usize, entries: BTreeMap<String, Vec<f32>>) -> Result<Self> {
        let mut t = Self::new(dim);
        for (k, v) in entries {
            t.insert(k, v)?;
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, key: String, vec: Vec<f32>) -> Result<()> {
        if vec.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vec.len(),
            });
        }
        if vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::Embedding(format!("non-finite component for key {key:?}")));
        }
        self.entries.insert(key, vec);
        Ok(())
    }

    /// Exact lookup of an already normalized key.
    pub fn get(&self, key: &str) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    /// Lookup of raw text, normalized first.
    pub fn lookup(&self, text: &str) -> Option<&[f32]> {
        self.get(&normalize_text(text))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> btree_map::Iter<'_, String, Vec<f32>> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Hash,
    File,
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hash" => Ok(ProviderKind::Hash),
            "file" => Ok(ProviderKind::File),
            other => Err(Error::Config(format!("unknown provider {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub kind: ProviderKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl ProviderSpec {
    pub fn hash(dim: usize, seed: u64) -> Self {
        Self {
            kind: ProviderKind::Hash,
            dim,
            source: None,
            seed,
        }
    }

    pub fn file(path: impl Into<PathBuf>, dim: usize) -> Self {
        Self {
            kind: ProviderKind::File,
            dim,
            source: Some(path.into()),
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if self.kind == ProviderKind::File && self.source.is_none() {
            return Err(Error::Config("file provider needs a source path".into()));
        }
        Ok(())
    }
}

/// A resolved text encoder.
#[derive(Debug, Clone)]
pub enum Provider {
    Hash { dim: usize, seed: u64 },
    File(EmbeddingTable),
}

impl Provider {
    pub fn from_spec(spec: &ProviderSpec) -> Result<Self> {
        spec.check()?;
        match spec.kind {
            ProviderKind::Hash => Ok(Provider::Hash {
                dim: spec.dim,
                seed: spec.seed,
            }),
            ProviderKind::File => {
                let table = read_emb_file(spec.source.as_ref().unwrap())?;
                if table.dim() != spec.dim {
                    return Err(Error::DimensionMismatch {
                        expected: spec.dim,
                        found: table.dim(),
                    });
                }
                Ok(Provider::File(table))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Provider::Hash { dim, .. } => *dim,
            Provider::File(t) => t.dim(),
        }
    }

    pub fn embed(&self, key: &str) -> Result<Vec<f32>> {
        match self {
            Provider::Hash { dim, seed } => Ok(hash_embed(key, *dim, *seed)),
            Provider::File(t) => t
                .get(key)
                .map(<[f32]>::to_vec)
                .ok_or_else(|| Error::MissingKey(key.to_string())),
        }
    }
}

/// Every normalized text a dataset can feed to the model: node, edge, task,
/// class (and negative class) texts plus the five prompt-relation texts.
pub fn collect_keys<'a>(datasets: impl IntoIterator<Item = &'a Dataset>) -> BTreeSet<String> {
    let mut keys: BTreeSet<String> = PromptRelation::ALL.iter().map(|r| normalize_text(r.text())).collect();
    for ds in datasets {
        let m = &ds.manifest;
        keys.insert(normalize_text(&m.task_text));
        keys.extend(m.class_texts.iter().map(|t| normalize_text(t)));
        if let Some(neg) = &m.negative_class_texts {
            keys.extend(neg.iter().map(|t| normalize_text(t)));
        }
        for g in &ds.graphs {
            keys.extend(g.nodes.iter().map(|n| normalize_text(&n.text)));
            keys.extend(g.edges.iter().map(|e| normalize_text(&e.text)));
        }
    }
    keys
}

/// Embeds the full key set of `datasets` with `provider`.
pub fn embed_all<'a>(datasets: impl IntoIterator<Item = &'a Dataset>, provider: &Provider) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(provider.dim());
    for key in collect_keys(datasets) {
        let v = provider.embed(&key)?;
        table.insert(key, v)?;
    }
    Ok(table)
}
