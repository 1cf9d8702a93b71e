use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::prompt::AblationMode;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"OFACKPT1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub dim: usize,
    pub layers: usize,
    pub relations: BTreeMap<usize, String>,
    pub ablation: AblationMode,
    pub dropout: f64,
    pub seed: u64,
    pub blocks: Vec<BlockInfo>,
    /// Free-form run metadata (provider, hops, optimizer settings).
    #[serde(default)]
    pub run: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub seed: u64,
    pub run: serde_json::Value,
}

impl Checkpoint {
    pub fn new(params: ModelParams<f32>, seed: u64, run: serde_json::Value) -> Self {
        Self { params, seed, run }
    }

    fn header(&self) -> CheckpointHeader {
        let c = &self.params.config;
        CheckpointHeader {
            dim: c.dim,
            layers: c.layers,
            relations: c.relations.iter().cloned().enumerate().collect(),
            ablation: c.ablation,
            dropout: c.dropout,
            seed: self.seed,
            blocks: self
                .params
                .blocks()
                .into_iter()
                .map(|(name, b)| BlockInfo { name, len: b.len() })
                .collect(),
            run: self.run.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 4 * self.params.num_values());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, block) in self.params.blocks() {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = bytes
            .get(16..16usize.saturating_add(hlen))
            .ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(body)?;
        let relations: Vec<String> = header.relations.values().cloned().collect();
        if header.relations.keys().copied().ne(0..relations.len()) {
            return Err(bad("relation ids are not dense"));
        }
        let config = ModelConfig {
            dim: header.dim,
            layers: header.layers,
            dropout: header.dropout,
            ablation: header.ablation,
            relations,
        };
        config.check()?;
        let mut params = ModelParams::<f32>::zeros(config);
        let expected: Vec<BlockInfo> = params
            .blocks()
            .into_iter()
            .map(|(name, b)| BlockInfo { name, len: b.len() })
            .collect();
        if expected != header.blocks {
            return Err(bad("parameter blocks do not match the header shape"));
        }
        let mut data = &bytes[16 + hlen..];
        for block in params.blocks_mut() {
            let need = 4 * block.len();
            if data.len() < need {
                return Err(bad("truncated parameter data"));
            }
            for (v, chunk) in block.iter_mut().zip(data[..need].chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            data = &data[need..];
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes after parameters"));
        }
        if !params.all_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(Self {
            params,
            seed: header.seed,
            run: header.run,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
