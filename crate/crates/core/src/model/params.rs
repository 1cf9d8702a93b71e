use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{Array1, Array2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompt::{AblationMode, PromptRelation};

/// Floating-point element type of the model: `f32` for training, `f64` for
/// gradient checks.
pub trait Scalar:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Send
    + Sync
    + std::iter::Sum
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shape and vocabulary of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub layers: usize,
    pub dropout: f64,
    pub ablation: AblationMode,
    /// Relation texts in parameter order; the five prompt relations first.
    pub relations: Vec<String>,
}

impl ModelConfig {
    /// Builds the relation vocabulary from the prompt relations plus the
    /// given graph relation texts (deduplicated, order kept).
    pub fn new(
        dim: usize,
        layers: usize,
        dropout: f64,
        ablation: AblationMode,
        graph_relations: impl IntoIterator<Item = String>,
    ) -> Self {
        let mut relations: Vec<String> = PromptRelation::ALL.iter().map(|r| r.text().to_string()).collect();
        for r in graph_relations {
            if !relations.contains(&r) {
                relations.push(r);
            }
        }
        Self {
            dim,
            layers,
            dropout,
            ablation,
            relations,
        }
    }

    pub fn head_input_dim(&self) -> usize {
        match self.ablation {
            AblationMode::NoClassNode => 2 * self.dim,
            _ => self.dim,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.dim == 0 || self.layers == 0 {
            return Err(Error::Model("dimension and layer count must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Model(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Every trainable tensor. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    relation_index: HashMap<String, usize>,
    /// `[layer]`, `d x d`.
    pub w_self: Vec<Array2<T>>,
    /// `[layer][relation]`, `d x d`.
    pub w_rel: Vec<Vec<Array2<T>>>,
    pub w_key: Array2<T>,
    pub w_query: Array2<T>,
    /// `d x head_input_dim`.
    pub head_w1: Array2<T>,
    pub head_b1: Array1<T>,
    pub head_w2: Array1<T>,
    /// Length one.
    pub head_b2: Array1<T>,
}

fn glorot<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<T> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || T::of(rng.gen_range(-a..a)))
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: ModelConfig) -> Self {
        let d = config.dim;
        let r = config.relations.len();
        let l = config.layers;
        let hin = config.head_input_dim();
        let relation_index = index_of(&config.relations);
        Self {
            relation_index,
            w_self: vec![Array2::zeros((d, d)); l],
            w_rel: vec![vec![Array2::zeros((d, d)); r]; l],
            w_key: Array2::zeros((d, d)),
            w_query: Array2::zeros((d, d)),
            head_w1: Array2::zeros((d, hin)),
            head_b1: Array1::zeros(d),
            head_w2: Array1::zeros(d),
            head_b2: Array1::zeros(1),
            config,
        }
    }

    /// Fan-based uniform initialization; head biases start at zero.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.check()?;
        let mut p = Self::zeros(config);
        let d = p.config.dim;
        for l in 0..p.config.layers {
            p.w_self[l] = glorot(d, d, rng);
            for r in 0..p.config.relations.len() {
                p.w_rel[l][r] = glorot(d, d, rng);
            }
        }
        p.w_key = glorot(d, d, rng);
        p.w_query = glorot(d, d, rng);
        p.head_w1 = glorot(d, p.config.head_input_dim(), rng);
        let a = (6.0 / (d + 1) as f64).sqrt();
        p.head_w2 = Array1::from_shape_simple_fn(d, || T::of(rng.gen_range(-a..a)));
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone())
    }

    pub fn relation(&self, text: &str) -> Option<usize> {
        self.relation_index.get(text).copied()
    }

    /// Named parameter blocks in checkpoint order.
    pub fn blocks(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for l in 0..self.config.layers {
            out.push((format!("w_self[{l}]"), self.w_self[l].as_slice().unwrap()));
            for (r, w) in self.w_rel[l].iter().enumerate() {
                out.push((format!("w_rel[{l}][{r}]"), w.as_slice().unwrap()));
            }
        }
        out.push(("w_key".into(), self.w_key.as_slice().unwrap()));
        out.push(("w_query".into(), self.w_query.as_slice().unwrap()));
        out.push(("head.w1".into(), self.head_w1.as_slice().unwrap()));
        out.push(("head.b1".into(), self.head_b1.as_slice().unwrap()));
        out.push(("head.w2".into(), self.head_w2.as_slice().unwrap()));
        out.push(("head.b2".into(), self.head_b2.as_slice().unwrap()));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for (ws, wr) in self.w_self.iter_mut().zip(self.w_rel.iter_mut()) {
            out.push(ws.as_slice_mut().unwrap());
            for w in wr.iter_mut() {
                out.push(w.as_slice_mut().unwrap());
            }
        }
        out.push(self.w_key.as_slice_mut().unwrap());
        out.push(self.w_query.as_slice_mut().unwrap());
        out.push(self.head_w1.as_slice_mut().unwrap());
        out.push(self.head_b1.as_slice_mut().unwrap());
        out.push(self.head_w2.as_slice_mut().unwrap());
        out.push(self.head_b2.as_slice_mut().unwrap());
        out
    }

    pub fn num_values(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        let src: Vec<&[T]> = other.blocks().into_iter().map(|(_, b)| b).collect();
        for (dst, src) in self.blocks_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * *s;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for block in self.blocks_mut() {
            for v in block.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn norm(&self) -> T {
        self.blocks()
            .iter()
            .flat_map(|(_, b)| b.iter())
            .map(|v| *v * *v)
            .sum::<T>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(self.config.clone());
        let src: Vec<&[T]> = self.blocks().into_iter().map(|(_, b)| b).collect();
        for (dst, src) in out.blocks_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::from(*s).expect("finite parameter");
            }
        }
        out
    }
}

fn index_of(relations: &[String]) -> HashMap<String, usize> {
    relations.iter().enumerate().map(|(i, r)| (r.clone(), i)).collect()
}
