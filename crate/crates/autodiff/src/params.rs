//! Named parameter storage and checkpoint serialization.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, NodeId};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Ordered collection of named tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct NamedTensor<T> {
    name: String,
    shape: Vec<usize>,
    data: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct CheckpointFile<T> {
    checkpoint_version: u32,
    dtype: String,
    tensors: Vec<NamedTensor<T>>,
}

#[derive(Deserialize)]
struct CheckpointHeader {
    checkpoint_version: u32,
    dtype: String,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Registers a tensor. Panics on a duplicate name: parameter layouts are
    /// fixed by model code, not user input.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(t);
        self.names.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total scalar count.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Adds every tensor to `g` as a parameter leaf, in store order.
    pub fn bind(&self, g: &mut Graph<T>) -> Vec<NodeId> {
        self.tensors.iter().map(|t| g.param(t.clone())).collect()
    }

    /// Adds every tensor to `g` as a constant (inference).
    pub fn bind_frozen(&self, g: &mut Graph<T>) -> Vec<NodeId> {
        self.tensors.iter().map(|t| g.constant(t.clone())).collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let file = CheckpointFile {
            checkpoint_version: CHECKPOINT_VERSION,
            dtype: T::DTYPE.to_string(),
            tensors: self
                .iter()
                .map(|(n, t)| NamedTensor {
                    name: n.to_string(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        };
        serde_json::to_writer_pretty(w, &file)?;
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let header: CheckpointHeader = serde_json::from_str(s)?;
        if header.checkpoint_version != CHECKPOINT_VERSION {
            return Err(AutodiffError::Checkpoint(format!(
                "unsupported checkpoint_version {}",
                header.checkpoint_version
            )));
        }
        if header.dtype != T::DTYPE {
            return Err(AutodiffError::Checkpoint(format!(
                "checkpoint dtype {} does not match {}",
                header.dtype,
                T::DTYPE
            )));
        }
        let file: CheckpointFile<T> = serde_json::from_str(s)?;
        let mut store = Self::new();
        for nt in file.tensors {
            if store.index.contains_key(&nt.name) {
                return Err(AutodiffError::Checkpoint(format!("duplicate tensor {}", nt.name)));
            }
            store.insert(nt.name, Tensor::new(nt.shape, nt.data)?);
        }
        Ok(store)
    }

    pub fn read_json<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::from_json_str(&s)
    }

    /// Replaces values from `other`, requiring identical names and shapes.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        if self.names != other.names {
            return Err(AutodiffError::Checkpoint("parameter names differ".into()));
        }
        for (i, (mine, theirs)) in self.tensors.iter().zip(&other.tensors).enumerate() {
            if mine.shape() != theirs.shape() {
                return Err(AutodiffError::Checkpoint(format!(
                    "{}: shape {:?} vs {:?}",
                    self.names[i],
                    mine.shape(),
                    theirs.shape()
                )));
            }
        }
        self.tensors.clone_from(&other.tensors);
        Ok(())
    }
}

/// Reads just the dtype tag of a checkpoint document.
pub fn checkpoint_dtype(s: &str) -> Result<String> {
    let header: CheckpointHeader = serde_json::from_str(s)?;
    Ok(header.dtype)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dtype_mismatch_rejected() {
        let mut s = ParamStore::<f64>::new();
        s.insert("w", Tensor::scalar(1.5));
        let json = s.to_json_string().unwrap();
        assert_eq!(checkpoint_dtype(&json).unwrap(), "f64");
        assert!(ParamStore::<f32>::from_json_str(&json).is_err());
    }

    #[test]
    #[should_panic(expected = "duplicate parameter")]
    fn duplicate_names_panic() {
        let mut s = ParamStore::<f64>::new();
        s.insert("w", Tensor::scalar(1.0));
        s.insert("w", Tensor::scalar(2.0));
    }
}
