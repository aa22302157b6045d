use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tape::{Gradients, Tape, Var};
use crate::{fmt_f64, AutodiffError, Result};

/// Dense array with an accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
    pub requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "tensor",
                detail: format!("shape {shape:?} with {} values", data.len()),
            });
        }
        Ok(Self { shape, grad: vec![0.0; len], data, requires_grad: true })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![0.0; len], grad: vec![0.0; len], requires_grad: true }
    }

    /// Xavier-uniform `[fan_in, fan_out]` matrix from a stream of uniform
    /// `[0, 1)` samples.
    pub fn xavier(fan_in: usize, fan_out: usize, mut uniform: impl FnMut() -> f64) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| (2.0 * uniform() - 1.0) * bound).collect();
        Self {
            shape: vec![fan_in, fan_out],
            data,
            grad: vec![0.0; fan_in * fan_out],
            requires_grad: true,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The two-dimensional view used on a tape: vectors become one row,
    /// higher ranks fold every leading axis into rows.
    pub fn matrix_shape(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [] => (1, 1),
            [c] => (1, *c),
            [.., c] => (self.data.len() / (*c).max(1), *c),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Named parameters. Iteration order (and therefore every accumulation over
/// parameters) follows the lexicographic order of names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.params.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.params.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Marks every parameter whose name starts with `prefix` as (non-)trainable.
    pub fn set_trainable(&mut self, prefix: &str, trainable: bool) {
        for (name, t) in self.params.iter_mut() {
            if name.starts_with(prefix) {
                t.requires_grad = trainable;
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.params.values_mut().for_each(Tensor::zero_grad);
    }

    /// Puts `name` on the tape as a leaf, differentiable iff the tensor is trainable.
    pub fn bind(&self, tape: &mut Tape, name: &str) -> Result<Var> {
        let t = self
            .params
            .get(name)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))?;
        let (r, c) = t.matrix_shape();
        tape.leaf(r, c, t.data.clone(), t.requires_grad)
    }

    /// Adds the gradients of bound parameters into their `grad` buffers.
    pub fn accumulate<'a>(
        &mut self,
        bound: impl IntoIterator<Item = (&'a str, Var)>,
        grads: &Gradients,
    ) {
        for (name, var) in bound {
            if let (Some(t), Some(g)) = (self.params.get_mut(name), grads.get(var)) {
                t.grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
    }

    /// Copies every tensor whose name starts with `prefix` from `other`,
    /// renaming the prefix to `into`.
    pub fn copy_prefix(&mut self, other: &ParamStore, prefix: &str, into: &str) -> usize {
        let mut copied = 0;
        for (name, t) in other.iter() {
            if let Some(rest) = name.strip_prefix(prefix) {
                self.params.insert(format!("{into}{rest}"), t.clone());
                copied += 1;
            }
        }
        copied
    }

    /// Bit-level equality of the data of every tensor under `prefix`.
    pub fn same_data(&self, other: &ParamStore, prefix: &str) -> bool {
        let a: Vec<_> = self.iter().filter(|(n, _)| n.starts_with(prefix)).collect();
        let b: Vec<_> = other.iter().filter(|(n, _)| n.starts_with(prefix)).collect();
        a.len() == b.len()
            && a.iter().zip(&b).all(|((na, ta), (nb, tb))| {
                na == nb
                    && ta.shape == tb.shape
                    && ta.data.iter().zip(&tb.data).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

/// On-disk parameter set: a JSON manifest of names and shapes plus flat
/// arrays printed with 17 significant digits, which round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn new(params: ParamStore, meta: serde_json::Value) -> Self {
        Self { params, meta }
    }

    pub fn to_json(&self) -> String {
        let manifest: Vec<ManifestEntry> = self
            .params
            .iter()
            .map(|(name, t)| ManifestEntry {
                name: name.to_string(),
                shape: t.shape.clone(),
                trainable: t.requires_grad,
            })
            .collect();
        let mut out = String::from("{\n\"meta\": ");
        out.push_str(&serde_json::to_string(&self.meta).expect("json value serializes"));
        out.push_str(",\n\"manifest\": ");
        out.push_str(&serde_json::to_string(&manifest).expect("manifest serializes"));
        out.push_str(",\n\"data\": {");
        for (k, (name, t)) in self.params.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "\n{}: [", serde_json::to_string(name).expect("string"));
            for (i, x) in t.data.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_f64(*x));
            }
            out.push(']');
        }
        out.push_str("\n}\n}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(default)]
            meta: serde_json::Value,
            manifest: Vec<ManifestEntry>,
            data: BTreeMap<String, Vec<f64>>,
        }
        let mut raw: Raw = serde_json::from_str(text)?;
        let mut params = ParamStore::new();
        for entry in raw.manifest {
            let data = raw
                .data
                .remove(&entry.name)
                .ok_or_else(|| AutodiffError::Checkpoint(format!("no data for `{}`", entry.name)))?;
            let mut t = Tensor::new(entry.shape, data)
                .map_err(|e| AutodiffError::Checkpoint(format!("`{}`: {e}", entry.name)))?;
            t.requires_grad = entry.trainable;
            params.insert(entry.name, t);
        }
        if let Some(extra) = raw.data.keys().next() {
            return Err(AutodiffError::Checkpoint(format!("`{extra}` missing from manifest")));
        }
        Ok(Self { params, meta: raw.meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut store = ParamStore::new();
        let vals = vec![0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0];
        store.insert("a.w", Tensor::new(vec![2, 3], vals.clone()).unwrap());
        let mut frozen = Tensor::new(vec![2], vec![std::f64::consts::PI, -0.0]).unwrap();
        frozen.requires_grad = false;
        store.insert("b", frozen);
        let ck = Checkpoint::new(store.clone(), serde_json::json!({"latent": 4}));
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert!(back.params.same_data(&store, ""));
        assert!(!back.params.get("b").unwrap().requires_grad);
        assert_eq!(back.meta["latent"], 4);
    }

    #[test]
    fn missing_data_is_rejected() {
        let text = r#"{"manifest":[{"name":"x","shape":[1],"trainable":true}],"data":{}}"#;
        assert!(Checkpoint::from_json(text).is_err());
    }

    #[test]
    fn matrix_shape_folds_leading_axes() {
        assert_eq!(Tensor::zeros(vec![4]).matrix_shape(), (1, 4));
        assert_eq!(Tensor::zeros(vec![2, 3, 5]).matrix_shape(), (6, 5));
    }
}
