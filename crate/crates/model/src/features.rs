//! Conversions between feature slices and the arrays the network sees.

use algoreason_autodiff::{Tape, Var};
use algoreason_core::clrs::{FeatureKind as K, FeatureSpec, Location as L};

use crate::{ModelError, Result};

/// Latent channel an encoded feature is added to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Channel {
    Node,
    Edge,
    Graph,
}

impl Channel {
    pub fn rows(self, n: usize) -> usize {
        match self {
            Channel::Node => n,
            Channel::Edge => n * n,
            Channel::Graph => 1,
        }
    }
}

/// Channel and column count of the encoder input of `spec`.
///
/// Node pointers are encoded on edges as a one-hot `(i, pi(i))` column.
/// Edge pointers become two edge columns: whether `P[i][j] == i`, and at
/// `(k, j)` the share of rows `i` whose `P[i][j]` is `k`.
pub fn encoder_layout(spec: &FeatureSpec) -> (Channel, usize) {
    match (spec.location, spec.kind) {
        (L::Node, K::Pointer) => (Channel::Edge, 1),
        (L::Node, _) => (Channel::Node, spec.width()),
        (L::Edge, K::Pointer) => (Channel::Edge, 2),
        (L::Edge, _) => (Channel::Edge, spec.width()),
        (L::Graph, _) => (Channel::Graph, spec.width()),
    }
}

/// Row-major `[rows, cols]` encoder input for one slice of `spec`.
pub fn encoder_input(spec: &FeatureSpec, n: usize, slice: &[f64]) -> Result<Vec<f64>> {
    let expected = spec.slice_len(n);
    if slice.len() != expected {
        return Err(ModelError::Shape(format!(
            "`{}` has {} values, expected {expected}",
            spec.name,
            slice.len()
        )));
    }
    let index = |x: f64| -> Result<usize> {
        if x.fract() == 0.0 && x >= 0.0 && (x as usize) < n {
            Ok(x as usize)
        } else {
            Err(ModelError::Shape(format!("`{}` points to {x}", spec.name)))
        }
    };
    Ok(match (spec.location, spec.kind) {
        (L::Node, K::Pointer) => {
            let mut out = vec![0.0; n * n];
            for (i, &p) in slice.iter().enumerate() {
                out[i * n + index(p)?] = 1.0;
            }
            out
        }
        (L::Edge, K::Pointer) => {
            let mut out = vec![0.0; n * n * 2];
            let share = 1.0 / n as f64;
            for i in 0..n {
                for j in 0..n {
                    let k = index(slice[i * n + j])?;
                    if k == i {
                        out[(i * n + j) * 2] = 1.0;
                    }
                    out[(k * n + j) * 2 + 1] += share;
                }
            }
            out
        }
        _ => slice.to_vec(),
    })
}

/// Columns of the decoder output of `spec`.
pub fn decoder_cols(spec: &FeatureSpec, n: usize) -> usize {
    match spec.kind {
        K::Pointer => n,
        _ => spec.width(),
    }
}

/// Decoded values of one feature: logits for discrete kinds, raw values for
/// scalars. Node features are `[n, cols]`, edge features `[n * n, cols]`
/// and graph features `[1, cols]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub spec: FeatureSpec,
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = j;
        }
    }
    best
}

impl Prediction {
    /// Hard decision in the data layout of the feature, ties to the lowest index.
    pub fn hard(&self) -> Vec<f64> {
        let rows = self.values.chunks(self.cols.max(1));
        match self.spec.kind {
            K::Scalar => self.values.clone(),
            K::Mask => self.values.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect(),
            K::MaskOne => {
                let mut out = vec![0.0; self.values.len()];
                out[argmax(&self.values)] = 1.0;
                out
            }
            K::Categorical => rows
                .flat_map(|r| {
                    let mut one = vec![0.0; r.len()];
                    one[argmax(r)] = 1.0;
                    one
                })
                .collect(),
            K::Pointer => rows.map(|r| argmax(r) as f64).collect(),
        }
    }

    /// Fraction of elements decoded correctly. Discrete kinds compare hard
    /// decisions; scalars count values within `1e-3` of the target range.
    pub fn accuracy(&self, target: &[f64]) -> Result<f64> {
        let hard = self.hard();
        if hard.len() != target.len() && self.spec.kind != K::Categorical {
            return Err(ModelError::Shape(format!(
                "`{}`: {} predictions for {} targets",
                self.spec.name,
                hard.len(),
                target.len()
            )));
        }
        let rate = |hits: usize, total: usize| hits as f64 / total.max(1) as f64;
        Ok(match self.spec.kind {
            K::Scalar => {
                let lo = target.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = target.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-3 * if hi > lo { hi - lo } else { 1.0 };
                let hits = hard.iter().zip(target).filter(|(a, b)| (*a - *b).abs() < tol).count();
                rate(hits, target.len())
            }
            K::Mask | K::Pointer => {
                rate(hard.iter().zip(target).filter(|(a, b)| a == b).count(), target.len())
            }
            K::MaskOne => (argmax(&self.values) == argmax(target)) as u8 as f64,
            K::Categorical => {
                let c = self.cols;
                let hits = self
                    .values
                    .chunks(c)
                    .zip(target.chunks(c))
                    .filter(|(p, t)| argmax(p) == argmax(t))
                    .count();
                rate(hits, target.len() / c)
            }
        })
    }
}

/// Loss of a decoded feature against its target slice.
pub fn feature_loss(tape: &mut Tape, spec: &FeatureSpec, n: usize, pred: Var, target: &[f64]) -> Result<Var> {
    let (rows, cols) = tape.shape(pred);
    let loss = match spec.kind {
        K::Scalar => tape.mse(pred, target)?,
        K::Mask => tape.bce_logits(pred, target)?,
        K::MaskOne => {
            let flat = tape.reshape(pred, 1, rows * cols)?;
            tape.softmax_xent(flat, target)?
        }
        K::Categorical => tape.softmax_xent(pred, target)?,
        K::Pointer => {
            let mut one_hot = vec![0.0; rows * cols];
            for (r, &p) in target.iter().enumerate() {
                if p.fract() != 0.0 || p < 0.0 || p as usize >= n {
                    return Err(ModelError::Shape(format!("`{}` points to {p}", spec.name)));
                }
                one_hot[r * cols + p as usize] = 1.0;
            }
            tape.softmax_xent(pred, &one_hot)?
        }
    };
    Ok(loss)
}
