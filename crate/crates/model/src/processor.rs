//! Gated message-passing processor.
//!
//! With `z = [u, h, g]` (node input, previous latent, graph channel):
//!
//! ```text
//! m_i   = max_{j in N(i)} f_m(z_i, z_j, e_ij [, h_ij])
//! h'_i  = s_i * f_r(z_i, m_i) + (1 - s_i) * h_i,   s_i = sigmoid(f_g(z_i, m_i))
//! ```
//!
//! `f_m` is a two-layer relu MLP, `f_r` and `f_g` are linear. Edge latents,
//! when enabled, get the same gated update from the hidden layer of `f_m`.

use std::collections::BTreeMap;

use algoreason_autodiff::{ParamStore, Tape, Tensor, Var};
use algoreason_core::Rng;

use crate::Result;

/// Prefix of the pre-trained (or only) processor.
pub const PROC: &str = "proc.";
/// Prefix of the second, trainable processor of the dual setup.
pub const PROC2: &str = "proc2.";

/// Names and shapes of the parameters of one processor.
pub fn processor_shapes(latent: usize, edge_hidden: bool) -> Vec<(&'static str, usize, usize)> {
    let d = latent;
    let mut shapes = vec![
        ("msg.src", 3 * d, d),
        ("msg.dst", 3 * d, d),
        ("msg.edge", d, d),
        ("msg.b1", 1, d),
        ("msg.w2", d, d),
        ("msg.b2", 1, d),
        ("upd.w", 4 * d, d),
        ("upd.b", 1, d),
        ("gate.w", 4 * d, d),
        ("gate.b", 1, d),
    ];
    if edge_hidden {
        shapes.extend([
            ("msg.eh", d, d),
            ("edge_upd.w", d, d),
            ("edge_upd.b", 1, d),
            ("edge_gate.w", d, d),
            ("edge_gate.b", 1, d),
        ]);
    }
    shapes
}

/// Fresh processor parameters under `prefix`: Xavier weights, zero biases.
pub fn init_processor(store: &mut ParamStore, prefix: &str, latent: usize, edge_hidden: bool, rng: &mut Rng) {
    for (name, r, c) in processor_shapes(latent, edge_hidden) {
        let t = if r == 1 {
            Tensor::zeros(vec![1, c])
        } else {
            Tensor::xavier(r, c, || rng.uniform())
        };
        store.insert(format!("{prefix}{name}"), t);
    }
}

/// Puts parameters on a tape once each, either as differentiable leaves or
/// as constants, and remembers which variable belongs to which name.
#[derive(Debug)]
pub struct Binder<'s> {
    store: &'s ParamStore,
    track: bool,
    bound: BTreeMap<String, Var>,
}

impl<'s> Binder<'s> {
    /// `track == false` binds everything as constants (inference).
    pub fn new(store: &'s ParamStore, track: bool) -> Self {
        Self { store, track, bound: BTreeMap::new() }
    }

    pub fn get(&mut self, tape: &mut Tape, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let v = if self.track {
            self.store.bind(tape, name)?
        } else {
            let t = self
                .store
                .get(name)
                .ok_or_else(|| algoreason_autodiff::AutodiffError::UnknownParam(name.to_string()))?;
            let (r, c) = t.matrix_shape();
            tape.constant(r, c, t.data.clone())?
        };
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    /// Binds `name` to an existing variable, e.g. a probe input.
    pub fn set(&mut self, name: &str, var: Var) {
        self.bound.insert(name.to_string(), var);
    }

    pub fn bound(&self) -> Vec<(String, Var)> {
        self.bound.iter().map(|(k, &v)| (k.clone(), v)).collect()
    }
}

/// Edge-latent parameters of one processor.
#[derive(Debug, Clone, Copy)]
pub struct EdgeVars {
    pub msg: Var,
    pub upd_w: Var,
    pub upd_b: Var,
    pub gate_w: Var,
    pub gate_b: Var,
}

/// One processor's parameters on a tape.
#[derive(Debug, Clone, Copy)]
pub struct ProcessorVars {
    pub src: Var,
    pub dst: Var,
    pub edge: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    pub upd_w: Var,
    pub upd_b: Var,
    pub gate_w: Var,
    pub gate_b: Var,
    pub edge_hidden: Option<EdgeVars>,
}

impl ProcessorVars {
    /// Builds the variable set by asking `get` for each parameter by its
    /// unprefixed name.
    pub fn from_fn(edge_hidden: bool, mut get: impl FnMut(&str) -> Result<Var>) -> Result<Self> {
        let edge = if edge_hidden {
            Some(EdgeVars {
                msg: get("msg.eh")?,
                upd_w: get("edge_upd.w")?,
                upd_b: get("edge_upd.b")?,
                gate_w: get("edge_gate.w")?,
                gate_b: get("edge_gate.b")?,
            })
        } else {
            None
        };
        Ok(Self {
            src: get("msg.src")?,
            dst: get("msg.dst")?,
            edge: get("msg.edge")?,
            b1: get("msg.b1")?,
            w2: get("msg.w2")?,
            b2: get("msg.b2")?,
            upd_w: get("upd.w")?,
            upd_b: get("upd.b")?,
            gate_w: get("gate.w")?,
            gate_b: get("gate.b")?,
            edge_hidden: edge,
        })
    }

    pub fn bind(binder: &mut Binder, tape: &mut Tape, prefix: &str, edge_hidden: bool) -> Result<Self> {
        Self::from_fn(edge_hidden, |name| binder.get(tape, &format!("{prefix}{name}")))
    }
}

/// Encoded inputs of one step.
///
/// Edge encodings are kept factored: the encoded edge array is
/// `edge_raw * edge_enc`, which is never materialised because every consumer
/// applies a further linear map to it.
#[derive(Debug, Clone)]
pub struct StepInput {
    /// `[n, d]` node encodings.
    pub u: Var,
    /// `[1, d]` graph encoding, if the task has graph features.
    pub graph: Option<Var>,
    /// `[n * n, F]` raw edge columns and `[F, d]` stacked edge encoders.
    pub edge: Option<(Var, Var)>,
    /// Message mask, row-major `[n, n]`; must give every node a neighbour.
    pub adj: Vec<bool>,
}

/// Node latents `[n, d]` and optional edge latents `[n * n, d]`.
#[derive(Debug, Clone, Copy)]
pub struct Latents {
    pub h: Var,
    pub he: Option<Var>,
}

/// `edge_raw * (edge_enc * w)` or `None` when the task has no edge features.
pub fn edge_term(tape: &mut Tape, edge: Option<(Var, Var)>, w: Var) -> Result<Option<Var>> {
    match edge {
        Some((raw, enc)) => {
            let proj = tape.matmul(enc, w)?;
            Ok(Some(tape.matmul(raw, proj)?))
        }
        None => Ok(None),
    }
}

/// `s * new + (1 - s) * old`.
fn gated(tape: &mut Tape, gate: Var, new: Var, old: Var) -> Result<Var> {
    let a = tape.mul(gate, new)?;
    let keep = tape.one_minus(gate);
    let b = tape.mul(keep, old)?;
    Ok(tape.add(a, b)?)
}

/// `z = [u, h, max_i h_i (+ graph encoding)]`.
pub fn node_context(tape: &mut Tape, input: &StepInput, h: Var) -> Result<Var> {
    let n = tape.shape(h).0;
    let mut g = tape.max_rows(h)?;
    if let Some(enc) = input.graph {
        g = tape.add(g, enc)?;
    }
    let g = tape.gather_rows(g, vec![0; n])?;
    Ok(tape.concat(&[input.u, h, g])?)
}

/// `[n * n, d]` input of the relu inside the message MLP; row `i * n + j`
/// belongs to the message from `j` to `i`.
pub fn message_preactivation(
    tape: &mut Tape,
    p: &ProcessorVars,
    z: Var,
    input: &StepInput,
    state: Latents,
) -> Result<Var> {
    let zs = tape.matmul(z, p.src)?;
    let zd = tape.matmul(z, p.dst)?;
    let rs = tape.repeat_rows(zs)?;
    let td = tape.tile_rows(zd)?;
    let mut pre = tape.add(rs, td)?;
    if let Some(e) = edge_term(tape, input.edge, p.edge)? {
        pre = tape.add(pre, e)?;
    }
    if let (Some(ev), Some(he)) = (p.edge_hidden, state.he) {
        let t = tape.matmul(he, ev.msg)?;
        pre = tape.add(pre, t)?;
    }
    Ok(tape.add_row(pre, p.b1)?)
}

/// One processor iteration from a precomputed context `z`.
pub fn step_from_context(
    tape: &mut Tape,
    p: &ProcessorVars,
    z: Var,
    input: &StepInput,
    state: Latents,
) -> Result<Latents> {
    let pre = message_preactivation(tape, p, z, input, state)?;
    let hidden = tape.relu(pre);
    let msgs = tape.linear(hidden, p.w2, p.b2)?;
    let m = tape.max_aggregate(msgs, &input.adj)?;

    let zm = tape.concat(&[z, m])?;
    let cand = tape.linear(zm, p.upd_w, p.upd_b)?;
    let gate_pre = tape.linear(zm, p.gate_w, p.gate_b)?;
    let gate = tape.sigmoid(gate_pre);
    let h = gated(tape, gate, cand, state.h)?;

    let he = match (p.edge_hidden, state.he) {
        (Some(ev), Some(he)) => {
            let cand = tape.linear(hidden, ev.upd_w, ev.upd_b)?;
            let gate_pre = tape.linear(hidden, ev.gate_w, ev.gate_b)?;
            let gate = tape.sigmoid(gate_pre);
            Some(gated(tape, gate, cand, he)?)
        }
        _ => None,
    };
    Ok(Latents { h, he })
}

/// One processor iteration.
pub fn processor_step(tape: &mut Tape, p: &ProcessorVars, input: &StepInput, state: Latents) -> Result<Latents> {
    let z = node_context(tape, input, state.h)?;
    step_from_context(tape, p, z, input, state)
}

/// Two processors on the same context, latents combined by their mean.
pub fn dual_step(
    tape: &mut Tape,
    a: &ProcessorVars,
    b: &ProcessorVars,
    input: &StepInput,
    state: Latents,
) -> Result<Latents> {
    let z = node_context(tape, input, state.h)?;
    let la = step_from_context(tape, a, z, input, state)?;
    let lb = step_from_context(tape, b, z, input, state)?;
    let mean = |tape: &mut Tape, x: Var, y: Var| -> Result<Var> {
        let s = tape.add(x, y)?;
        Ok(tape.scale(s, 0.5))
    };
    let h = mean(tape, la.h, lb.h)?;
    let he = match (la.he, lb.he) {
        (Some(x), Some(y)) => Some(mean(tape, x, y)?),
        _ => None,
    };
    Ok(Latents { h, he })
}

/// Message mask from an optional adjacency, with self-loops added.
pub fn message_mask(n: usize, adj: Option<&[f64]>) -> Vec<bool> {
    (0..n * n)
        .map(|k| k / n == k % n || adj.map_or(true, |a| a[k] != 0.0))
        .collect()
}
