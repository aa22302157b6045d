use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use algoreason_autodiff::{Checkpoint, ParamStore, Tape, Tensor, Var};
use algoreason_core::clrs::{FeatureKind as K, FeatureSpec, Location as L, Stage, Trajectory};
use algoreason_core::Rng;

use crate::features::{decoder_cols, encoder_input, encoder_layout, feature_loss, Channel, Prediction};
use crate::processor::{
    dual_step, edge_term, init_processor, message_mask, processor_shapes, processor_step, Binder, Latents,
    ProcessorVars, StepInput, PROC, PROC2,
};
use crate::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of every latent vector.
    pub latent: usize,
    /// Keep a latent per edge and update it alongside the node latents.
    pub edge_hidden: bool,
    /// Seed of every parameter initialisation.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { latent: 128, edge_hidden: false, seed: 0 }
    }
}

/// How hints enter a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Step `t` reads the ground-truth hints of step `t - 1`.
    Train,
    /// Step `t` reads its own hard-decoded hints of step `t - 1`.
    Eval,
}

/// Predictions and loss of one rollout.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub loss: f64,
    /// Hint predictions per step, in the order of the trajectory's hints.
    pub hints: Vec<Vec<Prediction>>,
    pub outputs: Vec<Prediction>,
}

/// Encoder inputs of one channel, accumulated column block by column block.
#[derive(Debug, Clone)]
struct Columns {
    rows: usize,
    blocks: Vec<(usize, Vec<f64>)>,
    weights: Vec<Var>,
}

impl Columns {
    fn new(rows: usize) -> Self {
        Self { rows, blocks: vec![], weights: vec![] }
    }

    fn push(&mut self, cols: usize, data: Vec<f64>, weight: Var) {
        self.blocks.push((cols, data));
        self.weights.push(weight);
    }

    /// Raw `[rows, F]` constant and stacked `[F, d]` encoder.
    fn build(&self, tape: &mut Tape) -> Result<Option<(Var, Var)>> {
        if self.blocks.is_empty() {
            return Ok(None);
        }
        let width: usize = self.blocks.iter().map(|b| b.0).sum();
        let mut raw = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            for (cols, data) in &self.blocks {
                raw.extend_from_slice(&data[r * cols..(r + 1) * cols]);
            }
        }
        let raw = tape.constant(self.rows, width, raw)?;
        let enc = tape.stack_rows(&self.weights)?;
        Ok(Some((raw, enc)))
    }
}

struct ChannelSet {
    node: Columns,
    edge: Columns,
    graph: Columns,
}

impl ChannelSet {
    fn new(n: usize) -> Self {
        Self { node: Columns::new(n), edge: Columns::new(n * n), graph: Columns::new(1) }
    }

    fn get(&mut self, c: Channel) -> &mut Columns {
        match c {
            Channel::Node => &mut self.node,
            Channel::Edge => &mut self.edge,
            Channel::Graph => &mut self.graph,
        }
    }
}

/// Encode-process-decode network: one shared processor (two in the dual
/// setup) and an encoder/decoder head per task.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    heads: BTreeMap<String, Vec<FeatureSpec>>,
    dual: bool,
    /// Processor iterations of hint-free tasks; `None` means `n`.
    pub co_steps: Option<usize>,
}

fn head_prefix(task: &str) -> String {
    format!("head.{task}.")
}

fn enc_name(task: &str, feat: &str) -> String {
    format!("head.{task}.enc.{feat}")
}

fn dec_name(task: &str, feat: &str, part: &str) -> String {
    format!("head.{task}.dec.{feat}.{part}")
}

/// Decoder parameter shapes of `spec` (pointer widths depend on `n` only
/// through the logits, never through parameters).
fn decoder_shapes(spec: &FeatureSpec, d: usize, edge_hidden: bool) -> Result<Vec<(&'static str, usize, usize)>> {
    let c = spec.width();
    let mut shapes = match (spec.location, spec.kind) {
        (L::Graph, K::Pointer) => {
            return Err(ModelError::Unsupported(format!("graph pointer `{}`", spec.name)))
        }
        (L::Node, K::Pointer) => vec![("q", d, d), ("k", d, d), ("c", d, 1), ("e", d, 1), ("b", 1, 1)],
        (L::Edge, K::Pointer) => {
            vec![("a", d, d), ("c", d, d), ("e", d, d), ("k", d, d), ("b", 1, d)]
        }
        (L::Edge, _) => vec![("a", d, c), ("c", d, c), ("e", d, c), ("b", 1, c)],
        (L::Node | L::Graph, _) => vec![("w", d, c), ("b", 1, c)],
    };
    if edge_hidden {
        if let Some(cols) = edge_latent_cols(spec, d) {
            shapes.push(("eh", d, cols));
        }
    }
    Ok(shapes)
}

/// Width of the edge-latent term of a decoder, for features decoded on edges.
fn edge_latent_cols(spec: &FeatureSpec, d: usize) -> Option<usize> {
    match (spec.location, spec.kind) {
        (L::Node, K::Pointer) => Some(1),
        (L::Edge, K::Pointer) => Some(d),
        (L::Edge, _) => Some(spec.width()),
        _ => None,
    }
}

fn init_tensor(r: usize, c: usize, bias: bool, rng: &mut Rng) -> Tensor {
    if bias {
        Tensor::zeros(vec![1, c])
    } else {
        Tensor::xavier(r, c, || rng.uniform())
    }
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.latent == 0 {
            return Err(ModelError::Config("latent width must be positive".into()));
        }
        let mut params = ParamStore::new();
        let mut rng = Rng::new(config.seed).split("processor");
        init_processor(&mut params, PROC, config.latent, config.edge_hidden, &mut rng);
        Ok(Self { config, params, heads: BTreeMap::new(), dual: false, co_steps: None })
    }

    pub fn latent(&self) -> usize {
        self.config.latent
    }

    pub fn tasks(&self) -> impl Iterator<Item = &str> {
        self.heads.keys().map(String::as_str)
    }

    pub fn head(&self, task: &str) -> Option<&[FeatureSpec]> {
        self.heads.get(task).map(Vec::as_slice)
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    /// Adds the encoder/decoder head of `task`. Re-adding identical specs is
    /// a no-op; different specs under an existing name are rejected.
    pub fn add_head(&mut self, task: &str, specs: &[FeatureSpec]) -> Result<()> {
        if let Some(existing) = self.heads.get(task) {
            return if existing == specs {
                Ok(())
            } else {
                Err(ModelError::Config(format!("head `{task}` exists with different features")))
            };
        }
        let d = self.config.latent;
        let mut rng = Rng::new(self.config.seed).split(&head_prefix(task));
        let mut fresh = Vec::new();
        for spec in specs {
            spec.check()?;
            if spec.stage != Stage::Output {
                let (_, cols) = encoder_layout(spec);
                fresh.push((enc_name(task, &spec.name), cols, d, false));
            }
            if spec.stage != Stage::Input {
                for (part, r, c) in decoder_shapes(spec, d, self.config.edge_hidden)? {
                    fresh.push((dec_name(task, &spec.name, part), r, c, part == "b"));
                }
            }
        }
        for (name, r, c, bias) in fresh {
            let t = init_tensor(r, c, bias, &mut rng);
            self.params.insert(name, t);
        }
        self.heads.insert(task.to_string(), specs.to_vec());
        Ok(())
    }

    /// Adds the head matching the features of `traj` under its task id.
    pub fn add_head_for(&mut self, traj: &Trajectory) -> Result<()> {
        self.add_head(&traj.algo_id, &traj.specs())
    }

    /// Adds a second processor under its own prefix, freshly initialised and
    /// trainable; latents of both are averaged every step.
    pub fn enable_dual(&mut self) {
        if self.dual {
            return;
        }
        let mut rng = Rng::new(self.config.seed).split("processor2");
        init_processor(&mut self.params, PROC2, self.config.latent, self.config.edge_hidden, &mut rng);
        self.dual = true;
    }

    /// Number of scalars in one processor; independent of the graph size.
    pub fn processor_size(&self) -> usize {
        processor_shapes(self.config.latent, self.config.edge_hidden).iter().map(|(_, r, c)| r * c).sum()
    }

    fn check_features(&self, traj: &Trajectory) -> Result<&[FeatureSpec]> {
        let specs = self.heads.get(&traj.algo_id).ok_or_else(|| ModelError::UnknownTask(traj.algo_id.clone()))?;
        for f in traj.features() {
            if !specs.contains(&f.spec) {
                return Err(ModelError::UnknownFeature { task: traj.algo_id.clone(), feature: f.spec.name.clone() });
            }
        }
        Ok(specs)
    }

    fn default_steps(&self, traj: &Trajectory) -> usize {
        if traj.hints.is_empty() {
            self.co_steps.unwrap_or(traj.n)
        } else {
            traj.steps
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn decode(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        task: &str,
        spec: &FeatureSpec,
        n: usize,
        state: Latents,
        edge: Option<(Var, Var)>,
    ) -> Result<Var> {
        let d = self.config.latent;
        let mut parts = BTreeMap::new();
        for (part, _, _) in decoder_shapes(spec, d, self.config.edge_hidden)? {
            parts.insert(part, binder.get(tape, &dec_name(task, &spec.name, part))?);
        }
        let p = |part: &str| parts[part];
        let (w_eh, he) = match state.he {
            Some(he) if edge_latent_cols(spec, d).is_some() => (Some(p("eh")), Some(he)),
            _ => (None, None),
        };
        let h = state.h;
        let out = match (spec.location, spec.kind) {
            (L::Node, K::Pointer) => {
                let (q, k, c, e, b) = (p("q"), p("k"), p("c"), p("e"), p("b"));
                let hq = tape.matmul(h, q)?;
                let hk = tape.matmul(h, k)?;
                let qk = tape.matmul_t(hq, hk)?;
                let qk = tape.scale(qk, 1.0 / (d as f64).sqrt());
                let hc = tape.matmul(h, c)?;
                let mut pair = tape.tile_rows(hc)?;
                if let Some(t) = edge_term(tape, edge, e)? {
                    pair = tape.add(pair, t)?;
                }
                if let (Some(w), Some(he)) = (w_eh, he) {
                    let t = tape.matmul(he, w)?;
                    pair = tape.add(pair, t)?;
                }
                let pair = tape.add_row(pair, b)?;
                let pair = tape.reshape(pair, n, n)?;
                tape.add(qk, pair)?
            }
            (L::Edge, kind) => {
                let (a, c, e, b) = (p("a"), p("c"), p("e"), p("b"));
                let ha = tape.matmul(h, a)?;
                let hc = tape.matmul(h, c)?;
                let ra = tape.repeat_rows(ha)?;
                let tc = tape.tile_rows(hc)?;
                let mut q = tape.add(ra, tc)?;
                if let Some(t) = edge_term(tape, edge, e)? {
                    q = tape.add(q, t)?;
                }
                if let (Some(w), Some(he)) = (w_eh, he) {
                    let t = tape.matmul(he, w)?;
                    q = tape.add(q, t)?;
                }
                let q = tape.add_row(q, b)?;
                if kind == K::Pointer {
                    let k = p("k");
                    let hk = tape.matmul(h, k)?;
                    let logits = tape.matmul_t(q, hk)?;
                    tape.scale(logits, 1.0 / (d as f64).sqrt())
                } else {
                    q
                }
            }
            (L::Node, _) => {
                let (w, b) = (p("w"), p("b"));
                tape.linear(h, w, b)?
            }
            (L::Graph, _) => {
                let (w, b) = (p("w"), p("b"));
                let g = tape.max_rows(h)?;
                tape.linear(g, w, b)?
            }
        };
        Ok(out)
    }

    /// Sums the linear encodings of the inputs of `traj` and of `hints`,
    /// one slice per hint feature in trajectory order (or none at all).
    pub fn encode_step(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        traj: &Trajectory,
        hints: &[&[f64]],
    ) -> Result<StepInput> {
        let task = traj.algo_id.as_str();
        let n = traj.n;
        if !hints.is_empty() && hints.len() != traj.hints.len() {
            return Err(ModelError::Shape(format!("{} hint slices for {} hints", hints.len(), traj.hints.len())));
        }
        let mut cs = ChannelSet::new(n);
        let sources = traj
            .inputs
            .iter()
            .map(|f| (&f.spec, f.slice(n, 0)))
            .chain(traj.hints.iter().zip(hints).map(|(f, s)| (&f.spec, *s)));
        for (spec, slice) in sources {
            let (channel, cols) = encoder_layout(spec);
            let w = binder.get(tape, &enc_name(task, &spec.name))?;
            cs.get(channel).push(cols, encoder_input(spec, n, slice)?, w);
        }
        let u = match cs.node.build(tape)? {
            Some((raw, w)) => tape.matmul(raw, w)?,
            None => tape.zeros(n, self.config.latent),
        };
        let graph = match cs.graph.build(tape)? {
            Some((raw, w)) => Some(tape.matmul(raw, w)?),
            None => None,
        };
        let edge = cs.edge.build(tape)?;
        let adj = message_mask(n, traj.input("adj").map(|f| f.data.as_slice()));
        Ok(StepInput { u, graph, edge, adj })
    }

    /// Runs `steps` processor iterations on `traj`, returning the loss node
    /// and every prediction. Hints are read and supervised iff `use_hints`.
    fn run(
        &self,
        tape: &mut Tape,
        binder: &mut Binder,
        traj: &Trajectory,
        mode: Mode,
        steps: usize,
        use_hints: bool,
    ) -> Result<(Var, Vec<Vec<Prediction>>, Vec<Prediction>)> {
        let task = traj.algo_id.as_str();
        self.check_features(traj)?;
        let n = traj.n;
        let d = self.config.latent;
        if n == 0 {
            return Err(ModelError::Shape("empty instance".into()));
        }

        let hint_specs: Vec<&FeatureSpec> = if use_hints { traj.hints.iter().map(|f| &f.spec).collect() } else { vec![] };

        let procs = {
            let a = ProcessorVars::bind(binder, tape, PROC, self.config.edge_hidden)?;
            let b = if self.dual {
                Some(ProcessorVars::bind(binder, tape, PROC2, self.config.edge_hidden)?)
            } else {
                None
            };
            (a, b)
        };

        let mut state = Latents {
            h: tape.zeros(n, d),
            he: self.config.edge_hidden.then(|| tape.zeros(n * n, d)),
        };
        let mut fed: Vec<Vec<f64>> = vec![];
        let mut hint_preds = Vec::new();
        let mut hint_loss: Option<Var> = None;
        let mut edge = None;
        if steps == 0 {
            edge = self.encode_step(tape, binder, traj, &[])?.edge;
        }

        for t in 0..steps {
            let slices: Vec<&[f64]> = match (t, mode) {
                (0, _) => vec![],
                (_, Mode::Train) => traj.hints.iter().take(hint_specs.len()).map(|f| f.slice(n, t - 1)).collect(),
                (_, Mode::Eval) => fed.iter().map(Vec::as_slice).collect(),
            };
            let input = self.encode_step(tape, binder, traj, &slices)?;
            edge = input.edge;
            state = match &procs {
                (a, Some(b)) => dual_step(tape, a, b, &input, state)?,
                (a, None) => processor_step(tape, a, &input, state)?,
            };

            if use_hints && t < traj.steps {
                let mut preds = Vec::with_capacity(hint_specs.len());
                fed.clear();
                for (k, spec) in hint_specs.iter().enumerate() {
                    let v = self.decode(tape, binder, task, spec, n, state, edge)?;
                    let l = feature_loss(tape, spec, n, v, traj.hints[k].slice(n, t))?;
                    hint_loss = Some(match hint_loss {
                        Some(acc) => tape.add(acc, l)?,
                        None => l,
                    });
                    let pred = prediction(tape, spec, n, v);
                    if mode == Mode::Eval {
                        fed.push(pred.hard());
                    }
                    preds.push(pred);
                }
                hint_preds.push(preds);
            }
        }

        let mut outputs = Vec::with_capacity(traj.outputs.len());
        let mut loss = match hint_loss {
            Some(l) => tape.scale(l, 1.0 / steps as f64),
            None => tape.zeros(1, 1),
        };
        for f in &traj.outputs {
            let v = self.decode(tape, binder, task, &f.spec, n, state, edge)?;
            let l = feature_loss(tape, &f.spec, n, v, f.slice(n, 0))?;
            loss = tape.add(loss, l)?;
            outputs.push(prediction(tape, &f.spec, n, v));
        }
        Ok((loss, hint_preds, outputs))
    }

    /// Full rollout without gradients.
    pub fn rollout(&self, traj: &Trajectory, mode: Mode) -> Result<Rollout> {
        let mut tape = Tape::new();
        let mut binder = Binder::new(&self.params, false);
        let steps = self.default_steps(traj);
        let (loss, hints, outputs) = self.run(&mut tape, &mut binder, traj, mode, steps, true)?;
        Ok(Rollout { loss: tape.scalar(loss), hints, outputs })
    }

    /// Hint-free rollout for `steps` iterations (`None` means the model's
    /// default), decoding the outputs once at the end.
    pub fn co_forward(&self, traj: &Trajectory, steps: Option<usize>) -> Result<Vec<Prediction>> {
        let mut tape = Tape::new();
        let mut binder = Binder::new(&self.params, false);
        let steps = steps.unwrap_or_else(|| self.co_steps.unwrap_or(traj.n));
        let (_, _, outputs) = self.run(&mut tape, &mut binder, traj, Mode::Eval, steps, false)?;
        Ok(outputs)
    }

    /// Teacher-forced loss of `traj`; `scale * d loss` is added to the
    /// gradient buffers of every trainable parameter it touches.
    pub fn accumulate_grad(&mut self, traj: &Trajectory, scale: f64) -> Result<f64> {
        let mut tape = Tape::new();
        let (loss, bound) = {
            let mut binder = Binder::new(&self.params, true);
            let steps = self.default_steps(traj);
            let use_hints = !traj.hints.is_empty();
            let (loss, _, _) = self.run(&mut tape, &mut binder, traj, Mode::Train, steps, use_hints)?;
            (loss, binder.bound())
        };
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(ModelError::NonFinite(format!("loss on `{}`", traj.algo_id)));
        }
        let scaled = tape.scale(loss, scale);
        let grads = tape.backward(scaled);
        self.params.accumulate(bound.iter().map(|(k, v)| (k.as_str(), *v)), &grads);
        Ok(value)
    }

    /// Builds the loss of `traj` on `tape` with caller-supplied bindings,
    /// e.g. to probe gradients with respect to one parameter.
    pub fn loss_on_tape(&self, tape: &mut Tape, binder: &mut Binder, traj: &Trajectory) -> Result<Var> {
        let steps = self.default_steps(traj);
        let (loss, _, _) = self.run(tape, binder, traj, Mode::Train, steps, !traj.hints.is_empty())?;
        Ok(loss)
    }

    /// Checkpoint with the head manifest and any extra metadata.
    pub fn to_checkpoint(&self, extra: Value) -> Checkpoint {
        let heads: BTreeMap<&str, &Vec<FeatureSpec>> = self.heads.iter().map(|(k, v)| (k.as_str(), v)).collect();
        let meta = json!({
            "model": self.config,
            "dual": self.dual,
            "co_steps": self.co_steps,
            "heads": heads,
            "extra": extra,
        });
        Checkpoint::new(self.params.clone(), meta)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            model: ModelConfig,
            dual: bool,
            co_steps: Option<usize>,
            heads: BTreeMap<String, Vec<FeatureSpec>>,
        }
        let meta: Meta = serde_json::from_value(ck.meta.clone()).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut prefixes = vec![PROC];
        if meta.dual {
            prefixes.push(PROC2);
        }
        for prefix in prefixes {
            for (name, r, c) in processor_shapes(meta.model.latent, meta.model.edge_hidden) {
                let full = format!("{prefix}{name}");
                match ck.params.get(&full) {
                    Some(t) if t.matrix_shape() == (r, c) => {}
                    _ => return Err(ModelError::Checkpoint(format!("`{full}` missing or misshapen"))),
                }
            }
        }
        Ok(Self {
            config: meta.model,
            params: ck.params.clone(),
            heads: meta.heads,
            dual: meta.dual,
            co_steps: meta.co_steps,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>, extra: Value) -> Result<()> {
        Ok(self.to_checkpoint(extra).save(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

fn prediction(tape: &Tape, spec: &FeatureSpec, n: usize, v: Var) -> Prediction {
    let (rows, cols) = tape.shape(v);
    debug_assert_eq!(cols, decoder_cols(spec, n));
    Prediction { spec: spec.clone(), n, rows, cols, values: tape.value(v).to_vec() }
}

/// Accuracy of every output prediction against the targets of `traj`.
pub fn eval_accuracy(outputs: &[Prediction], traj: &Trajectory) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for p in outputs {
        let target = traj.output(&p.spec.name).ok_or_else(|| ModelError::UnknownFeature {
            task: traj.algo_id.clone(),
            feature: p.spec.name.clone(),
        })?;
        out.insert(p.spec.name.clone(), p.accuracy(target.slice(traj.n, 0))?);
    }
    Ok(out)
}
