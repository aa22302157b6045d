//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a hard criterion fails. The directional trend check is
//! reported but never fails the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use algoreason_autodiff::{grad_check, AdamConfig, AutodiffError, ParamStore, Tape, Var};
use algoreason_core::baselines::{christofides, gon_farthest_first};
use algoreason_core::clrs::{traj_bellman_ford, traj_find_min, traj_mst_prim, Algorithm, GraphFamily, Trajectory};
use algoreason_core::decode::{beam_search_tour, beam_search_tour_scored, relative_error, tour_cost, vkc_objective};
use algoreason_core::graph::{apsp_matrix, gen_er_connected, gen_euclidean_complete};
use algoreason_core::oracles::{held_karp, vkc_exact};
use algoreason_core::tasks::TspInstance;
use algoreason_core::{Rng, Tour, WeightedGraph};
use algoreason_harness::config::{ExperimentConfig, Task};
use algoreason_harness::report::{self, ResultRow};
use algoreason_harness::run;
use algoreason_model::processor::{
    dual_step, init_processor, message_preactivation, node_context, processor_shapes, processor_step, Latents,
    ProcessorVars, StepInput, PROC, PROC2,
};
use algoreason_model::transfer::{apply_2proc, apply_pf, apply_pft, train_mtl};
use algoreason_model::{Model, ModelConfig, ModelError, Trainer, TransferMode};
use algoreason_testkit as tk;
use algoreason_testkit::grad::{op_cases, worst_error};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("took {:.0}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn uniform(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| 2.0 * rng.uniform() - 1.0).collect()
}

// Gradient integrity.

/// Random processor step on a small graph with random inputs.
struct StepProbe {
    n: usize,
    d: usize,
    store: ParamStore,
    u: Vec<f64>,
    h: Vec<f64>,
    raw: Vec<f64>,
    enc: Vec<f64>,
    graph: Vec<f64>,
    adj: Vec<bool>,
}

impl StepProbe {
    const F: usize = 2;

    fn new(seed: u64) -> Self {
        let (n, d) = (4, 3);
        let mut rng = Rng::new(seed);
        let mut store = ParamStore::new();
        init_processor(&mut store, PROC, d, false, &mut rng);
        for (_, t) in store.iter_mut() {
            if t.shape[0] == 1 {
                t.data = uniform(&mut rng, t.data.len()).iter().map(|x| 0.5 * x).collect();
            }
        }
        let adj = (0..n * n).map(|k| k / n == k % n || rng.uniform() < 0.6).collect();
        Self {
            n,
            d,
            u: uniform(&mut rng, n * d),
            h: uniform(&mut rng, n * d),
            raw: uniform(&mut rng, n * n * Self::F),
            enc: uniform(&mut rng, Self::F * d),
            graph: uniform(&mut rng, d),
            adj,
            store,
        }
    }

    fn variables(&self) -> Vec<(String, usize, usize, Vec<f64>)> {
        let (n, d) = (self.n, self.d);
        let mut out = vec![
            ("u".to_string(), n, d, self.u.clone()),
            ("h".to_string(), n, d, self.h.clone()),
            ("enc".to_string(), Self::F, d, self.enc.clone()),
            ("graph".to_string(), 1, d, self.graph.clone()),
        ];
        for (name, r, c) in processor_shapes(d, false) {
            let full = format!("{PROC}{name}");
            out.push((full.clone(), r, c, self.store.get(&full).unwrap().data.clone()));
        }
        out
    }

    fn bind(&self, tape: &mut Tape, sub: Option<(&str, Var)>) -> (ProcessorVars, StepInput, Latents) {
        let (n, d) = (self.n, self.d);
        let pick = |tape: &mut Tape, name: &str, r: usize, c: usize, v: &[f64]| match sub {
            Some((s, var)) if s == name => var,
            _ => tape.constant(r, c, v.to_vec()).unwrap(),
        };
        let p = ProcessorVars::from_fn(false, |name| {
            let full = format!("{PROC}{name}");
            let t = self.store.get(&full).unwrap();
            let (r, c) = t.matrix_shape();
            Ok(pick(tape, &full, r, c, &t.data))
        })
        .unwrap();
        let u = pick(tape, "u", n, d, &self.u);
        let h = pick(tape, "h", n, d, &self.h);
        let raw = tape.constant(n * n, Self::F, self.raw.clone()).unwrap();
        let enc = pick(tape, "enc", Self::F, d, &self.enc);
        let graph = pick(tape, "graph", 1, d, &self.graph);
        let input = StepInput { u, graph: Some(graph), edge: Some((raw, enc)), adj: self.adj.clone() };
        (p, input, Latents { h, he: None })
    }

    fn objective(&self, tape: &mut Tape, sub: Option<(&str, Var)>) -> algoreason_autodiff::Result<Var> {
        let (p, input, state) = self.bind(tape, sub);
        let next = processor_step(tape, &p, &input, state).map_err(|e| match e {
            ModelError::Autodiff(e) => e,
            other => AutodiffError::Checkpoint(other.to_string()),
        })?;
        let mut rng = Rng::new(99);
        let w = tape.constant(self.n, self.d, uniform(&mut rng, self.n * self.d))?;
        let prod = tape.mul(next.h, w)?;
        Ok(tape.sum(prod))
    }

    /// Distance to the nearest relu kink or max tie; finite differences
    /// across either are meaningless.
    fn margin(&self) -> f64 {
        let mut tape = Tape::new();
        let (p, input, state) = self.bind(&mut tape, None);
        let z = node_context(&mut tape, &input, state.h).unwrap();
        let pre = message_preactivation(&mut tape, &p, z, &input, state).unwrap();
        let hidden = tape.relu(pre);
        let msgs = tape.linear(hidden, p.w2, p.b2).unwrap();
        let mut margin = tape.value(pre).iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        let gap = |mut vals: Vec<f64>| {
            vals.sort_by(|a, b| b.total_cmp(a));
            if vals.len() > 1 {
                vals[0] - vals[1]
            } else {
                f64::INFINITY
            }
        };
        let (n, d) = (self.n, self.d);
        let m = tape.value(msgs);
        for i in 0..n {
            for c in 0..d {
                margin = margin.min(gap((0..n).filter(|&j| self.adj[i * n + j]).map(|j| m[(i * n + j) * d + c]).collect()));
            }
        }
        for c in 0..d {
            margin = margin.min(gap((0..n).map(|i| self.h[i * d + c]).collect()));
        }
        margin
    }
}

fn gradient_integrity() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let cases = op_cases();
    for (i, case) in cases.iter().enumerate() {
        let e = worst_error(case, 50, 1000 + i as u64).map_err(err)?;
        ensure(e < 1e-4, || format!("op `{}`: relative error {e:.2e}", case.name))?;
        worst = worst.max(e);
    }
    let (mut points, mut seed) = (0, 0);
    while points < 50 {
        seed += 1;
        let probe = StepProbe::new(seed);
        if probe.margin() < 1e-3 {
            continue;
        }
        for (name, r, c, x) in probe.variables() {
            let e = grad_check(|t, v| probe.objective(t, Some((name.as_str(), v))), &x, r, c).map_err(err)?;
            ensure(e < 1e-4, || format!("processor step `{name}` at seed {seed}: relative error {e:.2e}"))?;
            worst = worst.max(e);
        }
        points += 1;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{} ops and the processor step at 50 points, worst relative error {worst:.2e}", cases.len()))
}

// Trajectory oracles.

fn random_graph(rng: &mut Rng, trial: usize) -> WeightedGraph {
    let n = 2 + trial % 11;
    if trial % 3 == 0 {
        gen_euclidean_complete(n, rng).unwrap()
    } else {
        gen_er_connected(n, 0.5, rng).unwrap()
    }
}

fn output_ptrs(t: &Trajectory, name: &str) -> Vec<usize> {
    t.output(name).unwrap().data.iter().map(|&x| x as usize).collect()
}

fn output_mask(t: &Trajectory, name: &str) -> Vec<bool> {
    t.output(name).unwrap().data.iter().map(|&x| x == 1.0).collect()
}

fn trajectory_oracles() -> Check {
    let start = Instant::now();
    let mut rng = Rng::new(2002);
    for trial in 0..200 {
        let g = random_graph(&mut rng, trial);
        let n = g.n();
        let s = rng.below(n);
        let bf = traj_bellman_ford(&g, s).map_err(err)?;
        let d = bf.hint("d").unwrap().slice(n, bf.steps - 1);
        let apsp = apsp_matrix(&g).map_err(err)?;
        ensure(d == &apsp[s * n..(s + 1) * n], || format!("Bellman-Ford graph {trial}: distances differ from apsp"))?;

        let prim = traj_mst_prim(&g, s).map_err(err)?;
        let pi = output_ptrs(&prim, "pi");
        let mut weights: Vec<f64> = (0..n).filter(|&v| v != s).map(|v| g.weight(v, pi[v])).collect();
        let mut edges: Vec<(usize, usize)> = (0..n).filter(|&v| v != s).map(|v| (v, pi[v])).collect();
        edges.retain(|&(a, b)| g.has_edge(a, b));
        ensure(edges.len() == n - 1 && tk::union_find_components(n, &edges) == 1, || {
            format!("Prim graph {trial}: parents do not span")
        })?;
        // Kruskal accumulates in ascending weight order; so does this sum.
        weights.sort_by(f64::total_cmp);
        let w: f64 = weights.iter().fold(0.0, |a, x| a + x);
        let k = tk::kruskal_weight(&g);
        ensure(w == k, || format!("Prim graph {trial}: weight {w} vs Kruskal {k}"))?;
    }
    for trial in 0..200 {
        let n = 1 + trial % 12;
        let v: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let chosen = output_mask(&traj_find_min(&v).map_err(err)?, "min");
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure((0..n).all(|i| chosen[i] == (v[i] == lo)), || format!("find_min {trial}: {v:?}"))?;

        let n = 1 + trial % 10;
        let t = Algorithm::ActivitySelection.sample(n, GraphFamily::Euclidean, &mut rng).map_err(err)?;
        let (s, f) = (&t.input("s").unwrap().data, &t.input("f").unwrap().data);
        let got = output_mask(&t, "selected").iter().filter(|&&b| b).count();
        ensure(got == tk::brute_max_activities(s, f), || format!("activity selection {trial}: {got} activities"))?;

        let n = 1 + trial % 8;
        let t = Algorithm::TaskScheduling.sample(n, GraphFamily::Euclidean, &mut rng).map_err(err)?;
        // Deadlines are stored divided by n.
        let d: Vec<usize> = t.input("d").unwrap().data.iter().map(|&x| (x * n as f64).round() as usize).collect();
        let p = &t.input("p").unwrap().data;
        let acc = output_mask(&t, "accepted");
        let picked: Vec<usize> = (0..n).filter(|&i| acc[i]).collect();
        let (best, set) = tk::brute_best_schedule_set(&d, p);
        ensure(picked == set, || format!("task scheduling {trial}: accepted {picked:?}, best {set:?} ({best})"))?;
    }
    within(start, Duration::from_secs(60))?;
    Ok("200 graphs for Bellman-Ford and Prim, 200 instances per greedy task".into())
}

// Exact oracles.

fn exact_oracles() -> Check {
    let start = Instant::now();
    let mut rng = Rng::new(3003);
    for trial in 0..100 {
        let n = 3 + trial % 6;
        let g = gen_euclidean_complete(n, &mut rng).map_err(err)?;
        let (c, t) = held_karp(&g).map_err(err)?;
        let brute = tk::brute_tsp(&g);
        ensure(c == brute, || format!("Held-Karp instance {trial}: {c} vs {brute}"))?;
        ensure(tour_cost(&g, &t).map_err(err)? == c, || format!("Held-Karp instance {trial}: tour cost differs"))?;
    }
    for trial in 0..100 {
        let n = 2 + trial % 9;
        let k = 1 + trial % 3;
        let g = if trial % 2 == 0 { gen_er_connected(n, 0.5, &mut rng) } else { gen_euclidean_complete(n, &mut rng) }
            .map_err(err)?;
        let d = apsp_matrix(&g).map_err(err)?;
        let (o, _) = vkc_exact(&g, k).map_err(err)?;
        let brute = tk::brute_vkc(&tk::reference_apsp(&g), n, k);
        ensure(o == brute, || format!("k-center instance {trial}: {o} vs {brute}"))?;
        ensure(d.contains(&o), || format!("k-center instance {trial}: {o} is no pairwise distance"))?;
    }
    within(start, Duration::from_secs(120))?;
    Ok("100 tour instances n <= 8, 100 k-center instances n <= 10, k <= 3".into())
}

// Approximation guarantees.

fn approximation_bounds() -> Check {
    let start = Instant::now();
    let mut rng = Rng::new(4004);
    let mut worst_ch = 0.0f64;
    for trial in 0..100 {
        let n = 3 + trial % 10;
        let g = gen_euclidean_complete(n, &mut rng).map_err(err)?;
        let (opt, _) = held_karp(&g).map_err(err)?;
        let ch = christofides(&g).map_err(err)?;
        ensure(ch.exact_matching, || format!("Christofides instance {trial}: matching was not exact"))?;
        let c = tour_cost(&g, &ch.tour).map_err(err)?;
        ensure(c <= 1.5 * opt, || format!("Christofides instance {trial}: {c} > 1.5 * {opt}"))?;
        worst_ch = worst_ch.max(c / opt);
    }
    let mut worst_gon = 0.0f64;
    for trial in 0..100 {
        let n = 3 + trial % 10;
        let k = 1 + trial % 3;
        let g = if trial % 2 == 0 { gen_er_connected(n, 0.5, &mut rng) } else { gen_euclidean_complete(n, &mut rng) }
            .map_err(err)?;
        let (opt, _) = vkc_exact(&g, k).map_err(err)?;
        let c = vkc_objective(&g, &gon_farthest_first(&g, k, rng.below(n)).map_err(err)?).map_err(err)?;
        ensure(c <= 2.0 * opt, || format!("farthest-first instance {trial}: {c} > 2 * {opt}"))?;
        if opt > 0.0 {
            worst_gon = worst_gon.max(c / opt);
        }
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!("worst ratios: Christofides {worst_ch:.3}, farthest-first {worst_gon:.3}"))
}

// Decoder.

fn decoder_correctness() -> Check {
    let mut rng = Rng::new(5005);
    for trial in 0..100 {
        let n = 3 + trial % 18;
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let tour = Tour::new(order).map_err(err)?;
        let mut logits = vec![0.0; n * n];
        for (v, p) in tour.predecessors().into_iter().enumerate() {
            logits[v * n + p] = 10.0;
        }
        let got = beam_search_tour(&logits, n, tour.start(), 1).map_err(err)?;
        ensure(got == tour, || format!("one-hot tour {trial} not recovered"))?;
    }
    for trial in 0..60 {
        let n = 3 + trial % 5;
        let logits: Vec<f64> = (0..n * n).map(|_| 4.0 * rng.uniform() - 2.0).collect();
        let start = rng.below(n);
        let (tour, score) = beam_search_tour_scored(&logits, n, start, tk::factorial(n - 1)).map_err(err)?;
        let (best, order) = tk::brute_best_tour(&logits, n, start);
        ensure(tour.order() == order.as_slice(), || format!("exhaustive beam {trial}: {:?} vs {order:?}", tour.order()))?;
        ensure((score - best).abs() <= 1e-12, || format!("exhaustive beam {trial}: score {score} vs {best}"))?;
    }
    for trial in 0..50 {
        let n = 5 + trial % 8;
        let logits: Vec<f64> = (0..n * n).map(|_| 6.0 * rng.uniform() - 3.0).collect();
        let mut prev = f64::NEG_INFINITY;
        for w in 1..=48 {
            let (_, s) = beam_search_tour_scored(&logits, n, 0, w).map_err(err)?;
            ensure(s >= prev, || format!("instance {trial}: score drops at width {w}"))?;
            prev = s;
        }
    }
    Ok("100 one-hot tours n <= 20, 60 exhaustive beams n <= 7, 50 width sweeps".into())
}

// Transfer plumbing.

const SMALL: usize = 8;

fn small_model(seed: u64) -> Model {
    Model::new(ModelConfig { latent: SMALL, edge_hidden: false, seed }).unwrap()
}

fn algo_data(algo: Algorithm, count: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = Rng::new(seed).split(algo.id());
    (0..count)
        .map(|_| {
            let n = rng.range_inclusive(4, 6);
            algo.sample(n, GraphFamily::Euclidean, &mut rng).unwrap()
        })
        .collect()
}

fn tsp_data(count: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = Rng::new(seed).split("tsp");
    (0..count).map(|_| TspInstance::generate(5, &mut rng).unwrap().to_trajectory()).collect()
}

fn train_steps(model: &mut Model, data: &[Trajectory], steps: usize) -> Result<(), String> {
    let mut trainer = Trainer::new(AdamConfig { lr: 1e-2, ..Default::default() });
    for s in 0..steps {
        trainer.step(model, &[&data[s % data.len()], &data[(s + 1) % data.len()]]).map_err(err)?;
    }
    Ok(())
}

fn processor_vars(tape: &mut Tape, params: &ParamStore, prefix: &str) -> ProcessorVars {
    ProcessorVars::from_fn(false, |name| {
        let t = params.get(&format!("{prefix}{name}")).unwrap();
        let (r, c) = t.matrix_shape();
        Ok(tape.constant(r, c, t.data.clone())?)
    })
    .unwrap()
}

fn transfer_plumbing() -> Check {
    let bf = algo_data(Algorithm::BellmanFord, 8, 1);
    let mut base = small_model(1);
    train_steps(&mut base, &bf, 3)?;
    let tsp = tsp_data(6, 2);
    let target = || {
        let mut m = small_model(2);
        m.add_head_for(&tsp[0]).unwrap();
        m
    };

    let mut pf = target();
    apply_pf(&base, &mut pf).map_err(err)?;
    train_steps(&mut pf, &tsp, 100)?;
    ensure(pf.params.same_data(&base.params, PROC), || "PF processor changed".into())?;

    let mut pft = target();
    apply_pft(&base, &mut pft).map_err(err)?;
    pft.params.zero_grad();
    pft.accumulate_grad(&tsp[0], 1.0).map_err(err)?;
    let nonzero = pft.params.iter().any(|(n, t)| n.starts_with(PROC) && t.grad.iter().any(|&g| g != 0.0));
    ensure(nonzero, || "PFT processor has no gradient".into())?;
    train_steps(&mut pft, &tsp, 1)?;
    ensure(!pft.params.same_data(&base.params, PROC), || "PFT processor did not move".into())?;

    let mut dual = target();
    apply_2proc(&base, &mut dual).map_err(err)?;
    let fresh = dual.params.clone();
    train_steps(&mut dual, &tsp, 20)?;
    ensure(dual.params.same_data(&base.params, PROC), || "2PROC frozen half changed".into())?;
    ensure(!dual.params.same_data(&fresh, PROC2), || "2PROC trainable half did not move".into())?;
    let mut rng = Rng::new(6);
    let n = 5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut tape = Tape::new();
        let a = processor_vars(&mut tape, &dual.params, PROC);
        let b = processor_vars(&mut tape, &dual.params, PROC2);
        let u = tape.constant(n, SMALL, uniform(&mut rng, n * SMALL)).map_err(err)?;
        let h = tape.constant(n, SMALL, uniform(&mut rng, n * SMALL)).map_err(err)?;
        let input = StepInput { u, graph: None, edge: None, adj: vec![true; n * n] };
        let state = Latents { h, he: None };
        let ha = processor_step(&mut tape, &a, &input, state).map_err(err)?;
        let hb = processor_step(&mut tape, &b, &input, state).map_err(err)?;
        let both = dual_step(&mut tape, &a, &b, &input, state).map_err(err)?;
        for ((x, y), m) in tape.value(ha.h).iter().zip(tape.value(hb.h)).zip(tape.value(both.h)) {
            worst = worst.max(((x + y) / 2.0 - m).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("2PROC combine is off the mean by {worst:.2e}"))?;

    let mut mtl = small_model(8);
    let mut trainer = Trainer::new(AdamConfig { lr: 1e-3, ..Default::default() });
    train_mtl(&mut mtl, &mut trainer, &[&bf, &tsp], 3, 3, &mut Rng::new(8)).map_err(err)?;
    let mut names: Vec<String> = mtl.params.names().filter(|n| n.starts_with("proc")).map(str::to_string).collect();
    let mut want: Vec<String> = processor_shapes(SMALL, false).iter().map(|(n, _, _)| format!("{PROC}{n}")).collect();
    names.sort();
    want.sort();
    ensure(names == want, || format!("MTL processor blocks: {names:?}"))?;
    ensure(mtl.tasks().count() == 2, || "MTL heads missing".into())?;
    Ok(format!("PF frozen over 100 steps, PFT moves, 2PROC mean off by {worst:.1e}, one MTL processor"))
}

// Learnability.

fn pretrain_config() -> ExperimentConfig {
    ExperimentConfig {
        algorithms: vec![Algorithm::BellmanFord, Algorithm::MstPrim],
        train_sizes: (8..=12).collect(),
        train_samples: 2000,
        val_size: 12,
        val_samples: 200,
        test_sizes: vec![12],
        test_samples: 200,
        epochs: 40,
        patience: Some(10),
        batch_size: 16,
        lr: 3e-3,
        latent: 32,
        seeds: vec![0, 1, 2],
        ..ExperimentConfig::desk(Task::Pretrain)
    }
}

fn learnability(out: &Path) -> Check {
    let start = Instant::now();
    let config = pretrain_config();
    let summaries = run::cmd_pretrain(&config, out).map_err(err)?;
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for s in &summaries {
        let acc = |algo: &str| s.curve.iter().find(|c| c.algorithm == algo && c.size == 12).map(|c| c.accuracy);
        let (bf, prim) = (acc("bellman_ford").unwrap_or(0.0), acc("mst_prim").unwrap_or(0.0));
        lines.push(format!("seed {} BF {bf:.3} Prim {prim:.3} (epoch {})", s.seed, s.best_epoch));
        if bf < 0.90 || prim < 0.80 {
            failed.push(s.seed);
        }
    }
    let detail = format!("{}; {:.0}s", lines.join(", "), start.elapsed().as_secs_f64());
    if failed.is_empty() {
        Ok(detail)
    } else {
        Err(format!("seeds {failed:?} below target: {detail}"))
    }
}

// Directional trend.

fn tsp_config(mode: TransferMode) -> ExperimentConfig {
    ExperimentConfig {
        train_sizes: vec![8, 10, 12],
        train_samples: 1000,
        val_size: 12,
        val_samples: 50,
        test_sizes: vec![16, 18],
        test_samples: 50,
        epochs: 10,
        batch_size: 16,
        lr: 3e-3,
        latent: 32,
        transfer: mode,
        beam_widths: vec![1, 128],
        seeds: vec![0, 1, 2],
        ..ExperimentConfig::desk(Task::Tsp)
    }
}

fn trend(out: &Path) -> Check {
    let start = Instant::now();
    let base = tsp_config(TransferMode::None);
    run::cmd_gen_data(&base, out).map_err(err)?;
    let at = |mode| -> Result<ResultRow, String> {
        let config = tsp_config(mode);
        run::cmd_train(&config, out).map_err(err)?;
        let rows = run::cmd_eval(&config, out).map_err(err)?;
        let label = config.model_label();
        rows.into_iter()
            .find(|r| r.model == label && r.size == 18 && r.width == Some(128))
            .ok_or_else(|| format!("no {label} row at n = 18"))
    };
    let plain = at(TransferMode::None)?;
    let pft = at(TransferMode::Pft)?;
    run::cmd_baselines(&base, out).map_err(err)?;
    let detail = format!(
        "n = 18, width 128: {} {:.4}, {} {:.4}; {:.0}s",
        pft.model,
        pft.mean_rel_err,
        plain.model,
        plain.mean_rel_err,
        start.elapsed().as_secs_f64()
    );
    if pft.mean_rel_err <= plain.mean_rel_err {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Metric exactness.

fn tiny(task: Task) -> ExperimentConfig {
    ExperimentConfig {
        algorithms: vec![Algorithm::BellmanFord, Algorithm::MstPrim],
        train_sizes: vec![5, 6],
        train_samples: 12,
        val_size: 6,
        val_samples: 4,
        test_sizes: vec![7, 8],
        test_samples: 4,
        epochs: 2,
        batch_size: 4,
        lr: 3e-3,
        latent: 8,
        beam_widths: vec![1, 4],
        seeds: vec![0, 1],
        ..ExperimentConfig::desk(task)
    }
}

fn tiny_pipeline(out: &Path) -> Result<(), String> {
    run::cmd_pretrain(&tiny(Task::Pretrain), out).map_err(err)?;
    for mode in [TransferMode::None, TransferMode::Pft] {
        let config = ExperimentConfig { transfer: mode, ..tiny(Task::Tsp) };
        run::cmd_train(&config, out).map_err(err)?;
        run::cmd_eval(&config, out).map_err(err)?;
    }
    run::cmd_baselines(&tiny(Task::Tsp), out).map_err(err)?;
    let vkc = ExperimentConfig { k: 2, beam_widths: vec![], ..tiny(Task::Vkc) };
    run::cmd_train(&vkc, out).map_err(err)?;
    run::cmd_eval(&vkc, out).map_err(err)?;
    run::cmd_baselines(&vkc, out).map_err(err)?;
    Ok(())
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(csv_files(&p));
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn metric_exactness(root: &Path, trend_out: &Path) -> Check {
    let r = relative_error(1.1, 1.0).map_err(err)?;
    ensure((r - 0.1).abs() <= 1e-12, || format!("relative_error(1.1, 1.0) = {r}"))?;

    let (a, b) = (root.join("rerun_a"), root.join("rerun_b"));
    tiny_pipeline(&a)?;
    tiny_pipeline(&b)?;
    let files = csv_files(&a);
    ensure(!files.is_empty(), || "no result files".into())?;
    for f in &files {
        let twin = b.join(f.strip_prefix(&a).unwrap());
        ensure(fs::read(f).ok() == fs::read(&twin).ok(), || format!("{} differs on rerun", f.display()))?;
    }

    let mut rows = 0;
    for dir in [&a, trend_out] {
        for f in csv_files(dir) {
            for row in report::read_csv(&f).map_err(err)? {
                ensure(row.mean_rel_err >= 0.0, || format!("{}: {} at {}", f.display(), row.model, row.mean_rel_err))?;
                rows += 1;
            }
        }
    }
    Ok(format!("{} CSV files identical on rerun, {rows} reported errors all >= 0", files.len()))
}

fn main() -> ExitCode {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&root);
    fs::create_dir_all(&root).expect("scratch directory");
    let nar = root.join("nar");

    let mut hard_failures = 0;
    let mut line = |id: usize, name: &str, hard: bool, check: Check| {
        let (tag, detail) = match check {
            Ok(d) => ("PASS", d),
            Err(d) if hard => {
                hard_failures += 1;
                ("FAIL", d)
            }
            Err(d) => ("FAIL (soft, not enforced)", d),
        };
        println!("criterion {id} {name}: {tag} - {detail}");
    };
    line(1, "gradient integrity", true, gradient_integrity());
    line(2, "trajectory oracles", true, trajectory_oracles());
    line(3, "exact oracles", true, exact_oracles());
    line(4, "approximation guarantees", true, approximation_bounds());
    line(5, "decoder correctness", true, decoder_correctness());
    line(6, "transfer plumbing", true, transfer_plumbing());
    line(7, "learnability", true, learnability(&nar));
    line(8, "directional trend", false, trend(&nar));
    line(9, "metric exactness", true, metric_exactness(&root, &nar));

    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{hard_failures} hard criteria failed");
        ExitCode::FAILURE
    }
}
