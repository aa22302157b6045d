use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FeatureKind as K, Location as L, TrajBuilder, Trajectory};
use crate::graph::{gen_er_connected, gen_euclidean_complete, is_connected, WeightedGraph};
use crate::rng::Rng;
use crate::{invalid, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BellmanFord,
    MstPrim,
    FindMin,
    ActivitySelection,
    TaskScheduling,
    FloydWarshall,
    InsertionSort,
}

/// Graph distribution used for the graph algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFamily {
    Euclidean,
    ErdosRenyi { p: f64 },
}

impl GraphFamily {
    pub fn sample(self, n: usize, rng: &mut Rng) -> Result<WeightedGraph> {
        match self {
            GraphFamily::Euclidean => gen_euclidean_complete(n, rng),
            GraphFamily::ErdosRenyi { p } => gen_er_connected(n, p, rng),
        }
    }
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::BellmanFord,
        Algorithm::MstPrim,
        Algorithm::FindMin,
        Algorithm::ActivitySelection,
        Algorithm::TaskScheduling,
        Algorithm::FloydWarshall,
        Algorithm::InsertionSort,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::BellmanFord => "bellman_ford",
            Algorithm::MstPrim => "mst_prim",
            Algorithm::FindMin => "find_min",
            Algorithm::ActivitySelection => "activity_selection",
            Algorithm::TaskScheduling => "task_scheduling",
            Algorithm::FloydWarshall => "floyd_warshall",
            Algorithm::InsertionSort => "insertion_sort",
        }
    }

    pub fn uses_graph(self) -> bool {
        matches!(self, Algorithm::BellmanFord | Algorithm::MstPrim | Algorithm::FloydWarshall)
    }

    /// Draws a random instance of size `n` and executes it.
    pub fn sample(self, n: usize, family: GraphFamily, rng: &mut Rng) -> Result<Trajectory> {
        match self {
            Algorithm::BellmanFord => {
                let g = family.sample(n, rng)?;
                traj_bellman_ford(&g, rng.below(n))
            }
            Algorithm::MstPrim => {
                let g = family.sample(n, rng)?;
                traj_mst_prim(&g, rng.below(n))
            }
            Algorithm::FloydWarshall => traj_floyd_warshall(&family.sample(n, rng)?),
            Algorithm::FindMin => {
                let v: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
                traj_find_min(&v)
            }
            Algorithm::InsertionSort => {
                let v: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
                traj_insertion_sort(&v)
            }
            Algorithm::ActivitySelection => {
                let (mut s, mut f) = (Vec::with_capacity(n), Vec::with_capacity(n));
                while s.len() < n {
                    let (a, b) = (rng.uniform(), rng.uniform());
                    if a != b {
                        s.push(a.min(b));
                        f.push(a.max(b));
                    }
                }
                traj_activity_selection(&s, &f)
            }
            Algorithm::TaskScheduling => {
                let d: Vec<usize> = (0..n).map(|_| rng.range_inclusive(1, n)).collect();
                let p: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
                traj_task_scheduling(&d, &p)
            }
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| invalid(format!("unknown algorithm `{s}`")))
    }
}

fn positions(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn as_f64(xs: &[usize]) -> Vec<f64> {
    xs.iter().map(|&x| x as f64).collect()
}

fn bools(xs: &[bool]) -> Vec<f64> {
    xs.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

fn graph_inputs(b: &mut TrajBuilder, g: &WeightedGraph) {
    b.input("pos", L::Node, K::Scalar, positions(g.n()));
    b.input("w", L::Edge, K::Scalar, g.weights().to_vec());
    b.input("adj", L::Edge, K::Mask, bools(g.adjacency()));
}

fn require_connected(g: &WeightedGraph, root: usize) -> Result<()> {
    if root >= g.n() {
        return Err(invalid(format!("node {root} out of range for n = {}", g.n())));
    }
    if !is_connected(g) {
        return Err(invalid("graph must be connected"));
    }
    Ok(())
}

/// Synchronous Bellman-Ford rounds from `source`.
///
/// Step 0 is the initial state; each later step is one round that changed
/// something. Unreached nodes carry distance 0 and point to themselves.
pub fn traj_bellman_ford(g: &WeightedGraph, source: usize) -> Result<Trajectory> {
    require_connected(g, source)?;
    let n = g.n();
    let mut b = TrajBuilder::new(Algorithm::BellmanFord, n);
    b.input("pos", L::Node, K::Scalar, positions(n));
    b.input("s", L::Node, K::MaskOne, one_hot(n, source));
    b.input("w", L::Edge, K::Scalar, g.weights().to_vec());
    b.input("adj", L::Edge, K::Mask, bools(g.adjacency()));
    b.hint("pi_h", L::Node, K::Pointer);
    b.hint("d", L::Node, K::Scalar);
    b.hint("reached", L::Node, K::Mask);

    let mut dist = vec![f64::INFINITY; n];
    let mut pi: Vec<usize> = (0..n).collect();
    dist[source] = 0.0;
    let record = |b: &mut TrajBuilder, dist: &[f64], pi: &[usize]| {
        b.push_hint("pi_h", &as_f64(pi));
        let d: Vec<f64> = dist.iter().map(|&x| if x.is_finite() { x } else { 0.0 }).collect();
        b.push_hint("d", &d);
        let r: Vec<bool> = dist.iter().map(|x| x.is_finite()).collect();
        b.push_hint("reached", &bools(&r));
        b.step();
    };
    record(&mut b, &dist, &pi);
    loop {
        let mut next = dist.clone();
        let mut next_pi = pi.clone();
        let mut changed = false;
        for v in 0..n {
            for u in g.neighbours(v) {
                if dist[u].is_finite() {
                    let cand = dist[u] + g.weight(u, v);
                    if cand < next[v] {
                        next[v] = cand;
                        next_pi[v] = u;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
        dist = next;
        pi = next_pi;
        record(&mut b, &dist, &pi);
    }
    b.output("pi", L::Node, K::Pointer, as_f64(&pi));
    Ok(b.finish())
}

/// Prim's algorithm from `root`, one node joining the tree per step.
pub fn traj_mst_prim(g: &WeightedGraph, root: usize) -> Result<Trajectory> {
    require_connected(g, root)?;
    let n = g.n();
    let mut b = TrajBuilder::new(Algorithm::MstPrim, n);
    b.input("pos", L::Node, K::Scalar, positions(n));
    b.input("r", L::Node, K::MaskOne, one_hot(n, root));
    b.input("w", L::Edge, K::Scalar, g.weights().to_vec());
    b.input("adj", L::Edge, K::Mask, bools(g.adjacency()));
    b.hint("pi_h", L::Node, K::Pointer);
    b.hint("in_tree", L::Node, K::Mask);
    b.hint("key", L::Node, K::Scalar);

    let mut pi: Vec<usize> = (0..n).collect();
    let mut key = vec![f64::INFINITY; n];
    let mut in_tree = vec![false; n];
    key[root] = 0.0;
    let mut u = root;
    for _ in 0..n {
        in_tree[u] = true;
        for v in g.neighbours(u) {
            if !in_tree[v] && g.weight(u, v) < key[v] {
                key[v] = g.weight(u, v);
                pi[v] = u;
            }
        }
        b.push_hint("pi_h", &as_f64(&pi));
        b.push_hint("in_tree", &bools(&in_tree));
        let k: Vec<f64> = key.iter().map(|&x| if x.is_finite() { x } else { 0.0 }).collect();
        b.push_hint("key", &k);
        b.step();
        let next = (0..n)
            .filter(|&v| !in_tree[v] && key[v].is_finite())
            .min_by(|&a, &c| key[a].total_cmp(&key[c]).then(a.cmp(&c)));
        match next {
            Some(v) => u = v,
            None => break,
        }
    }
    b.output("pi", L::Node, K::Pointer, as_f64(&pi));
    Ok(b.finish())
}

/// Left-to-right scan keeping the first minimum.
pub fn traj_find_min(values: &[f64]) -> Result<Trajectory> {
    let n = values.len();
    if n == 0 || values.iter().any(|x| !x.is_finite()) {
        return Err(invalid("find_min needs a non-empty finite array"));
    }
    let mut b = TrajBuilder::new(Algorithm::FindMin, n);
    b.input("pos", L::Node, K::Scalar, positions(n));
    b.input("key", L::Node, K::Scalar, values.to_vec());
    b.hint("best", L::Node, K::MaskOne);
    b.hint("i", L::Node, K::MaskOne);
    let mut best = 0;
    for t in 0..n {
        if values[t] < values[best] {
            best = t;
        }
        b.push_hint("best", &one_hot(n, best));
        b.push_hint("i", &one_hot(n, t));
        b.step();
    }
    b.output("min", L::Node, K::MaskOne, one_hot(n, best));
    Ok(b.finish())
}

/// Greedy earliest-finish interval scheduling.
///
/// Intervals are half-open: one ending at `x` is compatible with one
/// starting at `x`. The finish-time order is supplied as the `order` input.
pub fn traj_activity_selection(starts: &[f64], finishes: &[f64]) -> Result<Trajectory> {
    let n = starts.len();
    if n == 0 || finishes.len() != n {
        return Err(invalid("activity selection needs equal-length non-empty arrays"));
    }
    if starts.iter().zip(finishes).any(|(s, f)| !(s < f) || !s.is_finite() || !f.is_finite()) {
        return Err(invalid("every activity must finish after it starts"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| finishes[a].total_cmp(&finishes[c]).then(a.cmp(&c)));
    let mut rank = vec![0.0; n];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r as f64 / n as f64;
    }
    let mut b = TrajBuilder::new(Algorithm::ActivitySelection, n);
    b.input("pos", L::Node, K::Scalar, positions(n));
    b.input("s", L::Node, K::Scalar, starts.to_vec());
    b.input("f", L::Node, K::Scalar, finishes.to_vec());
    b.input("order", L::Node, K::Scalar, rank);
    b.hint("selected_h", L::Node, K::Mask);
    b.hint("scan", L::Node, K::MaskOne);
    let mut selected = vec![false; n];
    let mut last_finish = f64::NEG_INFINITY;
    for &k in &order {
        if starts[k] >= last_finish {
            selected[k] = true;
            last_finish = finishes[k];
        }
        b.push_hint("selected_h", &bools(&selected));
        b.push_hint("scan", &one_hot(n, k));
        b.step();
    }
    b.output("selected", L::Node, K::Mask, bools(&selected));
    Ok(b.finish())
}

/// Whether unit-time tasks with these deadlines can all finish on time.
pub fn schedule_feasible(deadlines: impl IntoIterator<Item = usize>) -> bool {
    let mut ds: Vec<usize> = deadlines.into_iter().collect();
    ds.sort_unstable();
    ds.iter().enumerate().all(|(slot, &d)| slot < d)
}

/// Greedy unit-time task scheduling: consider tasks by decreasing profit and
/// accept each one that keeps the accepted set schedulable.
pub fn traj_task_scheduling(deadlines: &[usize], profits: &[f64]) -> Result<Trajectory> {
    let n = deadlines.len();
    if n == 0 || profits.len() != n {
        return Err(invalid("task scheduling needs equal-length non-empty arrays"));
    }
    if deadlines.iter().any(|&d| d == 0) || profits.iter().any(|p| !p.is_finite()) {
        return Err(invalid("deadlines must be >= 1 and profits finite"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| profits[c].total_cmp(&profits[a]).then(a.cmp(&c)));
    let mut b = TrajBuilder::new(Algorithm::TaskScheduling, n);
    b.input("pos", L::Node, K::Scalar, positions(n));
    b.input("d", L::Node, K::Scalar, deadlines.iter().map(|&d| d as f64 / n as f64).collect());
    b.input("p", L::Node, K::Scalar, profits.to_vec());
    b.hint("accepted_h", L::Node, K::Mask);
    let mut accepted = vec![false; n];
    for &k in &order {
        accepted[k] = true;
        let ds = (0..n).filter(|&i| accepted[i]).map(|i| deadlines[i]);
        if !schedule_feasible(ds) {
            accepted[k] = false;
        }
        b.push_hint("accepted_h", &bools(&accepted));
        b.step();
    }
    b.output("accepted", L::Node, K::Mask, bools(&accepted));
    Ok(b.finish())
}

/// Floyd-Warshall, one intermediate node per step.
///
/// `pi_h[i][j]` is the predecessor of `j` on the current best `i -> j` path
/// (`i` itself on the diagonal and while `j` is unreached; unreached
/// distances read 0).
pub fn traj_floyd_warshall(g: &WeightedGraph) -> Result<Trajectory> {
    let n = g.n();
    let mut b = TrajBuilder::new(Algorithm::FloydWarshall, n);
    graph_inputs(&mut b, g);
    b.hint("d_h", L::Edge, K::Scalar);
    b.hint("pi_h", L::Edge, K::Pointer);
    let mut dist = vec![0.0; n * n];
    let mut reach = vec![false; n * n];
    let mut pi = vec![0usize; n * n];
    for i in 0..n {
        for j in 0..n {
            pi[i * n + j] = i;
            if i == j || g.has_edge(i, j) {
                reach[i * n + j] = true;
                dist[i * n + j] = g.weight(i, j);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if !reach[i * n + k] {
                continue;
            }
            for j in 0..n {
                if i == j || !reach[k * n + j] {
                    continue;
                }
                let cand = dist[i * n + k] + dist[k * n + j];
                if !reach[i * n + j] || cand < dist[i * n + j] {
                    dist[i * n + j] = cand;
                    reach[i * n + j] = true;
                    pi[i * n + j] = pi[k * n + j];
                }
            }
        }
        b.push_hint("d_h", &dist);
        b.push_hint("pi_h", &as_f64(&pi));
        b.step();
    }
    b.output("pi", L::Edge, K::Pointer, as_f64(&pi));
    Ok(b.finish())
}

/// Stable insertion sort, one element inserted per step. The sorted prefix
/// is a predecessor list (head points to itself); elements not yet inserted
/// point to themselves.
pub fn traj_insertion_sort(values: &[f64]) -> Result<Trajectory> {
    let n = values.len();
    if n == 0 || values.iter().any(|x| !x.is_finite()) {
        return Err(invalid("insertion sort needs a non-empty finite array"));
    }
    let mut b = TrajBuilder::new(Algorithm::InsertionSort, n);
    b.input("pos", L::Node, K::Scalar, positions(n));
    b.input("key", L::Node, K::Scalar, values.to_vec());
    b.hint("pred_h", L::Node, K::Pointer);
    let mut list: Vec<usize> = Vec::with_capacity(n);
    let mut pred: Vec<usize> = (0..n).collect();
    for t in 0..n {
        let at = list.iter().position(|&i| values[i] > values[t]).unwrap_or(list.len());
        list.insert(at, t);
        for (p, &i) in list.iter().enumerate() {
            pred[i] = if p == 0 { i } else { list[p - 1] };
        }
        b.push_hint("pred_h", &as_f64(&pred));
        b.step();
    }
    b.output("pred", L::Node, K::Pointer, as_f64(&pred));
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clrs::Stage;
    use crate::graph::apsp_matrix;

    fn out(t: &Trajectory, name: &str) -> Vec<usize> {
        t.output(name).unwrap().data.iter().map(|&x| x as usize).collect()
    }

    fn last_hint_matches_output(t: &Trajectory, hint: &str, output: &str) {
        let h = t.hint(hint).unwrap();
        assert_eq!(h.slice(t.n, t.steps - 1), t.output(output).unwrap().data.as_slice());
    }

    #[test]
    fn bellman_ford_on_path() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let t = traj_bellman_ford(&g, 0).unwrap();
        assert_eq!(out(&t, "pi"), vec![0, 0, 1]);
        assert_eq!(t.steps, 3);
        last_hint_matches_output(&t, "pi_h", "pi");
        assert_eq!(t.hint("d").unwrap().slice(3, 2), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn bellman_ford_distances_match_apsp() {
        let mut rng = Rng::new(4);
        for _ in 0..20 {
            let n = rng.range_inclusive(4, 10);
            let g = gen_er_connected(n, 0.4, &mut rng).unwrap();
            let s = rng.below(n);
            let t = traj_bellman_ford(&g, s).unwrap();
            let d = apsp_matrix(&g).unwrap();
            assert_eq!(t.hint("d").unwrap().slice(n, t.steps - 1), &d[s * n..(s + 1) * n]);
            assert_eq!(out(&t, "pi")[s], s);
            assert!(t.steps <= n);
        }
    }

    #[test]
    fn bellman_ford_rejects_bad_source() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert!(traj_bellman_ford(&g, 2).is_err());
        let disconnected = WeightedGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(traj_bellman_ford(&disconnected, 0).is_err());
    }

    #[test]
    fn prim_triangle() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)]).unwrap();
        let t = traj_mst_prim(&g, 0).unwrap();
        assert_eq!(out(&t, "pi"), vec![0, 0, 1]);
        assert_eq!(t.steps, 3);
        last_hint_matches_output(&t, "pi_h", "pi");
    }

    #[test]
    fn find_min_examples() {
        let t = traj_find_min(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(t.output("min").unwrap().data, vec![0.0, 1.0, 0.0]);
        let t = traj_find_min(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.output("min").unwrap().data[0], 1.0);
        last_hint_matches_output(&t, "best", "min");
        assert_eq!(t.steps, 4);
    }

    #[test]
    fn activity_selection_extremes() {
        let t = traj_activity_selection(&[0.0, 0.2, 0.4], &[0.2, 0.4, 0.6]).unwrap();
        assert_eq!(t.output("selected").unwrap().data, vec![1.0; 3]);
        let t = traj_activity_selection(&[0.0, 0.1, 0.2], &[0.9, 0.8, 0.7]).unwrap();
        assert_eq!(t.output("selected").unwrap().data.iter().sum::<f64>(), 1.0);
        last_hint_matches_output(&t, "selected_h", "selected");
        assert!(traj_activity_selection(&[0.5], &[0.5]).is_err());
    }

    #[test]
    fn task_scheduling_extremes() {
        let t = traj_task_scheduling(&[4, 5, 4, 9], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(t.output("accepted").unwrap().data, vec![1.0; 4]);
        let t = traj_task_scheduling(&[1, 1, 1], &[0.3, 0.9, 0.5]).unwrap();
        assert_eq!(t.output("accepted").unwrap().data, vec![0.0, 1.0, 0.0]);
        last_hint_matches_output(&t, "accepted_h", "accepted");
        assert!(traj_task_scheduling(&[0], &[1.0]).is_err());
    }

    #[test]
    fn floyd_warshall_small_cases() {
        let g = WeightedGraph::from_edges(2, &[(0, 1, 0.5)]).unwrap();
        let t = traj_floyd_warshall(&g).unwrap();
        assert_eq!(t.hint("d_h").unwrap().slice(2, 1), g.weights());
        let mut rng = Rng::new(8);
        let g = gen_er_connected(9, 0.4, &mut rng).unwrap();
        let t = traj_floyd_warshall(&g).unwrap();
        assert_eq!(t.steps, 9);
        let d = t.hint("d_h").unwrap();
        for s in 0..t.steps {
            let slice = d.slice(9, s);
            assert!((0..9).all(|i| slice[i * 9 + i] == 0.0));
        }
        assert_eq!(d.slice(9, 8), apsp_matrix(&g).unwrap().as_slice());
        last_hint_matches_output(&t, "pi_h", "pi");
    }

    #[test]
    fn insertion_sort_chains() {
        let t = traj_insertion_sort(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out(&t, "pred"), vec![0, 0, 1, 2]);
        let t = traj_insertion_sort(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(out(&t, "pred"), vec![1, 2, 3, 3]);
        last_hint_matches_output(&t, "pred_h", "pred");
    }

    #[test]
    fn sampled_trajectories_validate_and_round_trip() {
        let mut rng = Rng::new(1);
        for algo in Algorithm::ALL {
            for family in [GraphFamily::Euclidean, GraphFamily::ErdosRenyi { p: 0.5 }] {
                let t = algo.sample(7, family, &mut rng).unwrap();
                t.validate().unwrap();
                assert!(t.steps >= 1 && t.steps <= t.n + 1);
                assert!(t.hints.iter().all(|h| h.spec.stage == Stage::Hint));
                let back = Trajectory::from_json_line(&t.to_json_line()).unwrap();
                assert_eq!(back, t);
            }
        }
    }

    #[test]
    fn regeneration_is_identical() {
        for algo in Algorithm::ALL {
            let a = algo.sample(8, GraphFamily::Euclidean, &mut Rng::new(3)).unwrap();
            let b = algo.sample(8, GraphFamily::Euclidean, &mut Rng::new(3)).unwrap();
            assert_eq!(a.to_json_line(), b.to_json_line());
        }
    }
}
