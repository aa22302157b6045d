use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde_json::Value;

use crate::json::{field, fmt_f64, usize_field};
use crate::rng::Rng;
use crate::{invalid, CoreError, Result};

/// Rejection budget for [`gen_er_connected`].
pub const MAX_ER_REJECTIONS: usize = 10_000;

/// Symmetric weighted graph with optional planar coordinates.
///
/// `weights[i * n + j]` is zero wherever `adj[i * n + j]` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    weights: Vec<f64>,
    adj: Vec<bool>,
    positions: Option<Vec<[f64; 2]>>,
}

impl WeightedGraph {
    /// Builds a graph from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(invalid("graph needs at least one node"));
        }
        let mut weights = vec![0.0; n * n];
        let mut adj = vec![false; n * n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(invalid(format!("self loop at {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid(format!("edge ({i}, {j}) has weight {w}")));
            }
            weights[i * n + j] = w;
            weights[j * n + i] = w;
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
        Ok(Self { n, weights, adj, positions: None })
    }

    /// Complete graph weighted by Euclidean distance between `positions`.
    pub fn from_positions(positions: Vec<[f64; 2]>) -> Result<Self> {
        let n = positions.len();
        if n < 2 {
            return Err(invalid(format!("need at least 2 points, got {n}")));
        }
        let mut weights = vec![0.0; n * n];
        let mut adj = vec![false; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let dx = positions[i][0] - positions[j][0];
                let dy = positions[i][1] - positions[j][1];
                let d = (dx * dx + dy * dy).sqrt();
                if d <= 0.0 {
                    return Err(invalid(format!("points {i} and {j} coincide")));
                }
                weights[i * n + j] = d;
                weights[j * n + i] = d;
                adj[i * n + j] = true;
                adj[j * n + i] = true;
            }
        }
        Ok(Self { n, weights, adj, positions: Some(positions) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    /// Row-major `n x n` weights (zero off the edge set).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major `n x n` adjacency mask with a false diagonal.
    pub fn adjacency(&self) -> &[bool] {
        &self.adj
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    pub fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.adj[i * self.n + j])
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&a| a).count() / 2
    }

    pub fn is_complete(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.has_edge(i, j)))
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j, self.weight(i, j)));
                }
            }
        }
        out
    }

    /// Same graph with nodes relabelled: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(invalid("not a permutation"));
        }
        let mut g = Self {
            n,
            weights: vec![0.0; n * n],
            adj: vec![false; n * n],
            positions: None,
        };
        for i in 0..n {
            for j in 0..n {
                g.weights[perm[i] * n + perm[j]] = self.weights[i * n + j];
                g.adj[perm[i] * n + perm[j]] = self.adj[i * n + j];
            }
        }
        g.positions = self.positions.as_ref().map(|p| {
            let mut out = vec![[0.0; 2]; n];
            for i in 0..n {
                out[perm[i]] = p[i];
            }
            out
        });
        Ok(g)
    }

    /// One JSON object: `{n, edges: [[i, j, w], ...], positions?: [[x, y], ...]}`.
    pub fn to_json_line(&self) -> String {
        let mut s = format!("{{\"n\":{},\"edges\":[", self.n);
        for (k, (i, j, w)) in self.edges().into_iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            s.push_str(&format!("[{i},{j},{}]", fmt_f64(w)));
        }
        s.push(']');
        if let Some(pos) = &self.positions {
            s.push_str(",\"positions\":[");
            for (k, p) in pos.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                s.push_str(&format!("[{},{}]", fmt_f64(p[0]), fmt_f64(p[1])));
            }
            s.push(']');
        }
        s.push('}');
        s
    }

    pub fn from_json_value(v: &Value) -> Result<Self> {
        let n = usize_field(v, "n")?;
        let bad = || CoreError::Parse("malformed edge".into());
        let mut edges = Vec::new();
        for e in field(v, "edges")?.as_array().ok_or_else(bad)? {
            let e = e.as_array().filter(|e| e.len() == 3).ok_or_else(bad)?;
            let i = e[0].as_u64().ok_or_else(bad)? as usize;
            let j = e[1].as_u64().ok_or_else(bad)? as usize;
            let w = e[2].as_f64().ok_or_else(bad)?;
            edges.push((i, j, w));
        }
        let mut g = Self::from_edges(n, &edges)?;
        if let Some(pos) = v.get("positions") {
            let bad = || CoreError::Parse("malformed position".into());
            let pts = pos
                .as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|p| {
                    let p = p.as_array().filter(|p| p.len() == 2).ok_or_else(bad)?;
                    Ok([p[0].as_f64().ok_or_else(bad)?, p[1].as_f64().ok_or_else(bad)?])
                })
                .collect::<Result<Vec<_>>>()?;
            if pts.len() != n {
                return Err(CoreError::Parse(format!("{} positions for {n} nodes", pts.len())));
            }
            g.positions = Some(pts);
        }
        Ok(g)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        Self::from_json_value(&serde_json::from_str(line)?)
    }
}

/// `n` points uniform on the unit square, fully connected by Euclidean distance.
pub fn gen_euclidean_complete(n: usize, rng: &mut Rng) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(invalid(format!("euclidean instance needs n >= 2, got {n}")));
    }
    loop {
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.uniform(), rng.uniform()]).collect();
        // coincident points have probability ~0; resample rather than fail
        if let Ok(g) = WeightedGraph::from_positions(pts) {
            return Ok(g);
        }
    }
}

/// Erdős–Rényi `G(n, p)` conditioned on connectivity, weights uniform on
/// `(0, 1]` (quantised, see [`Rng::uniform_grid`]).
pub fn gen_er_connected(n: usize, p: f64, rng: &mut Rng) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(invalid(format!("ER instance needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("edge probability {p} outside (0, 1]")));
    }
    for _ in 0..MAX_ER_REJECTIONS {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if p >= 1.0 || rng.bernoulli(p) {
                    edges.push((i, j, rng.uniform_grid()));
                }
            }
        }
        let g = WeightedGraph::from_edges(n, &edges)?;
        if is_connected(&g) {
            return Ok(g);
        }
    }
    Err(CoreError::GenerationFailure {
        attempts: MAX_ER_REJECTIONS,
        reason: format!("no connected G({n}, {p}) sample"),
    })
}

pub fn is_connected(g: &WeightedGraph) -> bool {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for v in g.neighbours(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path lengths from `source` (Dijkstra); `INFINITY` if unreachable.
pub fn single_source(g: &WeightedGraph, source: usize) -> Vec<f64> {
    let n = g.n();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for v in g.neighbours(u) {
            let nd = d + g.weight(u, v);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapItem(nd, v));
            }
        }
    }
    dist
}

/// All-pairs shortest-path lengths, row-major `n x n`.
///
/// Rows come from one Dijkstra run per source; the two directions of each
/// pair are reconciled with `min` so the result is exactly symmetric.
pub fn apsp_matrix(g: &WeightedGraph) -> Result<Vec<f64>> {
    let n = g.n();
    let mut d = Vec::with_capacity(n * n);
    for s in 0..n {
        d.extend(single_source(g, s));
    }
    if d.iter().any(|x| x.is_infinite()) {
        return Err(invalid("apsp requires a connected graph"));
    }
    for i in 0..n {
        for j in i + 1..n {
            let m = d[i * n + j].min(d[j * n + i]);
            d[i * n + j] = m;
            d[j * n + i] = m;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_distance_from_positions() {
        let g = WeightedGraph::from_positions(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(1, 0), 1.0);
        assert_eq!(g.weight(0, 0), 0.0);
    }

    #[test]
    fn euclidean_rejects_tiny_n() {
        assert!(gen_euclidean_complete(1, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn euclidean_invariants() {
        let mut rng = Rng::new(11);
        let g = gen_euclidean_complete(9, &mut rng).unwrap();
        let n = g.n();
        assert!(g.is_complete());
        let pos = g.positions().unwrap();
        for i in 0..n {
            assert_eq!(g.weight(i, i), 0.0);
            assert!(!g.has_edge(i, i));
            for j in 0..n {
                assert_eq!(g.weight(i, j).to_bits(), g.weight(j, i).to_bits());
                let d = ((pos[i][0] - pos[j][0]).powi(2) + (pos[i][1] - pos[j][1]).powi(2)).sqrt();
                assert!((g.weight(i, j) - d).abs() <= 1e-12);
                for k in 0..n {
                    assert!(g.weight(i, j) <= g.weight(i, k) + g.weight(k, j) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn er_with_p_one_is_complete() {
        let g = gen_er_connected(7, 1.0, &mut Rng::new(5)).unwrap();
        assert!(g.is_complete());
    }

    #[test]
    fn er_rejects_bad_probability() {
        assert!(gen_er_connected(5, 0.0, &mut Rng::new(0)).is_err());
        assert!(gen_er_connected(5, 1.5, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn er_gives_up_on_hopeless_parameters() {
        let err = gen_er_connected(40, 1e-6, &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err, CoreError::GenerationFailure { .. }));
    }

    #[test]
    fn path_apsp() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let d = apsp_matrix(&g).unwrap();
        assert_eq!(d[2], 3.0);
        assert_eq!(d[6], 3.0);
    }

    #[test]
    fn apsp_rejects_disconnected() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(apsp_matrix(&g).is_err());
        assert!(!is_connected(&g));
    }

    #[test]
    fn edgeless_pair_is_disconnected() {
        let g = WeightedGraph::from_edges(2, &[]).unwrap();
        assert!(!is_connected(&g));
    }

    #[test]
    fn metric_complete_apsp_is_weights() {
        let g = gen_euclidean_complete(8, &mut Rng::new(2)).unwrap();
        let d = apsp_matrix(&g).unwrap();
        for (a, b) in d.iter().zip(g.weights()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let g = gen_euclidean_complete(5, &mut Rng::new(9)).unwrap();
        let back = WeightedGraph::from_json_line(&g.to_json_line()).unwrap();
        assert_eq!(back, g);
        let h = gen_er_connected(6, 0.5, &mut Rng::new(9)).unwrap();
        assert_eq!(WeightedGraph::from_json_line(&h.to_json_line()).unwrap(), h);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_er_connected(10, 0.5, &mut Rng::new(42)).unwrap();
        let b = gen_er_connected(10, 0.5, &mut Rng::new(42)).unwrap();
        assert_eq!(a.to_json_line(), b.to_json_line());
    }
}
