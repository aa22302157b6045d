//! Brute-force reference implementations.
//!
//! Nothing here calls into the solvers it is used to check; only the graph
//! container from `algoreason-core` is shared.

pub mod grad;

use algoreason_core::WeightedGraph;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Calls `f` on every permutation of `items` (Heap's algorithm).
pub fn for_each_permutation(items: &mut [usize], f: &mut impl FnMut(&[usize])) {
    fn rec(k: usize, a: &mut [usize], f: &mut impl FnMut(&[usize])) {
        if k <= 1 {
            f(a);
            return;
        }
        for i in 0..k - 1 {
            rec(k - 1, a, f);
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
        }
        rec(k - 1, a, f);
    }
    let k = items.len();
    rec(k, items, f)
}

/// Monte-Carlo mean distance between two independent uniform points in the
/// unit square.
pub fn mc_unit_square_distance(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        let (a, b, c, d): (f64, f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen(), rng.gen());
        total += ((a - c).powi(2) + (b - d).powi(2)).sqrt();
    }
    total / samples as f64
}

/// Empirical edge density of `G(n, p)` samples conditioned on connectivity,
/// drawn with an independent generator.
pub fn mc_connected_er_density(n: usize, p: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pairs = n * (n - 1) / 2;
    let mut edges_total = 0usize;
    let mut accepted = 0;
    while accepted < samples {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if union_find_components(n, &edges) == 1 {
            edges_total += edges.len();
            accepted += 1;
        }
    }
    edges_total as f64 / (samples * pairs) as f64
}

pub fn union_find_components(n: usize, edges: &[(usize, usize)]) -> usize {
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut x = x;
        while p[x] != r {
            let next = p[x];
            p[x] = r;
            x = next;
        }
        r
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut comps = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            comps -= 1;
        }
    }
    comps
}

pub fn graph_edges(g: &WeightedGraph) -> Vec<(usize, usize, f64)> {
    let n = g.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if g.has_edge(i, j) {
                out.push((i, j, g.weight(i, j)));
            }
        }
    }
    out
}

/// Shortest distances from `source` by enumerating simple paths depth-first.
/// Branches whose prefix is already longer than the best known distance to
/// their end node are cut; shortest paths have shortest prefixes, so this
/// keeps the result exact.
pub fn brute_shortest_from(g: &WeightedGraph, source: usize) -> Vec<f64> {
    let n = g.n();
    let mut best = vec![f64::INFINITY; n];
    let mut on_path = vec![false; n];
    fn dfs(g: &WeightedGraph, v: usize, len: f64, best: &mut [f64], on_path: &mut [bool]) {
        if len > best[v] {
            return;
        }
        best[v] = len;
        on_path[v] = true;
        for u in 0..g.n() {
            if g.has_edge(v, u) && !on_path[u] {
                dfs(g, u, len + g.weight(v, u), best, on_path);
            }
        }
        on_path[v] = false;
    }
    dfs(g, source, 0.0, &mut best, &mut on_path);
    best
}

/// Total weight of a minimum spanning tree (Kruskal).
pub fn kruskal_weight(g: &WeightedGraph) -> f64 {
    let mut edges = graph_edges(g);
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut total = 0.0;
    for (a, b, w) in edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            total += w;
        }
    }
    total
}

/// Largest number of pairwise compatible half-open intervals.
pub fn brute_max_activities(starts: &[f64], finishes: &[f64]) -> usize {
    let n = starts.len();
    let compatible = |a: usize, b: usize| starts[a] >= finishes[b] || starts[b] >= finishes[a];
    (0u32..1 << n)
        .filter(|&mask| {
            (0..n).all(|a| {
                mask & (1 << a) == 0 || (a + 1..n).all(|b| mask & (1 << b) == 0 || compatible(a, b))
            })
        })
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

/// Best total profit over every processing order of unit-time tasks, where a
/// task earns its profit iff it finishes by its deadline.
pub fn brute_best_schedule(deadlines: &[usize], profits: &[f64]) -> f64 {
    brute_best_schedule_set(deadlines, profits).0
}

/// Best profit with its on-time tasks in increasing index order.
pub fn brute_best_schedule_set(deadlines: &[usize], profits: &[f64]) -> (f64, Vec<usize>) {
    let n = deadlines.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = (0.0f64, Vec::new());
    for_each_permutation(&mut order, &mut |perm| {
        // A late task wastes its slot, so an optimal schedule is a
        // permutation whose on-time prefix is taken greedily.
        let mut time = 0;
        let mut profit = 0.0;
        let mut taken = Vec::new();
        for &t in perm {
            if time < deadlines[t] {
                time += 1;
                profit += profits[t];
                taken.push(t);
            }
        }
        if profit > best.0 {
            taken.sort_unstable();
            best = (profit, taken);
        }
    });
    best
}

/// Cycle cost summed from node 0 in the direction whose second node is the
/// smaller neighbour of 0.
pub fn cycle_cost(g: &WeightedGraph, order: &[usize]) -> f64 {
    let n = order.len();
    let at = order.iter().position(|&v| v == 0).expect("node 0 on tour");
    let mut seq: Vec<usize> = (0..n).map(|k| order[(at + k) % n]).collect();
    if n > 2 && seq[n - 1] < seq[1] {
        seq[1..].reverse();
    }
    let mut total = 0.0;
    for k in 0..n {
        total += g.weight(seq[k], seq[(k + 1) % n]);
    }
    total
}

/// Minimum cycle cost over all `(n-1)!` tours through node 0.
pub fn brute_tsp(g: &WeightedGraph) -> f64 {
    let n = g.n();
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best = f64::INFINITY;
    for_each_permutation(&mut rest, &mut |perm| {
        let mut order = vec![0];
        order.extend_from_slice(perm);
        best = best.min(cycle_cost(g, &order));
    });
    best
}

/// Floyd-Warshall distances, used as an all-pairs reference.
pub fn reference_apsp(g: &WeightedGraph) -> Vec<f64> {
    let n = g.n();
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
        for j in 0..n {
            if g.has_edge(i, j) {
                d[i * n + j] = g.weight(i, j);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let c = d[i * n + k] + d[k * n + j];
                if c < d[i * n + j] {
                    d[i * n + j] = c;
                }
            }
        }
    }
    d
}

/// k-center objective of `centers` under distance matrix `d`.
pub fn kcenter_cost(d: &[f64], n: usize, centers: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for v in 0..n {
        let mut near = f64::INFINITY;
        for &c in centers {
            near = near.min(d[v * n + c]);
        }
        worst = worst.max(near);
    }
    worst
}

/// Best k-center objective over every non-empty subset of at most `k` nodes.
pub fn brute_vkc(d: &[f64], n: usize, k: usize) -> f64 {
    let mut best = f64::INFINITY;
    for mask in 1u32..1 << n {
        if mask.count_ones() as usize > k {
            continue;
        }
        let centers: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
        best = best.min(kcenter_cost(d, n, &centers));
    }
    best
}

/// Row-wise log-softmax computed independently of the decoder.
pub fn log_softmax(logits: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let row = &logits[i * n..(i + 1) * n];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|x| (x - m).exp()).sum();
        out.extend(row.iter().map(|x| x - m - s.ln()));
    }
    out
}

/// Best predecessor-log-probability score over all tours from `start`,
/// accumulated in visiting order followed by the closing edge.
pub fn brute_best_tour_score(logits: &[f64], n: usize, start: usize) -> f64 {
    brute_best_tour(logits, n, start).0
}

/// Best score with its visiting order, which begins at `start`.
pub fn brute_best_tour(logits: &[f64], n: usize, start: usize) -> (f64, Vec<usize>) {
    let lp = log_softmax(logits, n);
    let mut rest: Vec<usize> = (0..n).filter(|&v| v != start).collect();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for_each_permutation(&mut rest, &mut |perm| {
        let mut s = 0.0;
        let mut last = start;
        for &v in perm {
            s += lp[v * n + last];
            last = v;
        }
        s += lp[start * n + last];
        if s > best.0 {
            let mut order = vec![start];
            order.extend_from_slice(perm);
            best = (s, order);
        }
    });
    best
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_all_visited() {
        let mut items = vec![0, 1, 2, 3];
        let mut seen = std::collections::BTreeSet::new();
        for_each_permutation(&mut items, &mut |p| {
            seen.insert(p.to_vec());
        });
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn unit_square_mean_distance() {
        // closed form (2 + sqrt 2 + 5 asinh 1) / 15
        let exact = (2.0 + 2f64.sqrt() + 5.0 * 1f64.asinh()) / 15.0;
        assert!((mc_unit_square_distance(200_000, 1) - exact).abs() < 0.003);
    }
}
