//! Non-learned heuristics for TSP and vertex k-center.

use crate::decode::{beam_search, CenterSet, Tour};
use crate::graph::{apsp_matrix, WeightedGraph};
use crate::{invalid, Result};

/// Odd-vertex sets up to this size are matched exactly.
pub const EXACT_MATCHING_MAX: usize = 18;

fn require_complete(g: &WeightedGraph) -> Result<()> {
    if g.n() < 2 || !g.is_complete() {
        return Err(invalid("tour heuristics expect a complete graph with n >= 2"));
    }
    Ok(())
}

/// Nearest-neighbour tour: always move to the closest unvisited node.
pub fn greedy_nn_tour(g: &WeightedGraph, start: usize) -> Result<Tour> {
    require_complete(g)?;
    let n = g.n();
    if start >= n {
        return Err(invalid(format!("start {start} out of range")));
    }
    let mut visited = vec![false; n];
    let mut order = vec![start];
    visited[start] = true;
    let mut last = start;
    for _ in 1..n {
        let next = (0..n)
            .filter(|&v| !visited[v])
            .min_by(|&a, &b| g.weight(last, a).total_cmp(&g.weight(last, b)).then(a.cmp(&b)))
            .expect("unvisited node remains");
        visited[next] = true;
        order.push(next);
        last = next;
    }
    Tour::new(order)
}

/// Beam search scored by negative accumulated edge weight.
pub fn beam_weight_tour(g: &WeightedGraph, start: usize, width: usize) -> Result<Tour> {
    require_complete(g)?;
    let (tour, _) = beam_search(
        g.n(),
        start,
        width,
        |last, next| -g.weight(last, next),
        |last, s| -g.weight(last, s),
    )?;
    Ok(tour)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChristofidesTour {
    pub tour: Tour,
    /// False when the odd-vertex set was too large for the exact matching and
    /// a greedy matching was used (the 3/2 guarantee then no longer holds).
    pub exact_matching: bool,
    pub odd_vertices: usize,
}

fn is_metric(g: &WeightedGraph) -> bool {
    let n = g.n();
    (0..n).all(|i| {
        (0..n).all(|j| {
            (0..n).all(|k| {
                let lhs = g.weight(i, j);
                lhs <= g.weight(i, k) + g.weight(k, j) + 1e-9 * lhs.max(1.0)
            })
        })
    })
}

/// MST parent array rooted at 0 (dense Prim).
fn mst_parents(g: &WeightedGraph) -> Vec<usize> {
    let n = g.n();
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut parent: Vec<usize> = (0..n).collect();
    key[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)))
            .expect("node outside tree");
        in_tree[u] = true;
        for v in 0..n {
            if !in_tree[v] && g.has_edge(u, v) && g.weight(u, v) < key[v] {
                key[v] = g.weight(u, v);
                parent[v] = u;
            }
        }
    }
    parent
}

/// Minimum-weight perfect matching by dynamic programming over subsets.
fn exact_matching(g: &WeightedGraph, odd: &[usize]) -> Vec<(usize, usize)> {
    let m = odd.len();
    let full = (1usize << m) - 1;
    let mut best = vec![f64::INFINITY; full + 1];
    let mut pick = vec![usize::MAX; full + 1];
    best[0] = 0.0;
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        for j in i + 1..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let rest = mask & !(1 << i) & !(1 << j);
            let c = best[rest] + g.weight(odd[i], odd[j]);
            if c < best[mask] {
                best[mask] = c;
                pick[mask] = j;
            }
        }
    }
    let mut pairs = Vec::with_capacity(m / 2);
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let j = pick[mask];
        pairs.push((odd[i], odd[j]));
        mask &= !(1 << i) & !(1 << j);
    }
    pairs
}

fn greedy_matching(g: &WeightedGraph, odd: &[usize]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..odd.len() {
        for b in a + 1..odd.len() {
            pairs.push((odd[a], odd[b]));
        }
    }
    pairs.sort_by(|x, y| g.weight(x.0, x.1).total_cmp(&g.weight(y.0, y.1)).then(x.cmp(y)));
    let mut used = vec![false; g.n()];
    pairs
        .into_iter()
        .filter(|&(a, b)| {
            let ok = !used[a] && !used[b];
            if ok {
                used[a] = true;
                used[b] = true;
            }
            ok
        })
        .collect()
}

/// Eulerian circuit of a connected multigraph with all degrees even.
fn euler_circuit(n: usize, edges: &[(usize, usize)], start: usize) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (id, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, id));
        adj[b].push((a, id));
    }
    let mut used = vec![false; edges.len()];
    let mut cursor = vec![0usize; n];
    let mut stack = vec![start];
    let mut circuit = Vec::with_capacity(edges.len() + 1);
    while let Some(&v) = stack.last() {
        while cursor[v] < adj[v].len() && used[adj[v][cursor[v]].1] {
            cursor[v] += 1;
        }
        if cursor[v] == adj[v].len() {
            circuit.push(v);
            stack.pop();
        } else {
            let (w, id) = adj[v][cursor[v]];
            used[id] = true;
            stack.push(w);
        }
    }
    circuit.reverse();
    circuit
}

/// Christofides: MST, matching on odd-degree vertices, Euler circuit,
/// shortcut to a Hamiltonian cycle. Starts at node 0.
pub fn christofides(g: &WeightedGraph) -> Result<ChristofidesTour> {
    require_complete(g)?;
    if !is_metric(g) {
        return Err(invalid("christofides expects metric weights"));
    }
    let n = g.n();
    if n == 2 {
        return Ok(ChristofidesTour { tour: Tour::new(vec![0, 1])?, exact_matching: true, odd_vertices: 2 });
    }
    let parent = mst_parents(g);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (parent[v], v)).collect();
    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let odd: Vec<usize> = (0..n).filter(|&v| degree[v] % 2 == 1).collect();
    debug_assert_eq!(odd.len() % 2, 0);
    let exact = odd.len() <= EXACT_MATCHING_MAX;
    let matching = if exact { exact_matching(g, &odd) } else { greedy_matching(g, &odd) };
    edges.extend(matching);
    let circuit = euler_circuit(n, &edges, 0);
    let mut seen = vec![false; n];
    let order: Vec<usize> = circuit
        .into_iter()
        .filter(|&v| !std::mem::replace(&mut seen[v], true))
        .collect();
    Ok(ChristofidesTour { tour: Tour::new(order)?, exact_matching: exact, odd_vertices: odd.len() })
}

/// Farthest-first traversal (Gonzalez): start at `first`, then repeatedly
/// add the node farthest from the chosen centres.
pub fn gon_farthest_first(g: &WeightedGraph, k: usize, first: usize) -> Result<CenterSet> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} outside 1..={n}")));
    }
    if first >= n {
        return Err(invalid(format!("first centre {first} out of range")));
    }
    let dist = apsp_matrix(g)?;
    let mut centers = vec![first];
    let mut near: Vec<f64> = dist[first * n..(first + 1) * n].to_vec();
    while centers.len() < k {
        let next = (0..n)
            .filter(|v| !centers.contains(v))
            .max_by(|&a, &b| near[a].total_cmp(&near[b]).then(b.cmp(&a)))
            .expect("fewer centres than nodes");
        centers.push(next);
        for v in 0..n {
            near[v] = near[v].min(dist[next * n + v]);
        }
    }
    CenterSet::new(centers, n, k)
}
