use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::graph::{apsp_matrix, WeightedGraph};
use crate::{invalid, Result};

/// A Hamiltonian cycle, stored as a node permutation beginning at the start
/// node; the return edge to the start is implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tour {
    order: Vec<usize>,
}

impl Tour {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(invalid(format!("{order:?} is not a permutation")));
            }
        }
        if n == 0 {
            return Err(invalid("empty tour"));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn start(&self) -> usize {
        self.order[0]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Predecessor of every node along the tour direction.
    pub fn predecessors(&self) -> Vec<usize> {
        let n = self.order.len();
        let mut pred = vec![0; n];
        for k in 0..n {
            pred[self.order[k]] = self.order[(k + n - 1) % n];
        }
        pred
    }

    /// The same cycle rotated to start at node 0, oriented so the smaller of
    /// node 0's two neighbours comes second.
    pub fn canonical(&self) -> Vec<usize> {
        let n = self.order.len();
        let at = self.order.iter().position(|&v| v == 0).unwrap_or(0);
        let mut c: Vec<usize> = (0..n).map(|k| self.order[(at + k) % n]).collect();
        if n > 2 && c[n - 1] < c[1] {
            c[1..].reverse();
        }
        c
    }
}

/// Set of at most `k` distinct centres, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CenterSet {
    centers: Vec<usize>,
}

impl CenterSet {
    pub fn new(mut centers: Vec<usize>, n: usize, k: usize) -> Result<Self> {
        centers.sort_unstable();
        centers.dedup();
        if centers.is_empty() {
            return Err(invalid("empty center set"));
        }
        if centers.len() > k {
            return Err(invalid(format!("{} centers exceed k = {k}", centers.len())));
        }
        if let Some(&c) = centers.iter().find(|&&c| c >= n) {
            return Err(invalid(format!("center {c} out of range for n = {n}")));
        }
        Ok(Self { centers })
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.centers.binary_search(&v).is_ok()
    }
}

/// Total weight of the cycle, summed along its canonical representation so
/// every rotation and reflection of one cycle has bit-identical cost.
pub fn tour_cost(g: &WeightedGraph, tour: &Tour) -> Result<f64> {
    let n = g.n();
    if tour.len() != n {
        return Err(invalid(format!("tour of {} nodes on a {n}-node graph", tour.len())));
    }
    let c = tour.canonical();
    let mut total = 0.0;
    for k in 0..n {
        let (a, b) = (c[k], c[(k + 1) % n]);
        if n > 1 && !g.has_edge(a, b) {
            return Err(invalid(format!("tour uses missing edge ({a}, {b})")));
        }
        total += g.weight(a, b);
    }
    Ok(total)
}

/// Breadth-limited search over paths from `start` that visit every node.
///
/// Extending a path ending at `last` by `next` adds `step(last, next)`;
/// closing a complete path adds `close(last, start)`.
///
/// The beams are nested: the width-`w` beam at every depth is the width-`w-1`
/// beam plus the best not-yet-kept extension of the width-`w` beam one level
/// up. Width 1 is greedy, a width of at least `(n-1)!` is exhaustive, and the
/// returned score never decreases as the width grows because every beam of a
/// smaller width is contained in the larger one. Ties go to the candidate
/// whose parent entered its beam first, then to the lower node index.
pub fn beam_search(
    n: usize,
    start: usize,
    width: usize,
    step: impl Fn(usize, usize) -> f64,
    close: impl Fn(usize, usize) -> f64,
) -> Result<(Tour, f64)> {
    if width == 0 {
        return Err(invalid("beam width must be at least 1"));
    }
    if start >= n {
        return Err(invalid(format!("start {start} out of range for n = {n}")));
    }
    struct Entry {
        score: f64,
        parent: usize,
        last: usize,
        visited: Vec<u64>,
    }
    let words = n.div_ceil(64);
    let mut root = vec![0u64; words];
    root[start / 64] |= 1 << (start % 64);
    let mut layers: Vec<Vec<Entry>> = (0..n).map(|_| Vec::new()).collect();
    layers[0].push(Entry { score: 0.0, parent: usize::MAX, last: start, visited: root });
    let mut frontier: Vec<BinaryHeap<Candidate>> = (0..n).map(|_| BinaryHeap::new()).collect();
    let mut fresh: Vec<Option<usize>> = vec![None; n];
    fresh[0] = Some(0);
    for _ in 0..width {
        let mut grew = false;
        for d in 0..n - 1 {
            if let Some(i) = fresh[d].take() {
                let e = &layers[d][i];
                for next in 0..n {
                    if e.visited[next / 64] & (1 << (next % 64)) == 0 {
                        frontier[d + 1].push(Candidate { score: e.score + step(e.last, next), parent: i, next });
                    }
                }
            }
            if let Some(c) = frontier[d + 1].pop() {
                let mut visited = layers[d][c.parent].visited.clone();
                visited[c.next / 64] |= 1 << (c.next % 64);
                layers[d + 1].push(Entry { score: c.score, parent: c.parent, last: c.next, visited });
                fresh[d + 1] = Some(layers[d + 1].len() - 1);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, e) in layers[n - 1].iter().enumerate() {
        let score = if n > 1 { e.score + close(e.last, start) } else { e.score };
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, i));
        }
    }
    let (score, mut i) = best.expect("the greedy path always completes");
    let mut path = vec![0; n];
    for d in (0..n).rev() {
        let e = &layers[d][i];
        path[d] = e.last;
        i = e.parent;
    }
    Ok((Tour::new(path)?, score))
}

/// Pending extension ordered best-first: higher score, then earlier parent,
/// then lower node index.
struct Candidate {
    score: f64,
    parent: usize,
    next: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(other.parent.cmp(&self.parent))
            .then(other.next.cmp(&self.next))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Row-wise log-softmax of a row-major `n x n` matrix.
pub fn log_softmax_rows(logits: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &logits[i * n..(i + 1) * n];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        for j in 0..n {
            out[i * n + j] = row[j] - lse;
        }
    }
    out
}

/// Decodes a tour from predecessor logits: row `i` scores every node as the
/// predecessor of `i`.
pub fn beam_search_tour(pointer_logits: &[f64], n: usize, start: usize, width: usize) -> Result<Tour> {
    beam_search_tour_scored(pointer_logits, n, start, width).map(|(t, _)| t)
}

/// [`beam_search_tour`] together with the tour's total log-probability score.
pub fn beam_search_tour_scored(
    pointer_logits: &[f64],
    n: usize,
    start: usize,
    width: usize,
) -> Result<(Tour, f64)> {
    if n < 3 {
        return Err(invalid(format!("tour decoding needs n >= 3, got {n}")));
    }
    if pointer_logits.len() != n * n {
        return Err(invalid(format!("{} logits for n = {n}", pointer_logits.len())));
    }
    let logp = log_softmax_rows(pointer_logits, n);
    beam_search(n, start, width, |last, next| logp[next * n + last], |last, s| logp[s * n + last])
}

/// Score of a given tour under the decoder's scoring rule.
pub fn tour_log_score(pointer_logits: &[f64], n: usize, tour: &Tour) -> f64 {
    let logp = log_softmax_rows(pointer_logits, n);
    let o = tour.order();
    let mut s = 0.0;
    for k in 1..n {
        s += logp[o[k] * n + o[k - 1]];
    }
    s + logp[o[0] * n + o[n - 1]]
}

/// The `k` most probable nodes, ties to the lower index.
pub fn topk_centers(node_probs: &[f64], k: usize) -> Result<CenterSet> {
    let n = node_probs.len();
    if k == 0 || k > n {
        return Err(invalid(format!("k = {k} outside 1..={n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| node_probs[b].total_cmp(&node_probs[a]).then(a.cmp(&b)));
    idx.truncate(k);
    CenterSet::new(idx, n, k)
}

/// Largest distance from any node to its nearest centre, over a precomputed
/// row-major distance matrix.
pub fn vkc_objective_from_dist(dist: &[f64], n: usize, centers: &CenterSet) -> f64 {
    (0..n)
        .map(|v| {
            centers
                .centers()
                .iter()
                .map(|&c| dist[v * n + c])
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

pub fn vkc_objective(g: &WeightedGraph, centers: &CenterSet) -> Result<f64> {
    let dist = apsp_matrix(g)?;
    Ok(vkc_objective_from_dist(&dist, g.n(), centers))
}

/// `cost / optimal - 1`.
pub fn relative_error(cost: f64, optimal: f64) -> Result<f64> {
    if !(optimal > 0.0) || !cost.is_finite() {
        return Err(invalid(format!("relative error of {cost} against {optimal}")));
    }
    Ok(cost / optimal - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot_logits(tour: &[usize], margin: f64) -> Vec<f64> {
        let n = tour.len();
        let mut l = vec![0.0; n * n];
        for k in 0..n {
            let (prev, cur) = (tour[(k + n - 1) % n], tour[k]);
            l[cur * n + prev] = margin;
        }
        l
    }

    #[test]
    fn equilateral_triangle_costs_three() {
        let s3 = 3f64.sqrt() / 2.0;
        let g = WeightedGraph::from_positions(vec![[0.0, 0.0], [1.0, 0.0], [0.5, s3]]).unwrap();
        let c = tour_cost(&g, &Tour::new(vec![0, 1, 2]).unwrap()).unwrap();
        assert!((c - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_square_hull_costs_four() {
        let g = WeightedGraph::from_positions(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
            .unwrap();
        assert_eq!(tour_cost(&g, &Tour::new(vec![0, 1, 2, 3]).unwrap()).unwrap(), 4.0);
        assert_eq!(tour_cost(&g, &Tour::new(vec![2, 1, 0, 3]).unwrap()).unwrap(), 4.0);
    }

    #[test]
    fn rotations_cost_the_same_bits() {
        let mut rng = crate::Rng::new(3);
        let g = crate::graph::gen_euclidean_complete(7, &mut rng).unwrap();
        let base = tour_cost(&g, &Tour::new(vec![0, 3, 1, 6, 2, 5, 4]).unwrap()).unwrap();
        let rot = tour_cost(&g, &Tour::new(vec![6, 2, 5, 4, 0, 3, 1]).unwrap()).unwrap();
        let rev = tour_cost(&g, &Tour::new(vec![4, 5, 2, 6, 1, 3, 0]).unwrap()).unwrap();
        assert_eq!(base.to_bits(), rot.to_bits());
        assert_eq!(base.to_bits(), rev.to_bits());
    }

    #[test]
    fn tour_rejects_non_permutations() {
        assert!(Tour::new(vec![0, 0, 1]).is_err());
        assert!(Tour::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn greedy_beam_follows_one_hot_chain() {
        let tour = vec![0, 4, 2, 1, 3];
        let logits = one_hot_logits(&tour, 10.0);
        let got = beam_search_tour(&logits, 5, 0, 1).unwrap();
        assert_eq!(got.order(), tour.as_slice());
    }

    #[test]
    fn beam_rejects_tiny_graphs_and_zero_width() {
        assert!(beam_search_tour(&[0.0; 4], 2, 0, 1).is_err());
        assert!(beam_search_tour(&[0.0; 9], 3, 0, 0).is_err());
    }

    #[test]
    fn score_of_decoded_tour_matches_rescoring() {
        let n = 6;
        let logits: Vec<f64> = (0..n * n).map(|k| ((k * 7919) % 13) as f64 * 0.3).collect();
        let (tour, score) = beam_search_tour_scored(&logits, n, 2, 4).unwrap();
        assert_eq!(tour.start(), 2);
        assert_eq!(score.to_bits(), tour_log_score(&logits, n, &tour).to_bits());
    }

    #[test]
    fn topk_examples() {
        let c = topk_centers(&[0.0, 1.0, 0.0, 1.0, 0.0], 2).unwrap();
        assert_eq!(c.centers(), &[1, 3]);
        let c = topk_centers(&[0.5; 6], 3).unwrap();
        assert_eq!(c.centers(), &[0, 1, 2]);
        assert!(topk_centers(&[0.5; 3], 4).is_err());
    }

    #[test]
    fn vkc_objective_examples() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let all = CenterSet::new(vec![0, 1, 2], 3, 3).unwrap();
        assert_eq!(vkc_objective(&g, &all).unwrap(), 0.0);
        let mid = CenterSet::new(vec![1], 3, 1).unwrap();
        assert_eq!(vkc_objective(&g, &mid).unwrap(), 1.0);
    }

    #[test]
    fn center_set_limits() {
        assert!(CenterSet::new(vec![], 3, 2).is_err());
        assert!(CenterSet::new(vec![0, 1, 2], 3, 2).is_err());
        assert!(CenterSet::new(vec![5], 3, 2).is_err());
    }

    #[test]
    fn relative_error_examples() {
        assert!((relative_error(1.1, 1.0).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(relative_error(2.5, 2.5).unwrap(), 0.0);
        assert!(relative_error(1.0, 0.0).is_err());
    }
}
