//! Exact solvers used as ground truth at small sizes.

use crate::decode::{tour_cost, vkc_objective_from_dist, CenterSet, Tour};
use crate::graph::{apsp_matrix, WeightedGraph};
use crate::{invalid, CoreError, Result};

/// Largest instance [`held_karp`] accepts (`2^(n-1) * (n-1)` table).
pub const HELD_KARP_MAX_N: usize = 18;

/// Exact minimum tour by dynamic programming over subsets.
///
/// The returned tour starts at node 0; the cost is [`tour_cost`] of that
/// tour, so it compares bit-for-bit with any other tour's cost.
pub fn held_karp(g: &WeightedGraph) -> Result<(f64, Tour)> {
    let n = g.n();
    if n > HELD_KARP_MAX_N {
        return Err(CoreError::SizeLimit(format!("held_karp needs n <= {HELD_KARP_MAX_N}, got {n}")));
    }
    if n < 2 {
        return Err(invalid("a tour needs at least 2 nodes"));
    }
    if !g.is_complete() {
        return Err(invalid("held_karp expects a complete graph"));
    }
    // Node v >= 1 is bit v-1; cost[mask * m + e]: best path 0 -> ... -> e
    // through exactly the nodes in mask, with e in mask.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut cost = vec![f64::INFINITY; (full + 1) * m];
    let mut parent = vec![usize::MAX; (full + 1) * m];
    for e in 0..m {
        cost[(1 << e) * m + e] = g.weight(0, e + 1);
    }
    for mask in 1..=full {
        for e in 0..m {
            if mask & (1 << e) == 0 {
                continue;
            }
            let base = cost[mask * m + e];
            if !base.is_finite() {
                continue;
            }
            for next in 0..m {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                let c = base + g.weight(e + 1, next + 1);
                if c < cost[nm * m + next] {
                    cost[nm * m + next] = c;
                    parent[nm * m + next] = e;
                }
            }
        }
    }
    let mut best_end = 0;
    let mut best = f64::INFINITY;
    for e in 0..m {
        let c = cost[full * m + e] + g.weight(e + 1, 0);
        if c < best {
            best = c;
            best_end = e;
        }
    }
    let mut rev = Vec::with_capacity(n);
    let (mut mask, mut e) = (full, best_end);
    while e != usize::MAX {
        rev.push(e + 1);
        let p = parent[mask * m + e];
        mask &= !(1 << e);
        e = p;
    }
    rev.push(0);
    rev.reverse();
    let tour = Tour::new(rev)?;
    Ok((tour_cost(g, &tour)?, tour))
}

/// Instances [`vkc_exact`] agrees to solve.
pub fn vkc_tractable(n: usize, k: usize) -> bool {
    n <= 64 && (n <= 20 || k <= 3)
}

/// Exact vertex k-center.
///
/// The optimum is one of the pairwise shortest-path distances, so the
/// smallest feasible candidate radius is found by binary search; each
/// feasibility question ("can `k` centres cover every node within `r`?") is
/// settled by branch and bound over centre choices.
pub fn vkc_exact(g: &WeightedGraph, k: usize) -> Result<(f64, CenterSet)> {
    let n = g.n();
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if !vkc_tractable(n, k) {
        return Err(CoreError::SizeLimit(format!(
            "vkc_exact needs n <= 20 or k <= 3 (and n <= 64), got n = {n}, k = {k}"
        )));
    }
    let dist = apsp_matrix(g)?;
    if k >= n {
        let all = CenterSet::new((0..n).collect(), n, k)?;
        return Ok((0.0, all));
    }
    let mut radii: Vec<f64> = dist.clone();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let (mut lo, mut hi) = (0, radii.len() - 1);
    let mut witness = cover_with(&dist, n, k, radii[hi]).expect("one centre covers at the diameter");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match cover_with(&dist, n, k, radii[mid]) {
            Some(c) => {
                witness = c;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    let centers = CenterSet::new(witness, n, k)?;
    Ok((vkc_objective_from_dist(&dist, n, &centers), centers))
}

/// Some set of at most `k` centres covering all nodes within radius `r`.
fn cover_with(dist: &[f64], n: usize, k: usize, r: f64) -> Option<Vec<usize>> {
    let cover: Vec<u64> = (0..n)
        .map(|c| (0..n).filter(|&v| dist[c * n + v] <= r).fold(0u64, |m, v| m | 1 << v))
        .collect();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut chosen = Vec::with_capacity(k);
    search(&cover, all, k, &mut chosen).then_some(chosen)
}

fn search(cover: &[u64], uncovered: u64, left: usize, chosen: &mut Vec<usize>) -> bool {
    if uncovered == 0 {
        return true;
    }
    if left == 0 {
        return false;
    }
    let best_gain = cover.iter().map(|c| (c & uncovered).count_ones()).max().unwrap_or(0);
    if (best_gain as usize) * left < uncovered.count_ones() as usize {
        return false;
    }
    // Branch on the uncovered node with the fewest covering centres.
    let n = cover.len();
    let mut pivot_cands: Option<Vec<usize>> = None;
    for v in 0..n {
        if uncovered & (1 << v) == 0 {
            continue;
        }
        let cands: Vec<usize> = (0..n).filter(|&c| cover[c] & (1 << v) != 0).collect();
        if pivot_cands.as_ref().is_none_or(|p| cands.len() < p.len()) {
            pivot_cands = Some(cands);
        }
    }
    let cands = pivot_cands.expect("some node is uncovered");
    // Drop candidates whose useful coverage is dominated by another's.
    let useful: Vec<u64> = cands.iter().map(|&c| cover[c] & uncovered).collect();
    for (a, &ca) in cands.iter().enumerate() {
        let dominated = useful.iter().enumerate().any(|(b, &ub)| {
            b != a && useful[a] & !ub == 0 && (useful[a] != ub || b < a)
        });
        if dominated {
            continue;
        }
        chosen.push(ca);
        if search(cover, uncovered & !cover[ca], left - 1, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}
