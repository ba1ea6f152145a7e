//! Plaintext greedy cycle selection, mirroring the secure protocol step by
//! step: subsets in public order, both orientations of a triple evaluated,
//! repeated first-maximum selection.

use super::{CyclePacking, PlainGraph};
use crate::protocol::subsets::PublicSubsets;

/// Weight and chosen cycle of one candidate subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub subset: [usize; 3],
    pub cycle: Vec<usize>,
    pub weight: u64,
}

/// Weight of a subset and its cycle orientation, as the evaluation phase
/// computes them: zero when no orientation closes, and the first
/// orientation unless the second is strictly heavier.
pub fn evaluate_subset(g: &PlainGraph, subset: [usize; 3]) -> Candidate {
    let n = g.n();
    let [u, v, w] = subset;
    if w == n {
        let weight = if g.has_edge(u, v) && g.has_edge(v, u) {
            g.weight(u, v) + g.weight(v, u)
        } else {
            0
        };
        return Candidate {
            subset,
            cycle: vec![u, v],
            weight,
        };
    }
    let first = g.cycle_weight(&[u, v, w]).unwrap_or(0);
    let second = g.cycle_weight(&[u, w, v]).unwrap_or(0);
    if second > first {
        Candidate {
            subset,
            cycle: vec![u, w, v],
            weight: second,
        }
    } else {
        Candidate {
            subset,
            cycle: vec![u, v, w],
            weight: first,
        }
    }
}

/// Greedy packing. With `shuffle`, node `i` is renamed `shuffle[i]` before
/// the subsets are ordered, and the result is reported in the original
/// labels.
pub fn greedy_solve(g: &PlainGraph, kappa: usize, shuffle: Option<&[usize]>) -> CyclePacking {
    match shuffle {
        None => greedy_sparse(g, kappa),
        Some(perm) => {
            let inv = invert_permutation(perm);
            let packing = greedy_sparse(&g.relabel(perm), kappa);
            relabel_packing(&packing, &inv)
        }
    }
}

/// Greedy over an explicit (possibly publicly shuffled) subset list.
pub fn greedy_with_subsets(g: &PlainGraph, subsets: &PublicSubsets) -> CyclePacking {
    let cands = positive_candidates(g, subsets.kappa());
    select_greedy_by(cands, g.n(), |s| subsets.position(s).expect("subset in list"))
}

/// Dense form: evaluates every subset, then runs exactly `floor(N/2)`
/// selection rounds, zeroing overlapping subsets after each. Quadratic in
/// `|S|`; used to cross-check [`greedy_solve`].
pub fn greedy_literal(g: &PlainGraph, kappa: usize) -> CyclePacking {
    greedy_literal_with_subsets(g, &PublicSubsets::build(g.n(), kappa))
}

/// [`greedy_literal`] over an explicit subset list.
pub fn greedy_literal_with_subsets(g: &PlainGraph, subsets: &PublicSubsets) -> CyclePacking {
    let mut cands: Vec<Candidate> = subsets
        .nodes()
        .iter()
        .map(|&s| evaluate_subset(g, s))
        .collect();
    let mut packing = CyclePacking::default();
    for _ in 0..g.n() / 2 {
        let max = cands.iter().map(|c| c.weight).max().unwrap_or(0);
        if max == 0 {
            continue;
        }
        let pick = cands.iter().position(|c| c.weight == max).unwrap();
        let chosen = cands[pick].clone();
        packing.total_weight += chosen.weight;
        for c in cands.iter_mut() {
            if c.cycle.iter().any(|x| chosen.cycle.contains(x)) {
                c.weight = 0;
            }
        }
        packing.cycles.push(chosen.cycle);
    }
    packing
}

/// Candidates with positive weight, found from the adjacency structure
/// rather than by scanning every subset.
pub fn positive_candidates(g: &PlainGraph, kappa: usize) -> Vec<Candidate> {
    let n = g.n();
    let succ: Vec<Vec<usize>> = (0..n).map(|u| g.successors(u).collect()).collect();
    let mut out = Vec::new();
    if kappa >= 3 {
        let mut seen = std::collections::BTreeSet::new();
        for u in 0..n {
            for &v in &succ[u] {
                if v <= u {
                    continue;
                }
                for &w in &succ[v] {
                    if w <= u || w == v || !g.has_edge(w, u) {
                        continue;
                    }
                    let subset = [u, v.min(w), v.max(w)];
                    if seen.insert(subset) {
                        let c = evaluate_subset(g, subset);
                        if c.weight > 0 {
                            out.push(c);
                        }
                    }
                }
            }
        }
    }
    for u in 0..n {
        for &v in &succ[u] {
            if v > u && g.has_edge(v, u) {
                let c = evaluate_subset(g, [u, v, n]);
                if c.weight > 0 {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Greedy selection over candidates: heaviest first, earlier subsets in
/// the canonical public order winning ties.
pub fn select_greedy(cands: Vec<Candidate>, n: usize) -> CyclePacking {
    select_greedy_by(cands, n, |s| subset_order_key(s, n))
}

/// Greedy selection with ties broken by the smallest `rank(subset)`.
pub fn select_greedy_by<K: Ord>(
    mut cands: Vec<Candidate>,
    n: usize,
    rank: impl Fn([usize; 3]) -> K,
) -> CyclePacking {
    cands.sort_by(|a, b| b.weight.cmp(&a.weight).then_with(|| rank(a.subset).cmp(&rank(b.subset))));
    let mut used = vec![false; n];
    let mut packing = CyclePacking::default();
    for c in cands {
        if c.cycle.iter().any(|&x| used[x]) {
            continue;
        }
        for &x in &c.cycle {
            used[x] = true;
        }
        packing.total_weight += c.weight;
        packing.cycles.push(c.cycle);
    }
    packing
}

/// Sort key reproducing the public subset order: triples before pairs,
/// lexicographic within each block.
pub fn subset_order_key(subset: [usize; 3], n: usize) -> (bool, [usize; 3]) {
    (subset[2] == n, subset)
}

fn greedy_sparse(g: &PlainGraph, kappa: usize) -> CyclePacking {
    select_greedy(positive_candidates(g, kappa), g.n())
}

/// Inverse of a permutation given as `perm[i] = image of i`.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

fn relabel_packing(p: &CyclePacking, map: &[usize]) -> CyclePacking {
    CyclePacking {
        cycles: p
            .cycles
            .iter()
            .map(|c| c.iter().map(|&x| map[x]).collect())
            .collect(),
        total_weight: p.total_weight,
    }
}

#[cfg(test)]
mod tests {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use super::*;

    fn complete(n: usize) -> PlainGraph {
        let mut g = PlainGraph::empty(n);
        for u in 0..n {
            for v in 0..n {
                g.set_edge(u, v, 1);
            }
        }
        g
    }

    fn random_graph(rng: &mut StdRng, n: usize, p: f64, wmax: u64) -> PlainGraph {
        let mut g = PlainGraph::empty(n);
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random_bool(p) {
                    g.set_edge(u, v, rng.random_range(1..=wmax));
                }
            }
        }
        g
    }

    #[test]
    fn complete_three_prefers_the_triangle() {
        let p = greedy_solve(&complete(3), 3, None);
        assert_eq!(p.cycles, vec![vec![0, 1, 2]]);
        assert_eq!(p.total_weight, 3);
    }

    #[test]
    fn two_disjoint_swaps() {
        let g = PlainGraph::from_edges(4, &[(0, 1, 1), (1, 0, 1), (2, 3, 1), (3, 2, 1)]);
        let p = greedy_solve(&g, 3, None);
        assert_eq!(p.cycles, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(p.total_weight, 4);
    }

    #[test]
    fn empty_graph() {
        assert_eq!(greedy_solve(&PlainGraph::empty(5), 3, None), CyclePacking::default());
    }

    #[test]
    fn second_orientation_wins_only_when_heavier() {
        let g = PlainGraph::from_edges(
            3,
            &[(0, 1, 1), (1, 2, 1), (2, 0, 1), (0, 2, 1), (2, 1, 1), (1, 0, 1)],
        );
        assert_eq!(evaluate_subset(&g, [0, 1, 2]).cycle, vec![0, 1, 2]);
        let g = PlainGraph::from_edges(3, &[(0, 2, 1), (2, 1, 1), (1, 0, 1)]);
        assert_eq!(evaluate_subset(&g, [0, 1, 2]).cycle, vec![0, 2, 1]);
    }

    #[test]
    fn sparse_matches_literal() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(0..12);
            let p = rng.random_range(0.05..0.6);
            let g = random_graph(&mut rng, n, p, 4);
            for kappa in [2, 3] {
                assert_eq!(greedy_solve(&g, kappa, None), greedy_literal(&g, kappa));
            }
        }
    }

    #[test]
    fn shuffle_reports_original_labels() {
        let g = PlainGraph::from_edges(4, &[(0, 1, 1), (1, 0, 1)]);
        let p = greedy_solve(&g, 3, Some(&[3, 2, 1, 0]));
        assert_eq!(p.canonical().cycles, vec![vec![0, 1]]);
    }

    #[test]
    fn shuffled_order_matches_literal() {
        let mut rng = StdRng::seed_from_u64(12);
        for seed in 0..100 {
            let n = rng.random_range(2..10);
            let g = random_graph(&mut rng, n, 0.5, 1);
            let subsets = PublicSubsets::shuffled(n, 3, seed);
            assert_eq!(
                greedy_with_subsets(&g, &subsets),
                greedy_literal_with_subsets(&g, &subsets)
            );
        }
    }
}
