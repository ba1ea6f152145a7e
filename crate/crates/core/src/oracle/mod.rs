//! Plaintext reference algorithms: greedy selection, an exact solver for
//! small pools, a packing validator and the greedy/exact quality ratio.

mod exact;
mod graph;
mod greedy;

pub use exact::{brute_force, exact_solve, pack_masks, EXACT_MAX_N};
pub use graph::{CyclePacking, PlainGraph};
pub use greedy::{
    evaluate_subset, greedy_literal, greedy_literal_with_subsets, greedy_solve,
    greedy_with_subsets, invert_permutation, positive_candidates, select_greedy,
    select_greedy_by, subset_order_key, Candidate,
};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("exact solver supports at most {max} pairs, got {n}")]
    TooLarge { n: usize, max: usize },
}

/// The first problem found in a packing.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("cycle {cycle} has length {len}")]
    Length { cycle: usize, len: usize },
    #[error("node {node} out of range")]
    NodeOutOfRange { node: usize },
    #[error("node {node} used more than once")]
    Overlap { node: usize },
    #[error("missing edge {from} -> {to}")]
    MissingEdge { from: usize, to: usize },
    #[error("claimed weight {claimed}, actual {actual}")]
    WeightMismatch { claimed: u64, actual: u64 },
}

/// Checks lengths, node range, disjointness, edges and the weight sum.
pub fn validate(g: &PlainGraph, p: &CyclePacking, kappa: usize) -> Result<(), Violation> {
    let mut used = vec![false; g.n()];
    let mut total = 0;
    for (ci, c) in p.cycles.iter().enumerate() {
        if c.len() < 2 || c.len() > kappa {
            return Err(Violation::Length { cycle: ci, len: c.len() });
        }
        for &x in c {
            if x >= g.n() {
                return Err(Violation::NodeOutOfRange { node: x });
            }
            if used[x] {
                return Err(Violation::Overlap { node: x });
            }
            used[x] = true;
        }
        for i in 0..c.len() {
            let (u, v) = (c[i], c[(i + 1) % c.len()]);
            if !g.has_edge(u, v) {
                return Err(Violation::MissingEdge { from: u, to: v });
            }
            total += g.weight(u, v);
        }
    }
    if total != p.total_weight {
        return Err(Violation::WeightMismatch {
            claimed: p.total_weight,
            actual: total,
        });
    }
    Ok(())
}

/// Matched pairs under greedy divided by matched pairs under the exact
/// solver; 1.0 when the exact solver matches nobody.
pub fn quality(g: &PlainGraph, kappa: usize) -> Result<f64, OracleError> {
    let exact = exact_solve(g, kappa)?;
    let greedy = greedy_solve(g, kappa, None);
    Ok(ratio(greedy.matched_pairs(), exact.matched_pairs()))
}

/// `greedy / exact`, or 1.0 when `exact` is zero.
pub fn ratio(greedy: usize, exact: usize) -> f64 {
    if exact == 0 {
        1.0
    } else {
        greedy as f64 / exact as f64
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn trap() -> PlainGraph {
        PlainGraph::from_edges(
            4,
            &[(0, 1, 1), (1, 0, 1), (2, 3, 1), (3, 2, 1), (0, 2, 1), (3, 0, 1)],
        )
    }

    #[test]
    fn trap_quality_is_three_quarters() {
        assert_eq!(quality(&trap(), 3).unwrap(), 0.75);
        let g = PlainGraph::from_edges(2, &[(0, 1, 1), (1, 0, 1)]);
        assert_eq!(quality(&g, 3).unwrap(), 1.0);
        assert_eq!(quality(&PlainGraph::empty(4), 3).unwrap(), 1.0);
    }

    #[test]
    fn violations_are_reported() {
        let g = trap();
        let overlap = CyclePacking {
            cycles: vec![vec![0, 1], vec![1, 0]],
            total_weight: 4,
        };
        assert_eq!(validate(&g, &overlap, 3), Err(Violation::Overlap { node: 1 }));
        let missing = CyclePacking {
            cycles: vec![vec![0, 3, 2]],
            total_weight: 3,
        };
        assert!(matches!(
            validate(&g, &missing, 3),
            Err(Violation::MissingEdge { .. })
        ));
        let long = CyclePacking {
            cycles: vec![vec![0, 2, 3]],
            total_weight: 3,
        };
        assert!(matches!(validate(&g, &long, 2), Err(Violation::Length { .. })));
        let wrong = CyclePacking {
            cycles: vec![vec![0, 1]],
            total_weight: 5,
        };
        assert!(matches!(
            validate(&g, &wrong, 2),
            Err(Violation::WeightMismatch { .. })
        ));
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = PlainGraph> {
        (0..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(proptest::option::weighted(0.35, 1u64..8), n * n).prop_map(
                move |cells| {
                    let mut g = PlainGraph::empty(n);
                    for (idx, c) in cells.into_iter().enumerate() {
                        if let Some(w) = c {
                            g.set_edge(idx / n, idx % n, w);
                        }
                    }
                    g
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn greedy_is_valid_and_within_ratio(g in arb_graph(14)) {
            for kappa in [2usize, 3] {
                let gr = greedy_solve(&g, kappa, None);
                prop_assert!(validate(&g, &gr, kappa).is_ok());
                let ex = exact_solve(&g, kappa).unwrap();
                prop_assert!(validate(&g, &ex, kappa).is_ok());
                prop_assert!(ex.total_weight >= gr.total_weight);
                prop_assert!(kappa as u64 * gr.total_weight >= ex.total_weight);
            }
        }

        #[test]
        fn greedy_is_deterministic(g in arb_graph(10), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm: Vec<usize> = (0..g.n()).collect();
            perm.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
            let a = greedy_solve(&g, 3, Some(&perm));
            let b = greedy_solve(&g, 3, Some(&perm));
            prop_assert!(validate(&g, &a, 3).is_ok());
            prop_assert_eq!(a, b);
        }
    }
}
