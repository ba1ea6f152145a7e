//! Tree reduction returning the first subset of maximum positive weight.

use super::{gt_batch, select_batch, GateError, Result};
use crate::abb::{Session, Share};

/// Candidate subsets: index, three node ids (a size-2 subset carries the
/// dummy node `N` third) and weight.
#[derive(Debug, Clone, Default)]
pub struct SubsetEncoding {
    pub indices: Vec<Share>,
    pub nodes: Vec<[Share; 3]>,
    pub weights: Vec<Share>,
}

impl SubsetEncoding {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MaxWeightOutput {
    pub index: Share,
    pub nodes: [Share; 3],
}

/// Finds the lowest-index subset among those of maximal weight, provided
/// that weight is positive; otherwise returns index `s_size` with nodes
/// `(n_nodes, n_nodes, n_nodes)`.
///
/// Each level compares neighbours with `weights(2i) + 1 > weights(2i+1)`,
/// so ties keep the earlier subset. Weights must stay below `2^bits - 1`.
pub fn max_weight_set(
    s: &mut Session,
    enc: &SubsetEncoding,
    s_size: usize,
    n_nodes: usize,
    bits: u32,
) -> Result<MaxWeightOutput> {
    let n = enc.len();
    if n == 0 || enc.nodes.len() != n || enc.weights.len() != n {
        return Err(GateError::Size(format!(
            "subset encoding with {} indices, {} node rows, {} weights",
            n,
            enc.nodes.len(),
            enc.weights.len()
        )));
    }
    let mut idx = enc.indices.clone();
    let mut nodes = enc.nodes.clone();
    let mut w = enc.weights.clone();

    while idx.len() > 1 {
        let half = idx.len() / 2;
        let lhs: Vec<Share> = (0..half).map(|i| s.add_public(w[2 * i], 1)).collect();
        let rhs: Vec<Share> = (0..half).map(|i| w[2 * i + 1]).collect();
        let first = gt_batch(s, &lhs, &rhs, bits)?;

        // Five selects per pair, one round: index, three nodes, weight.
        let mut z = Vec::with_capacity(5 * half);
        let mut x = Vec::with_capacity(5 * half);
        let mut y = Vec::with_capacity(5 * half);
        for i in 0..half {
            let (a, b) = (2 * i, 2 * i + 1);
            let cand_a = [idx[a], nodes[a][0], nodes[a][1], nodes[a][2], w[a]];
            let cand_b = [idx[b], nodes[b][0], nodes[b][1], nodes[b][2], w[b]];
            for t in 0..5 {
                z.push(first[i]);
                x.push(cand_a[t]);
                y.push(cand_b[t]);
            }
        }
        let sel = select_batch(s, &z, &x, &y)?;
        let odd = idx.len() % 2 == 1;
        let tail = odd.then(|| (idx[idx.len() - 1], nodes[nodes.len() - 1], w[w.len() - 1]));
        idx = (0..half).map(|i| sel[5 * i]).collect();
        nodes = (0..half)
            .map(|i| [sel[5 * i + 1], sel[5 * i + 2], sel[5 * i + 3]])
            .collect();
        w = (0..half).map(|i| sel[5 * i + 4]).collect();
        if let Some((ti, tn, tw)) = tail {
            idx.push(ti);
            nodes.push(tn);
            w.push(tw);
        }
    }

    let valid = gt_batch(s, &w[..1], &[Share::ZERO], bits)?[0];
    let dummy_idx = s.public(s_size as u64);
    let dummy_node = s.public(n_nodes as u64);
    let z = [valid; 4];
    let x = [idx[0], nodes[0][0], nodes[0][1], nodes[0][2]];
    let y = [dummy_idx, dummy_node, dummy_node, dummy_node];
    let out = select_batch(s, &z, &x, &y)?;
    Ok(MaxWeightOutput {
        index: out[0],
        nodes: [out[1], out[2], out[3]],
    })
}

#[cfg(test)]
mod tests {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::abb::{run_local, Ring, SeedSource};
    use crate::transport::PeerId;

    /// Plaintext reference: lowest index among the maximal positive weights.
    fn oracle(weights: &[u64]) -> Option<usize> {
        let max = *weights.iter().max()?;
        if max == 0 {
            return None;
        }
        weights.iter().position(|&w| w == max)
    }

    fn run(weights: &[u64], n_nodes: usize, s_size: usize, seed: u64) -> (u64, [u64; 3]) {
        let len = weights.len();
        let p0 = PeerId::new(0).unwrap();
        let out = run_local(Ring::default(), SeedSource::Fixed(seed), |s| {
            let me = s.me();
            let w = s.input(p0, (me == p0).then_some(weights), len)?;
            let enc = SubsetEncoding {
                indices: (0..len).map(|i| s.public(i as u64)).collect(),
                nodes: (0..len)
                    .map(|i| {
                        [
                            s.public((i % n_nodes) as u64),
                            s.public(((i + 1) % n_nodes) as u64),
                            s.public(((i + 2) % n_nodes) as u64),
                        ]
                    })
                    .collect(),
                weights: w,
            };
            let r = max_weight_set(s, &enc, s_size, n_nodes, 22)?;
            let opened = s.open_batch(&[r.index, r.nodes[0], r.nodes[1], r.nodes[2]])?;
            Ok((opened[0], [opened[1], opened[2], opened[3]]))
        })
        .unwrap();
        out[0]
    }

    #[test]
    fn ties_keep_the_lowest_index() {
        assert_eq!(run(&[2, 5, 5, 0], 6, 4, 1).0, 1);
    }

    #[test]
    fn all_zero_returns_dummy() {
        assert_eq!(run(&[0; 35], 6, 35, 2), (35, [6, 6, 6]));
    }

    #[test]
    fn single_subset_base_case() {
        assert_eq!(run(&[7], 4, 1, 3), (0, [0, 1, 2]));
        assert_eq!(run(&[0], 4, 1, 3), (1, [4, 4, 4]));
    }

    #[test]
    fn all_lengths_match_oracle() {
        let mut rng = StdRng::seed_from_u64(4);
        for len in 1..=64usize {
            let weights: Vec<u64> = (0..len)
                .map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(0..6) })
                .collect();
            let (idx, nodes) = run(&weights, 9, len, len as u64);
            match oracle(&weights) {
                Some(i) => {
                    assert_eq!(idx, i as u64, "len {len} {weights:?}");
                    assert_eq!(nodes[0], (i % 9) as u64);
                }
                None => assert_eq!((idx, nodes), (len as u64, [9, 9, 9])),
            }
        }
    }
}
