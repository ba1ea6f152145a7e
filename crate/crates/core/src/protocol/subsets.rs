//! The public, ordered list of candidate node subsets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// All size-3 subsets in lexicographic order, then all size-2 subsets in
/// lexicographic order. A size-2 subset `{u, v}` is stored as `(u, v, N)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicSubsets {
    n: usize,
    kappa: usize,
    nodes: Vec<[usize; 3]>,
    /// For a publicly shuffled list, `rank[canonical position]`.
    rank: Option<Vec<usize>>,
}

impl PublicSubsets {
    /// Enumerates the subsets for `n` pairs and maximum cycle length
    /// `kappa` (2 or 3).
    pub fn build(n: usize, kappa: usize) -> Self {
        assert!(kappa == 2 || kappa == 3, "cycle length bound must be 2 or 3");
        let mut nodes = Vec::with_capacity(subset_count(n, kappa));
        if kappa == 3 {
            for u in 0..n {
                for v in u + 1..n {
                    for w in v + 1..n {
                        nodes.push([u, v, w]);
                    }
                }
            }
        }
        for u in 0..n {
            for v in u + 1..n {
                nodes.push([u, v, n]);
            }
        }
        PublicSubsets {
            n,
            kappa,
            nodes,
            rank: None,
        }
    }

    /// The same subsets in a public pseudo-random order derived from
    /// `seed`, so ties between equal-weight subsets are broken at random.
    pub fn shuffled(n: usize, kappa: usize, seed: u64) -> Self {
        let canonical = PublicSubsets::build(n, kappa);
        let mut order: Vec<usize> = (0..canonical.len()).collect();
        order.shuffle(&mut ChaCha12Rng::seed_from_u64(seed));
        let mut rank = vec![0; order.len()];
        for (pos, &c) in order.iter().enumerate() {
            rank[c] = pos;
        }
        PublicSubsets {
            n,
            kappa,
            nodes: order.iter().map(|&c| canonical.nodes[c]).collect(),
            rank: Some(rank),
        }
    }

    pub fn is_shuffled(&self) -> bool {
        self.rank.is_some()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of pairs; also the dummy node id.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn nodes(&self) -> &[[usize; 3]] {
        &self.nodes
    }

    pub fn get(&self, i: usize) -> [usize; 3] {
        self.nodes[i]
    }

    /// Position of a subset in the list, if present. Size-2 subsets are
    /// given as `(u, v, N)`.
    pub fn position(&self, subset: [usize; 3]) -> Option<usize> {
        let canonical = self.canonical_position(subset)?;
        Some(match &self.rank {
            Some(rank) => rank[canonical],
            None => canonical,
        })
    }

    fn canonical_position(&self, subset: [usize; 3]) -> Option<usize> {
        let [u, v, w] = subset;
        let n = self.n;
        if !(u < v && v < n && (w == n || (v < w && w < n))) {
            return None;
        }
        if w == n {
            let offset = if self.kappa == 3 { binom(n, 3) } else { 0 };
            // Pairs (a, b) with a < u come first.
            let before: usize = (0..u).map(|a| n - 1 - a).sum();
            Some(offset + before + (v - u - 1))
        } else if self.kappa == 3 {
            let mut before = 0;
            for a in 0..u {
                before += binom(n - 1 - a, 2);
            }
            for b in u + 1..v {
                before += n - 1 - b;
            }
            Some(before + (w - v - 1))
        } else {
            None
        }
    }
}

/// Binomial coefficient for small arguments.
pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `|S|` by the closed formula.
pub fn subset_count(n: usize, kappa: usize) -> usize {
    (2..=kappa).map(|i| binom(n, i)).sum()
}
