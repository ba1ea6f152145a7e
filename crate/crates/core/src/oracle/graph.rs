use serde::{Deserialize, Serialize};

/// Plaintext compatibility graph: `m(i, j)` is true when the donor of pair
/// `i` can give to the patient of pair `j`; `w(i, j)` is the edge weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlainGraph {
    n: usize,
    m: Vec<bool>,
    w: Vec<u64>,
}

impl PlainGraph {
    pub fn empty(n: usize) -> Self {
        PlainGraph {
            n,
            m: vec![false; n * n],
            w: vec![0; n * n],
        }
    }

    /// Builds a graph from weighted directed edges. Self loops are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize, u64)]) -> Self {
        let mut g = PlainGraph::empty(n);
        for &(u, v, w) in edges {
            g.set_edge(u, v, w);
        }
        g
    }

    /// Builds a graph from dense row-major matrices; the diagonal is cleared.
    pub fn from_matrices(n: usize, m: Vec<bool>, w: Vec<u64>) -> Self {
        assert_eq!(m.len(), n * n);
        assert_eq!(w.len(), n * n);
        let mut g = PlainGraph { n, m, w };
        for i in 0..n {
            g.m[i * n + i] = false;
            g.w[i * n + i] = 0;
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.m[u * self.n + v]
    }

    pub fn weight(&self, u: usize, v: usize) -> u64 {
        self.w[u * self.n + v]
    }

    /// Weight of the edge, or zero when it does not exist.
    pub fn masked_weight(&self, u: usize, v: usize) -> u64 {
        if self.has_edge(u, v) {
            self.weight(u, v)
        } else {
            0
        }
    }

    pub fn set_edge(&mut self, u: usize, v: usize, w: u64) {
        if u == v {
            return;
        }
        self.m[u * self.n + v] = true;
        self.w[u * self.n + v] = w;
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) {
        self.m[u * self.n + v] = false;
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.n).flat_map(move |u| {
            (0..self.n)
                .filter(move |&v| self.has_edge(u, v))
                .map(move |v| (u, v, self.weight(u, v)))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.m.iter().filter(|&&b| b).count()
    }

    pub fn successors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&v| self.has_edge(u, v))
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.m
    }

    pub fn weights(&self) -> &[u64] {
        &self.w
    }

    /// The graph with node `i` renamed `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> PlainGraph {
        let mut g = PlainGraph::empty(self.n);
        for (u, v, w) in self.edges() {
            g.set_edge(perm[u], perm[v], w);
        }
        for u in 0..self.n {
            for v in 0..self.n {
                g.w[perm[u] * self.n + perm[v]] = self.w[u * self.n + v];
            }
        }
        g
    }

    /// The subgraph induced by `nodes`, relabeled `0..nodes.len()` in the
    /// given order.
    pub fn induced(&self, nodes: &[usize]) -> PlainGraph {
        let k = nodes.len();
        let mut g = PlainGraph::empty(k);
        for (a, &u) in nodes.iter().enumerate() {
            for (b, &v) in nodes.iter().enumerate() {
                if self.has_edge(u, v) {
                    g.set_edge(a, b, self.weight(u, v));
                }
            }
        }
        g
    }

    /// Weight of a closed cycle `c[0] -> c[1] -> ... -> c[0]`, or `None`
    /// if an edge is missing.
    pub fn cycle_weight(&self, cycle: &[usize]) -> Option<u64> {
        let mut total = 0;
        for i in 0..cycle.len() {
            let (u, v) = (cycle[i], cycle[(i + 1) % cycle.len()]);
            if !self.has_edge(u, v) {
                return None;
            }
            total += self.weight(u, v);
        }
        Some(total)
    }
}

/// A set of exchange cycles. Each cycle lists pairs in donation order:
/// the donor of `c[i]` gives to the patient of `c[i + 1]`, wrapping around.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclePacking {
    pub cycles: Vec<Vec<usize>>,
    pub total_weight: u64,
}

impl CyclePacking {
    pub fn matched_pairs(&self) -> usize {
        self.cycles.iter().map(Vec::len).sum()
    }

    /// Cycles rotated to start at their smallest node and sorted, so two
    /// packings of the same cycles compare equal.
    pub fn canonical(&self) -> CyclePacking {
        let mut cycles: Vec<Vec<usize>> = self
            .cycles
            .iter()
            .map(|c| {
                let pos = c
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &v)| v)
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                let mut r = c.clone();
                r.rotate_left(pos);
                r
            })
            .collect();
        cycles.sort();
        CyclePacking {
            cycles,
            total_weight: self.total_weight,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_moves_rows_and_columns() {
        let g = PlainGraph::from_edges(3, &[(0, 1, 5), (1, 2, 7)]);
        let h = g.relabel(&[2, 0, 1]);
        assert!(h.has_edge(2, 0) && h.has_edge(0, 1));
        assert_eq!(h.weight(2, 0), 5);
        assert_eq!(h.edge_count(), 2);
    }

    #[test]
    fn cycle_weight_requires_every_edge() {
        let g = PlainGraph::from_edges(3, &[(0, 1, 1), (1, 2, 2), (2, 0, 3)]);
        assert_eq!(g.cycle_weight(&[0, 1, 2]), Some(6));
        assert_eq!(g.cycle_weight(&[0, 2, 1]), None);
    }

    #[test]
    fn canonical_rotation() {
        let p = CyclePacking {
            cycles: vec![vec![4, 3], vec![2, 0, 1]],
            total_weight: 0,
        };
        assert_eq!(p.canonical().cycles, vec![vec![0, 1, 2], vec![3, 4]]);
    }
}
