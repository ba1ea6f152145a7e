//! Exact maximum-weight cycle packing by dynamic programming over node
//! subsets, plus an exhaustive enumerator used to check it.

use super::{CyclePacking, OracleError, PlainGraph};

/// Largest pool the bitmask program accepts.
pub const EXACT_MAX_N: usize = 22;

/// Best cycle over each node set of size 2..=kappa, keyed by its lowest node.
fn cycles_by_min_node(g: &PlainGraph, kappa: usize) -> Vec<Vec<(u32, u64, Vec<usize>)>> {
    let n = g.n();
    let mut by_min = vec![Vec::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            if let Some(w) = g.cycle_weight(&[u, v]) {
                by_min[u].push(((1 << u) | (1 << v), w, vec![u, v]));
            }
            if kappa >= 3 {
                for w in v + 1..n {
                    let a = g.cycle_weight(&[u, v, w]);
                    let b = g.cycle_weight(&[u, w, v]);
                    let best = match (a, b) {
                        (Some(x), Some(y)) if y > x => Some((y, vec![u, w, v])),
                        (Some(x), _) => Some((x, vec![u, v, w])),
                        (None, Some(y)) => Some((y, vec![u, w, v])),
                        (None, None) => None,
                    };
                    if let Some((wt, c)) = best {
                        by_min[u].push(((1 << u) | (1 << v) | (1 << w), wt, c));
                    }
                }
            }
        }
    }
    by_min
}

/// A maximum-total-weight packing of vertex-disjoint cycles of length
/// `2..=kappa`.
pub fn exact_solve(g: &PlainGraph, kappa: usize) -> Result<CyclePacking, OracleError> {
    let n = g.n();
    if n > EXACT_MAX_N {
        return Err(OracleError::TooLarge { n, max: EXACT_MAX_N });
    }
    let mut masks = Vec::new();
    let mut cycles = Vec::new();
    for list in cycles_by_min_node(g, kappa) {
        for (m, w, c) in list {
            masks.push((m, w));
            cycles.push(c);
        }
    }
    let (total, chosen) = pack_masks(n, &masks)?;
    Ok(CyclePacking {
        cycles: chosen.into_iter().map(|i| cycles[i].clone()).collect(),
        total_weight: total,
    })
}

/// Maximum-weight selection of pairwise disjoint node sets over `n <= 22`
/// nodes, each given as a bitmask with a weight. Returns the best total and
/// the chosen set indices.
pub fn pack_masks(n: usize, sets: &[(u32, u64)]) -> Result<(u64, Vec<usize>), OracleError> {
    if n > EXACT_MAX_N {
        return Err(OracleError::TooLarge { n, max: EXACT_MAX_N });
    }
    let mut by_min: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(m, _)) in sets.iter().enumerate() {
        if m != 0 {
            by_min[m.trailing_zeros() as usize].push(i);
        }
    }
    let full: u32 = ((1u64 << n) - 1) as u32;
    // best[mask]: best weight over the nodes outside `mask`, where every
    // node below the lowest free node is in `mask`.
    let mut best: Vec<u64> = vec![u64::MAX; 1usize << n];
    fn solve(mask: u32, full: u32, sets: &[(u32, u64)], by_min: &[Vec<usize>], best: &mut [u64]) -> u64 {
        if mask == full {
            return 0;
        }
        if best[mask as usize] != u64::MAX {
            return best[mask as usize];
        }
        let u = (!mask).trailing_zeros() as usize;
        let mut value = solve(mask | (1 << u), full, sets, by_min, best);
        for &i in &by_min[u] {
            let (cm, w) = sets[i];
            if cm & mask == 0 {
                value = value.max(w + solve(mask | cm, full, sets, by_min, best));
            }
        }
        best[mask as usize] = value;
        value
    }
    let total = solve(0, full, sets, &by_min, &mut best);

    let mut chosen = Vec::new();
    let mut mask = 0u32;
    while mask != full {
        let u = (!mask).trailing_zeros() as usize;
        let here = solve(mask, full, sets, &by_min, &mut best);
        let skip = solve(mask | (1 << u), full, sets, &by_min, &mut best);
        let pick = if here == skip {
            None
        } else {
            by_min[u].iter().copied().find(|&i| {
                let (cm, w) = sets[i];
                cm & mask == 0 && w + solve(mask | cm, full, sets, &by_min, &mut best) == here
            })
        };
        match pick {
            Some(i) => {
                chosen.push(i);
                mask |= sets[i].0;
            }
            None => mask |= 1 << u,
        }
    }
    Ok((total, chosen))
}

/// Enumerates every set of disjoint cycles (each orientation separately).
/// Exponential; for checking on tiny graphs.
pub fn brute_force(g: &PlainGraph, kappa: usize) -> u64 {
    let n = g.n();
    let mut cycles: Vec<(u32, u64)> = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if v == u {
                continue;
            }
            if u < v {
                if let Some(w) = g.cycle_weight(&[u, v]) {
                    cycles.push(((1 << u) | (1 << v), w));
                }
            }
            if kappa >= 3 {
                for w in 0..n {
                    // Each directed triangle once, starting at its lowest node.
                    if w == u || w == v || u > v || u > w {
                        continue;
                    }
                    if let Some(wt) = g.cycle_weight(&[u, v, w]) {
                        cycles.push(((1 << u) | (1 << v) | (1 << w), wt));
                    }
                }
            }
        }
    }
    fn rec(i: usize, used: u32, cycles: &[(u32, u64)]) -> u64 {
        if i == cycles.len() {
            return 0;
        }
        let skip = rec(i + 1, used, cycles);
        let (m, w) = cycles[i];
        if m & used == 0 {
            skip.max(w + rec(i + 1, used | m, cycles))
        } else {
            skip
        }
    }
    rec(0, 0, &cycles)
}
