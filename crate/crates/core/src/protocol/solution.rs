use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abb::{reconstruct, Ring, Share};
use crate::oracle::{CyclePacking, PlainGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolutionError {
    #[error("donor and recipient vectors have lengths {donor} and {recipient}")]
    Length { donor: usize, recipient: usize },
    #[error("pair {pair}: index {index} out of range")]
    OutOfRange { pair: usize, index: u64 },
    #[error("pair {pair}: donor and recipient disagree")]
    Inconsistent { pair: usize },
    #[error("cycle through pair {pair} has length {len}, allowed 2..={kappa}")]
    CycleLength { pair: usize, len: usize, kappa: usize },
    #[error("pair {from} gives to {to} without a compatible edge")]
    MissingEdge { from: usize, to: usize },
    #[error("share components disagree at pair {pair}")]
    Corrupt { pair: usize },
}

/// Protocol output: for pair `i`, `donor[i]` is the 1-based index of the
/// pair whose donor gives to patient `i`, and `recipient[i]` the 1-based
/// index of the pair whose patient receives donor `i`'s kidney. Zero means
/// unmatched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeSolution {
    pub donor: Vec<u64>,
    pub recipient: Vec<u64>,
}

impl ExchangeSolution {
    pub fn unmatched(n: usize) -> Self {
        ExchangeSolution {
            donor: vec![0; n],
            recipient: vec![0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.donor.len()
    }

    pub fn from_packing(n: usize, p: &CyclePacking) -> Self {
        let mut sol = ExchangeSolution::unmatched(n);
        for c in &p.cycles {
            for i in 0..c.len() {
                let (u, v) = (c[i], c[(i + 1) % c.len()]);
                sol.recipient[u] = v as u64 + 1;
                sol.donor[v] = u as u64 + 1;
            }
        }
        sol
    }

    pub fn matched_pairs(&self) -> usize {
        self.recipient.iter().filter(|&&r| r != 0).count()
    }

    /// Decomposes the solution into cycles, checking that the donor and
    /// recipient vectors describe the same permutation on matched pairs.
    pub fn cycles(&self, kappa: usize) -> Result<Vec<Vec<usize>>, SolutionError> {
        let n = self.n();
        if self.recipient.len() != n {
            return Err(SolutionError::Length {
                donor: n,
                recipient: self.recipient.len(),
            });
        }
        for i in 0..n {
            for idx in [self.donor[i], self.recipient[i]] {
                if idx > n as u64 {
                    return Err(SolutionError::OutOfRange { pair: i, index: idx });
                }
            }
            let r = self.recipient[i];
            if r != 0 && self.donor[r as usize - 1] != i as u64 + 1 {
                return Err(SolutionError::Inconsistent { pair: i });
            }
            if (self.donor[i] == 0) != (r == 0) {
                return Err(SolutionError::Inconsistent { pair: i });
            }
        }
        let mut seen = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if seen[start] || self.recipient[start] == 0 {
                continue;
            }
            let mut c = vec![start];
            seen[start] = true;
            let mut cur = self.recipient[start] as usize - 1;
            while cur != start {
                if seen[cur] || c.len() > kappa {
                    return Err(SolutionError::CycleLength {
                        pair: start,
                        len: c.len() + 1,
                        kappa,
                    });
                }
                seen[cur] = true;
                c.push(cur);
                cur = self.recipient[cur] as usize - 1;
            }
            if c.len() < 2 || c.len() > kappa {
                return Err(SolutionError::CycleLength {
                    pair: start,
                    len: c.len(),
                    kappa,
                });
            }
            cycles.push(c);
        }
        Ok(cycles)
    }

    /// The packing this solution describes, checked against `g`.
    pub fn to_packing(&self, g: &PlainGraph, kappa: usize) -> Result<CyclePacking, SolutionError> {
        let cycles = self.cycles(kappa)?;
        let mut total = 0;
        for c in &cycles {
            for i in 0..c.len() {
                let (u, v) = (c[i], c[(i + 1) % c.len()]);
                if !g.has_edge(u, v) {
                    return Err(SolutionError::MissingEdge { from: u, to: v });
                }
                total += g.weight(u, v);
            }
        }
        Ok(CyclePacking {
            cycles,
            total_weight: total,
        })
    }
}

/// One peer's shares of the solution vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedSolution {
    pub donor: Vec<Share>,
    pub recipient: Vec<Share>,
}

/// Combines the three peers' output shares, as a hospital would.
pub fn reveal(ring: Ring, parts: &[SharedSolution; 3]) -> Result<ExchangeSolution, SolutionError> {
    let n = parts[0].donor.len();
    let combine = |get: &dyn Fn(&SharedSolution) -> &Vec<Share>| -> Result<Vec<u64>, SolutionError> {
        for p in parts {
            if get(p).len() != n {
                return Err(SolutionError::Length {
                    donor: n,
                    recipient: get(p).len(),
                });
            }
        }
        (0..n)
            .map(|i| {
                reconstruct(ring, &[get(&parts[0])[i], get(&parts[1])[i], get(&parts[2])[i]])
                    .map_err(|_| SolutionError::Corrupt { pair: i })
            })
            .collect()
    };
    Ok(ExchangeSolution {
        donor: combine(&|p| &p.donor)?,
        recipient: combine(&|p| &p.recipient)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_vectors() {
        let p = CyclePacking {
            cycles: vec![vec![0, 1, 2]],
            total_weight: 3,
        };
        let s = ExchangeSolution::from_packing(3, &p);
        assert_eq!(s.donor, vec![3, 1, 2]);
        assert_eq!(s.recipient, vec![2, 3, 1]);
        assert_eq!(s.cycles(3).unwrap(), vec![vec![0, 1, 2]]);
        assert!(s.cycles(2).is_err());
    }

    #[test]
    fn inconsistent_vectors_are_rejected() {
        let s = ExchangeSolution {
            donor: vec![2, 0],
            recipient: vec![2, 1],
        };
        assert!(matches!(s.cycles(3), Err(SolutionError::Inconsistent { .. })));
        let s = ExchangeSolution {
            donor: vec![1, 0],
            recipient: vec![1, 0],
        };
        assert!(s.cycles(3).is_err());
    }

    #[test]
    fn missing_edge_is_reported() {
        let g = PlainGraph::from_edges(2, &[(0, 1, 1)]);
        let s = ExchangeSolution {
            donor: vec![2, 1],
            recipient: vec![2, 1],
        };
        assert_eq!(
            s.to_packing(&g, 3),
            Err(SolutionError::MissingEdge { from: 1, to: 0 })
        );
    }
}
