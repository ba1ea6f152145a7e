//! Oblivious node relabeling of shared square matrices.
//!
//! The shuffle is three resharing passes. In pass `c` the two peers holding
//! component `c` (peers `c - 1` and `c`) know the whole secret between them;
//! they apply a permutation drawn from their common PRG, re-randomize, and
//! hand fresh components to the third peer. No single peer knows all three
//! permutations, so the composition stays hidden. Inversion replays the
//! passes in reverse order with inverse permutations.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{GateError, Result};
use crate::abb::{AbbError, Session, Share, ShareMatrix};
use crate::transport::{pack_u64s, unpack_u64s, PeerId};

/// How each pass's permutation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleMode {
    /// Drawn from the pairwise PRG of the two peers running the pass.
    Random,
    /// Derived from a public seed; the composition can be recomputed with
    /// [`PermutationHandle::composed_public`]. For tests only.
    Seeded(u64),
    /// The identity in every pass.
    Identity,
}

/// What this peer knows about a shuffle: the permutations of the passes it
/// took part in. `perm[i]` is the new position of node `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationHandle {
    n: usize,
    passes: [Option<Vec<usize>>; 3],
}

impl PermutationHandle {
    pub fn size(&self) -> usize {
        self.n
    }

    /// Permutation of pass `c`, if this peer ran it.
    pub fn pass(&self, c: usize) -> Option<&[usize]> {
        self.passes[c].as_deref()
    }

    /// The full relabeling applied by a seeded or identity shuffle:
    /// node `i` moves to position `result[i]`.
    pub fn composed_public(mode: ShuffleMode, n: usize) -> Option<Vec<usize>> {
        let mut pos: Vec<usize> = (0..n).collect();
        for c in 0..3 {
            let p = match mode {
                ShuffleMode::Random => return None,
                ShuffleMode::Identity => (0..n).collect(),
                ShuffleMode::Seeded(seed) => seeded_perm(seed, c, n),
            };
            for x in pos.iter_mut() {
                *x = p[*x];
            }
        }
        Some(pos)
    }
}

fn seeded_perm(seed: u64, pass: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add((pass as u64 + 1) << 56));
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &t) in p.iter().enumerate() {
        inv[t] = i;
    }
    inv
}

/// Applies one hidden relabeling to the rows and columns of every matrix:
/// `out(pi(i), pi(j)) = in(i, j)`.
pub fn shuffle_nodes(
    s: &mut Session,
    mats: &[ShareMatrix],
    mode: ShuffleMode,
) -> Result<(Vec<ShareMatrix>, PermutationHandle)> {
    let n = check_square(mats)?;
    let me = s.me().index();
    let mut handle = PermutationHandle {
        n,
        passes: [None, None, None],
    };
    let mut data = flatten(mats);
    for c in 0..3 {
        let holder = me == c || me == (c + 2) % 3;
        let perm = if holder {
            let p = match mode {
                ShuffleMode::Random => {
                    let mut p: Vec<usize> = (0..n).collect();
                    p.shuffle(s.component_prg(c).expect("holder has the PRG"));
                    p
                }
                ShuffleMode::Seeded(seed) => seeded_perm(seed, c, n),
                ShuffleMode::Identity => (0..n).collect(),
            };
            handle.passes[c] = Some(p.clone());
            Some(p)
        } else {
            None
        };
        data = reshare_pass(s, c, n, data, perm.as_deref())?;
    }
    Ok((unflatten(mats.len(), n, data), handle))
}

/// Undoes [`shuffle_nodes`] on a matrix in the shuffled labeling.
pub fn rev_shuffle(s: &mut Session, a: &ShareMatrix, handle: &PermutationHandle) -> Result<ShareMatrix> {
    let n = check_square(std::slice::from_ref(a))?;
    if n != handle.n {
        return Err(GateError::HandleMismatch {
            handle: handle.n,
            matrix: n,
        });
    }
    let mut data = a.as_slice().to_vec();
    for c in (0..3).rev() {
        let inv = handle.passes[c].as_deref().map(invert);
        data = reshare_pass(s, c, n, data, inv.as_deref())?;
    }
    Ok(ShareMatrix::from_vec(n, n, data))
}

fn check_square(mats: &[ShareMatrix]) -> Result<usize> {
    let n = mats.first().map(ShareMatrix::rows).unwrap_or(0);
    for m in mats {
        if m.rows() != n || m.cols() != n {
            return Err(GateError::Size(format!(
                "shuffle needs equal square matrices, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(n)
}

fn flatten(mats: &[ShareMatrix]) -> Vec<Share> {
    mats.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

fn unflatten(count: usize, n: usize, data: Vec<Share>) -> Vec<ShareMatrix> {
    (0..count)
        .map(|i| ShareMatrix::from_vec(n, n, data[i * n * n..(i + 1) * n * n].to_vec()))
        .collect()
}

/// Relabels a stack of `n x n` blocks held as plain words.
fn permute_words(words: &[u64], n: usize, perm: &[usize]) -> Vec<u64> {
    let mut out = vec![0u64; words.len()];
    let block = n * n;
    for (b, chunk) in words.chunks(block).enumerate() {
        let base = b * block;
        for i in 0..n {
            for j in 0..n {
                out[base + perm[i] * n + perm[j]] = chunk[i * n + j];
            }
        }
    }
    out
}

/// One pass run by the holders `h1 = c - 1` and `h2 = c` of component `c`.
/// Peer `e = c + 1` learns only re-randomized components.
fn reshare_pass(
    s: &mut Session,
    c: usize,
    n: usize,
    data: Vec<Share>,
    perm: Option<&[usize]>,
) -> Result<Vec<Share>> {
    let me = s.me();
    let h1 = PeerId::ALL[(c + 2) % 3];
    let h2 = PeerId::ALL[c];
    let e = PeerId::ALL[(c + 1) % 3];
    let len = data.len();
    if me == e {
        let mut got = s.endpoint().exchange_round(BTreeMap::new(), &[h1, h2])?;
        // e holds (y_{c+1}, y_{c+2}) = (B', A' - r).
        let from_h2 = unpack_u64s(h2, &got.remove(&h2).unwrap_or_default(), len)?;
        let from_h1 = unpack_u64s(h1, &got.remove(&h1).unwrap_or_default(), len)?;
        return Ok(from_h2
            .into_iter()
            .zip(from_h1)
            .map(|(a, b)| Share { a, b })
            .collect());
    }
    let perm = perm.expect("holders know the pass permutation");
    let prg = s.component_prg(c).expect("holder has the PRG");
    let masks: Vec<(u64, u64)> = (0..len).map(|_| (prg.next_u64(), prg.next_u64())).collect();
    let out = if me == h1 {
        // h1 holds (x_{c-1}, x_c) = (a, b).
        let sum: Vec<u64> = data.iter().map(|s| s.a.wrapping_add(s.b)).collect();
        let permuted = permute_words(&sum, n, perm);
        let y_prev: Vec<u64> = permuted
            .iter()
            .zip(&masks)
            .map(|(&v, &(z, r))| v.wrapping_add(z).wrapping_sub(r))
            .collect();
        let mut out = BTreeMap::new();
        out.insert(e, pack_u64s(y_prev.iter().copied()));
        s.endpoint().exchange_round(out, &[])?;
        y_prev
            .into_iter()
            .zip(&masks)
            .map(|(a, &(_, r))| Share { a, b: r })
            .collect()
    } else {
        // h2 holds (x_c, x_{c+1}) = (a, b).
        let other: Vec<u64> = data.iter().map(|s| s.b).collect();
        let permuted = permute_words(&other, n, perm);
        let y_next: Vec<u64> = permuted
            .iter()
            .zip(&masks)
            .map(|(&v, &(z, _))| v.wrapping_sub(z))
            .collect();
        let mut out = BTreeMap::new();
        out.insert(e, pack_u64s(y_next.iter().copied()));
        s.endpoint().exchange_round(out, &[])?;
        y_next
            .into_iter()
            .zip(&masks)
            .map(|(b, &(_, r))| Share { a: r, b })
            .collect()
    };
    Ok(out)
}

impl From<crate::transport::TransportError> for GateError {
    fn from(e: crate::transport::TransportError) -> Self {
        GateError::Abb(AbbError::Transport(e))
    }
}
