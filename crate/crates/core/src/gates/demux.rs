//! Demultiplexing a shared value into a shared one-hot vector.
//!
//! The value is first decomposed into shared bits (mask, open, subtract the
//! mask with a carry-lookahead borrow chain), then the bits are expanded into
//! an indicator vector by a tree of outer products. Only `bit_length(n)` bits
//! are decomposed, so the expansion never materializes more than `2n`
//! entries at its last level.

use super::{GateError, Result};
use crate::abb::{Session, Share};

/// Number of bits needed to write `n`.
pub fn bit_length(n: usize) -> u32 {
    usize::BITS - n.leading_zeros()
}

/// Indicator of `x` over `[0, n)`; all zeros if `x >= n`. The caller
/// guarantees `x < 2^bit_length(n)`.
pub fn demux(s: &mut Session, x: Share, n: usize) -> Result<Vec<Share>> {
    Ok(demux_batch(s, &[(x, n)])?.pop().expect("one result"))
}

/// Several independent demuxes, possibly of different lengths, sharing all
/// communication rounds.
pub fn demux_batch(s: &mut Session, reqs: &[(Share, usize)]) -> Result<Vec<Vec<Share>>> {
    let k = s.ring().k();
    for &(_, n) in reqs {
        if bit_length(n) + 1 > k {
            return Err(GateError::Size(format!("demux length {n} too large")));
        }
    }
    let bits = decompose(s, reqs)?;
    expand(s, reqs, bits)
}

/// Shared little-endian bits of each request value, `bit_length(n)` each.
fn decompose(s: &mut Session, reqs: &[(Share, usize)]) -> Result<Vec<Vec<Share>>> {
    let me = s.me();
    let widths: Vec<usize> = reqs.iter().map(|&(_, n)| bit_length(n) as usize).collect();
    let total: usize = widths.iter().sum();
    let rbits = s.rand_bits(total)?;
    let high = s.rand_values(reqs.len());

    let mut offsets = Vec::with_capacity(reqs.len());
    let mut masked = Vec::with_capacity(reqs.len());
    let mut off = 0;
    for (i, &(x, _)) in reqs.iter().enumerate() {
        let m = widths[i];
        let r_low: Share = (0..m).map(|j| rbits[off + j] * (1u64 << j)).sum();
        let hi_shift = if m >= 64 { 0 } else { 1u64 << m };
        masked.push(x + r_low + high[i] * hi_shift);
        offsets.push(off);
        off += m;
    }
    let opened = s.open_batch(&masked)?;

    // Borrow chain of c - r over the low m bits. Position i generates a
    // borrow when c_i = 0, r_i = 1 and propagates one when c_i = r_i.
    let mut gen: Vec<Vec<Share>> = Vec::with_capacity(reqs.len());
    let mut prop: Vec<Vec<Share>> = Vec::with_capacity(reqs.len());
    let mut xor: Vec<Vec<Share>> = Vec::with_capacity(reqs.len());
    for (i, &c) in opened.iter().enumerate() {
        let r = &rbits[offsets[i]..offsets[i] + widths[i]];
        let mut g = Vec::with_capacity(widths[i]);
        let mut p = Vec::with_capacity(widths[i]);
        let mut e = Vec::with_capacity(widths[i]);
        for (j, &rj) in r.iter().enumerate() {
            let cj = (c >> j) & 1;
            let ej = if cj == 1 { rj.not(me) } else { rj };
            g.push(if cj == 0 { rj } else { Share::ZERO });
            p.push(ej.not(me));
            e.push(ej);
        }
        gen.push(g);
        prop.push(p);
        xor.push(e);
    }
    let (carry, _) = prefix_carry(s, gen, prop)?;

    // bit_i = e_i ^ borrow_in_i, with borrow_in_0 = 0.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..reqs.len() {
        for j in 1..widths[i] {
            xs.push(xor[i][j]);
            ys.push(carry[i][j - 1]);
        }
    }
    let mut xored = s.xor_batch(&xs, &ys)?.into_iter();
    Ok(xor
        .into_iter()
        .map(|e| {
            e.into_iter()
                .enumerate()
                .map(|(j, ej)| if j == 0 { ej } else { xored.next().unwrap() })
                .collect()
        })
        .collect())
}

/// Inclusive prefix of the (generate, propagate) operator from the least
/// significant end: `(G, P) o (G', P') = (G + P G', P P')` where the left
/// operand is the more significant block. Sklansky network.
fn prefix_carry(
    s: &mut Session,
    mut g: Vec<Vec<Share>>,
    mut p: Vec<Vec<Share>>,
) -> Result<(Vec<Vec<Share>>, Vec<Vec<Share>>)> {
    let len = g.iter().map(Vec::len).max().unwrap_or(0);
    let mut d = 1;
    while d < len {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut targets = Vec::new();
        for ri in 0..g.len() {
            for t in 0..g[ri].len() {
                if t & d != 0 {
                    let src = (t & !(2 * d - 1)) + d - 1;
                    // P_t * G_src and P_t * P_src
                    xs.push(p[ri][t]);
                    ys.push(g[ri][src]);
                    xs.push(p[ri][t]);
                    ys.push(p[ri][src]);
                    targets.push((ri, t));
                }
            }
        }
        let prod = s.mul_batch(&xs, &ys)?;
        for (k, (ri, t)) in targets.into_iter().enumerate() {
            g[ri][t] += prod[2 * k];
            p[ri][t] = prod[2 * k + 1];
        }
        d *= 2;
    }
    Ok((g, p))
}

/// One-hot expansion of little-endian bit vectors, truncated to each
/// request's length. `ceil(log2 m)` rounds.
fn expand(
    s: &mut Session,
    reqs: &[(Share, usize)],
    bits: Vec<Vec<Share>>,
) -> Result<Vec<Vec<Share>>> {
    let me = s.me();
    // Each request holds a list of partial indicators over consecutive bit
    // ranges (low bits first), each with its bit count.
    let mut parts: Vec<Vec<(Vec<Share>, u32)>> = bits
        .into_iter()
        .map(|b| b.into_iter().map(|bit| (vec![bit.not(me), bit], 1)).collect())
        .collect();

    loop {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        // (request, pair index, output length)
        let mut plan = Vec::new();
        for (ri, ps) in parts.iter().enumerate() {
            if ps.len() < 2 {
                continue;
            }
            let last = ps.len() == 2;
            for (pi, pair) in ps.chunks(2).enumerate() {
                if pair.len() < 2 {
                    continue;
                }
                let (lo, hi) = (&pair[0].0, &pair[1].0);
                let full = lo.len() * hi.len();
                let out_len = if last { full.min(reqs[ri].1) } else { full };
                for idx in 0..out_len {
                    xs.push(lo[idx % lo.len()]);
                    ys.push(hi[idx / lo.len()]);
                }
                plan.push((ri, pi, out_len));
            }
        }
        if plan.is_empty() {
            break;
        }
        let prod = s.mul_batch(&xs, &ys)?;
        let mut cursor = 0;
        let mut merged: Vec<Vec<Option<(Vec<Share>, u32)>>> = parts
            .iter()
            .map(|ps| vec![None; ps.len().div_ceil(2)])
            .collect();
        for (ri, pi, out_len) in plan {
            let nb = parts[ri][2 * pi].1 + parts[ri][2 * pi + 1].1;
            merged[ri][pi] = Some((prod[cursor..cursor + out_len].to_vec(), nb));
            cursor += out_len;
        }
        for (ri, ps) in parts.iter_mut().enumerate() {
            if ps.len() < 2 {
                continue;
            }
            let old = std::mem::take(ps);
            let mut old = old.into_iter();
            for slot in merged[ri].iter_mut() {
                let lo = old.next().unwrap();
                match slot.take() {
                    Some(m) => {
                        old.next();
                        ps.push(m);
                    }
                    None => ps.push(lo),
                }
            }
        }
    }

    Ok(parts
        .into_iter()
        .zip(reqs)
        .map(|(mut ps, &(_, n))| match ps.pop() {
            Some((mut v, _)) => {
                v.truncate(n);
                v
            }
            None => Vec::new(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abb::{run_local, Ring, SeedSource};

    #[test]
    fn bit_lengths() {
        assert_eq!(bit_length(0), 0);
        assert_eq!(bit_length(1), 1);
        assert_eq!(bit_length(4), 3);
        assert_eq!(bit_length(16), 5);
    }

    #[test]
    fn small_examples() {
        let out = run_local(Ring::default(), SeedSource::Fixed(1), |s| {
            let two = s.public(2);
            let zero = s.public(0);
            let a = demux(s, two, 4)?;
            let b = demux(s, zero, 3)?;
            Ok((s.open_batch(&a)?, s.open_batch(&b)?))
        })
        .unwrap();
        assert_eq!(out[0].0, vec![0, 0, 1, 0]);
        assert_eq!(out[0].1, vec![1, 0, 0]);
    }

    #[test]
    fn exhaustive_widths_up_to_five_bits() {
        for n in 1..=31usize {
            let max_x = (1usize << bit_length(n)) - 1;
            let out = run_local(Ring::default(), SeedSource::Fixed(n as u64), |s| {
                let reqs: Vec<(Share, usize)> =
                    (0..=max_x).map(|x| (s.public(x as u64), n)).collect();
                let rs = demux_batch(s, &reqs)?;
                let flat: Vec<Share> = rs.concat();
                Ok(s.open_batch(&flat)?)
            })
            .unwrap();
            let got = &out[0];
            let mut pos = 0;
            for x in 0..=max_x {
                for i in 0..n {
                    assert_eq!(got[pos], (i == x) as u64, "n {n} x {x} i {i}");
                    pos += 1;
                }
            }
        }
    }

    #[test]
    fn mixed_lengths_in_one_batch() {
        let out = run_local(Ring::default(), SeedSource::Fixed(9), |s| {
            let reqs = vec![
                (s.public(35), 35),
                (s.public(6), 6),
                (s.public(3), 6),
                (s.public(0), 1),
                (s.public(1), 1),
            ];
            let rs = demux_batch(s, &reqs)?;
            let mut opened = Vec::new();
            for r in &rs {
                opened.push(s.open_batch(r)?);
            }
            Ok(opened)
        })
        .unwrap();
        assert!(out[0][0].iter().all(|&v| v == 0) && out[0][0].len() == 35);
        assert!(out[0][1].iter().all(|&v| v == 0));
        assert_eq!(out[0][2], vec![0, 0, 0, 1, 0, 0]);
        assert_eq!(out[0][3], vec![1]);
        assert_eq!(out[0][4], vec![0]);
    }
}
