//! Secret comparison by masking, opening and a bitwise less-than against the
//! shared mask bits.

use super::{GateError, Result};
use crate::abb::{Session, Share};

/// `[x > y]` with the default range precondition: values below `2^(k-2)`.
pub fn gt(s: &mut Session, x: Share, y: Share) -> Result<Share> {
    let bits = s.ring().k() - 2;
    Ok(gt_batch(s, &[x], &[y], bits)?[0])
}

/// Batched `[x > y]` for values known to lie in `[0, 2^bits)`.
///
/// `d = y - x + 2^bits` lies in `(0, 2^(bits+1))` and its bit `bits` is set
/// exactly when `y >= x`. That bit is extracted from `c = d + r`, where `r`
/// is built from `bits + 1` shared random bits plus a uniform high part, as
/// `c_top ^ r_top ^ [c_low < r_low]`.
///
/// Rounds: 2 (random bits) + 1 (open) + ceil(log2 bits) (prefix OR) + 1.
pub fn gt_batch(s: &mut Session, xs: &[Share], ys: &[Share], bits: u32) -> Result<Vec<Share>> {
    let k = s.ring().k();
    if bits == 0 || bits + 2 > k {
        return Err(GateError::CompareWidth { bits, k });
    }
    if xs.len() != ys.len() {
        return Err(GateError::Size(format!(
            "comparison operands {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let me = s.me();
    let width = bits as usize + 1;
    let rbits = s.rand_bits(n * width)?;
    let high = s.rand_values(n);
    let mut masked = Vec::with_capacity(n);
    for i in 0..n {
        let d = s.add_public(ys[i] - xs[i], 1u64 << bits);
        let r_low: Share = (0..width)
            .map(|j| rbits[i * width + j] * (1u64 << j))
            .sum();
        let r = r_low + high[i] * (1u64 << width);
        masked.push(d + r);
    }
    let opened = s.open_batch(&masked)?;

    let low_bits: Vec<&[Share]> = (0..n)
        .map(|i| &rbits[i * width..i * width + bits as usize])
        .collect();
    let c_low: Vec<u64> = opened.iter().map(|c| c & ((1u64 << bits) - 1)).collect();
    let borrow = lt_public_bits(s, &c_low, &low_bits)?;

    // top = c_top ^ r_top, linear because c_top is public.
    let tops: Vec<Share> = (0..n)
        .map(|i| {
            let r_top = rbits[i * width + bits as usize];
            if (opened[i] >> bits) & 1 == 1 {
                r_top.not(me)
            } else {
                r_top
            }
        })
        .collect();
    let ge = s.xor_batch(&tops, &borrow)?;
    Ok(ge.into_iter().map(|b| b.not(me)).collect())
}

/// `[c < r]` for public `c` and `r` given by shared bits (least significant
/// first), for a batch of independent instances of equal width.
pub fn lt_public_bits(s: &mut Session, cs: &[u64], rs: &[&[Share]]) -> Result<Vec<Share>> {
    let me = s.me();
    let n = cs.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let width = rs[0].len();
    // e_j = c_j ^ r_j, indexed from the most significant bit.
    let mut diff: Vec<Vec<Share>> = Vec::with_capacity(n);
    for (c, r) in cs.iter().zip(rs) {
        diff.push(
            (0..width)
                .rev()
                .map(|j| {
                    if (c >> j) & 1 == 1 {
                        r[j].not(me)
                    } else {
                        r[j]
                    }
                })
                .collect(),
        );
    }
    let prefix = prefix_or_msb(s, diff)?;
    let mut out = Vec::with_capacity(n);
    for (i, f) in prefix.iter().enumerate() {
        // g_t is 1 only at the first (most significant) differing bit; c < r
        // exactly when c has a 0 there.
        let mut acc = Share::ZERO;
        for t in 0..width {
            let bit = width - 1 - t;
            if (cs[i] >> bit) & 1 == 0 {
                let g = if t == 0 { f[0] } else { f[t] - f[t - 1] };
                acc += g;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Prefix OR of each row, in row order, using a Sklansky network:
/// `ceil(log2 len)` rounds for the whole batch.
pub fn prefix_or_msb(s: &mut Session, mut rows: Vec<Vec<Share>>) -> Result<Vec<Vec<Share>>> {
    let len = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut d = 1;
    while d < len {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut targets = Vec::new();
        for (ri, row) in rows.iter().enumerate() {
            for t in 0..row.len() {
                if t & d != 0 {
                    let src = (t & !(2 * d - 1)) + d - 1;
                    xs.push(row[t]);
                    ys.push(row[src]);
                    targets.push((ri, t));
                }
            }
        }
        let prod = s.mul_batch(&xs, &ys)?;
        for (((ri, t), p), (x, y)) in targets.into_iter().zip(prod).zip(xs.into_iter().zip(ys)) {
            rows[ri][t] = x + y - p;
        }
        d *= 2;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::abb::{run_local, Ring, SeedSource};
    use crate::transport::PeerId;

    fn p0() -> PeerId {
        PeerId::new(0).unwrap()
    }

    fn shared(s: &mut Session, vals: &[u64]) -> Vec<Share> {
        let me = s.me();
        s.input(p0(), (me == p0()).then_some(vals), vals.len()).unwrap()
    }

    #[test]
    fn small_cases() {
        let out = run_local(Ring::default(), SeedSource::Fixed(1), |s| {
            let v = shared(s, &[5, 3, 7, 0, 1 << 61]);
            let a = gt(s, v[0], v[1])?;
            let b = gt(s, v[2], v[2])?;
            let c = gt(s, v[3], v[0])?;
            let d = gt(s, v[4], v[3])?;
            Ok(s.open_batch(&[a, b, c, d])?)
        })
        .unwrap();
        assert_eq!(out[0], vec![1, 0, 0, 1]);
    }

    #[test]
    fn random_bounded_pairs_match_plaintext() {
        let mut rng = StdRng::seed_from_u64(2);
        for (bits, ring) in [(22u32, 64u32), (62, 64), (30, 32)] {
            let n = 1000;
            let xs: Vec<u64> = (0..n).map(|_| rng.random_range(0..1u64 << bits)).collect();
            let mut ys: Vec<u64> = (0..n).map(|_| rng.random_range(0..1u64 << bits)).collect();
            for i in (0..n).step_by(7) {
                ys[i] = xs[i];
            }
            let ring = Ring::new(ring).unwrap();
            let out = run_local(ring, SeedSource::Fixed(3), |s| {
                let a = shared(s, &xs);
                let b = shared(s, &ys);
                let r = gt_batch(s, &a, &b, bits)?;
                Ok(s.open_batch(&r)?)
            })
            .unwrap();
            for i in 0..n {
                assert_eq!(out[0][i], (xs[i] > ys[i]) as u64, "bits {bits} i {i}");
            }
        }
    }

    #[test]
    fn width_is_checked() {
        let res = run_local(Ring::default(), SeedSource::Fixed(4), |s| {
            let z = Share::ZERO;
            Ok(gt_batch(s, &[z], &[z], 63).is_err() && gt_batch(s, &[z], &[z], 0).is_err())
        })
        .unwrap();
        assert!(res[0]);
    }

    #[test]
    fn round_count_is_logarithmic() {
        let out = run_local(Ring::default(), SeedSource::Fixed(5), |s| {
            let z = vec![Share::ZERO; 50];
            let before = s.transcript().rounds();
            gt_batch(s, &z, &z, 22)?;
            Ok(s.transcript().rounds() - before)
        })
        .unwrap();
        // 2 + 1 + ceil(log2 22) + 1
        assert_eq!(out[0], 9);
    }
}
