use super::{GateError, Result};
use crate::abb::{Session, Share};

/// `z ? x : y` for a shared bit `z`, computed as `z * (x - y) + y`.
pub fn select(s: &mut Session, z: Share, x: Share, y: Share) -> Result<Share> {
    Ok(select_batch(s, &[z], &[x], &[y])?[0])
}

/// Element-wise select; one multiplication round for the whole batch.
pub fn select_batch(s: &mut Session, z: &[Share], x: &[Share], y: &[Share]) -> Result<Vec<Share>> {
    if z.len() != x.len() || x.len() != y.len() {
        return Err(GateError::Size(format!(
            "select operands {} / {} / {}",
            z.len(),
            x.len(),
            y.len()
        )));
    }
    let diff: Vec<Share> = x.iter().zip(y).map(|(&x, &y)| x - y).collect();
    let prod = s.mul_batch(z, &diff)?;
    Ok(prod.into_iter().zip(y).map(|(p, &y)| p + y).collect())
}

/// Inner product of two shared vectors in one round.
pub fn dot_product(s: &mut Session, a: &[Share], b: &[Share]) -> Result<Share> {
    if a.len() != b.len() {
        return Err(GateError::Size(format!("dot product {} vs {}", a.len(), b.len())));
    }
    Ok(s.dot_batch(&[(a, b)])?[0])
}

#[cfg(test)]
mod tests {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::abb::{run_local, Ring, SeedSource};
    use crate::transport::PeerId;

    #[test]
    fn select_and_dot_examples() {
        let out = run_local(Ring::default(), SeedSource::Fixed(1), |s| {
            let one = s.public(1);
            let zero = s.public(0);
            let nine = s.public(9);
            let four = s.public(4);
            let a = select(s, one, nine, four)?;
            let b = select(s, zero, nine, four)?;
            let v: Vec<Share> = [1, 0, 1].iter().map(|&c| s.public(c)).collect();
            let w: Vec<Share> = [0, 0, 1].iter().map(|&c| s.public(c)).collect();
            let d = dot_product(s, &v, &w)?;
            let z = dot_product(s, &v, &[Share::ZERO; 3])?;
            assert!(dot_product(s, &v, &w[..1]).is_err());
            Ok(s.open_batch(&[a, b, d, z])?)
        })
        .unwrap();
        assert_eq!(out[0], vec![9, 4, 1, 0]);
    }

    #[test]
    fn random_dot_products() {
        let mut rng = StdRng::seed_from_u64(3);
        let a: Vec<u64> = (0..50).map(|_| rng.random()).collect();
        let b: Vec<u64> = (0..50).map(|_| rng.random()).collect();
        let expect = a
            .iter()
            .zip(&b)
            .fold(0u64, |acc, (x, y)| acc.wrapping_add(x.wrapping_mul(*y)));
        let p0 = PeerId::new(0).unwrap();
        let out = run_local(Ring::default(), SeedSource::Fixed(2), |s| {
            let me = s.me();
            let x = s.input(p0, (me == p0).then_some(&a[..]), 50)?;
            let y = s.input(p0, (me == p0).then_some(&b[..]), 50)?;
            let d = dot_product(s, &x, &y)?;
            Ok(s.open(d)?)
        })
        .unwrap();
        assert_eq!(out[0], expect);
    }
}
