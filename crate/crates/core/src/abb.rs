//! Arithmetic black box: three-party replicated secret sharing over the ring
//! of integers modulo `2^k`.
//!
//! A secret `x` is split as `x = x0 + x1 + x2 (mod 2^k)` and peer `i` holds
//! the pair `(x_i, x_{i+1})`. Component `j` is therefore known to peers `j`
//! and `j - 1`, who also share a PRG seed `F_j`. Those pairwise PRGs give
//! every peer correlated randomness without interaction: zero-sharings for
//! multiplication, random shared values, and random shared bits.
//!
//! Arithmetic is carried out on wrapping `u64`; for `k < 64` results are
//! reduced to `k` bits whenever a value leaves the sharing (opening, bit
//! extraction). Everything above this module talks only to [`Session`].

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transport::{pack_u64s, unpack_u64s, Endpoint, PeerId, Transcript, TransportError};

#[derive(Debug, Error)]
pub enum AbbError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("inconsistent replicated components at element {index}: share corruption")]
    Corruption { index: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("ring width {0} unsupported (must be in 32..=64)")]
    RingWidth(u32),
}

impl AbbError {
    pub fn is_disconnect(&self) -> bool {
        matches!(self, AbbError::Transport(TransportError::ChannelClosed(_)))
    }
}

/// The ring `Z_{2^k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ring {
    k: u32,
}

impl Default for Ring {
    fn default() -> Self {
        Ring { k: 64 }
    }
}

impl Ring {
    pub fn new(k: u32) -> Result<Self, AbbError> {
        if (32..=64).contains(&k) {
            Ok(Ring { k })
        } else {
            Err(AbbError::RingWidth(k))
        }
    }

    pub fn k(self) -> u32 {
        self.k
    }

    pub fn mask(self) -> u64 {
        if self.k == 64 {
            u64::MAX
        } else {
            (1u64 << self.k) - 1
        }
    }

    pub fn reduce(self, x: u64) -> u64 {
        x & self.mask()
    }
}

/// One peer's two replicated components of a secret.
///
/// For peer `i`, `a = x_i` and `b = x_{i+1}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub a: u64,
    pub b: u64,
}

impl Share {
    pub const ZERO: Share = Share { a: 0, b: 0 };

    pub fn new(a: u64, b: u64) -> Self {
        Share { a, b }
    }

    /// `1 - self`, for a share of a bit.
    pub fn not(self, me: PeerId) -> Share {
        public(me, 1) - self
    }
}

impl Add for Share {
    type Output = Share;
    fn add(self, o: Share) -> Share {
        Share {
            a: self.a.wrapping_add(o.a),
            b: self.b.wrapping_add(o.b),
        }
    }
}

impl AddAssign for Share {
    fn add_assign(&mut self, o: Share) {
        *self = *self + o;
    }
}

impl Sub for Share {
    type Output = Share;
    fn sub(self, o: Share) -> Share {
        Share {
            a: self.a.wrapping_sub(o.a),
            b: self.b.wrapping_sub(o.b),
        }
    }
}

impl SubAssign for Share {
    fn sub_assign(&mut self, o: Share) {
        *self = *self - o;
    }
}

impl Neg for Share {
    type Output = Share;
    fn neg(self) -> Share {
        Share {
            a: self.a.wrapping_neg(),
            b: self.b.wrapping_neg(),
        }
    }
}

/// Multiplication by a public constant.
impl Mul<u64> for Share {
    type Output = Share;
    fn mul(self, c: u64) -> Share {
        Share {
            a: self.a.wrapping_mul(c),
            b: self.b.wrapping_mul(c),
        }
    }
}

impl std::iter::Sum for Share {
    fn sum<I: Iterator<Item = Share>>(iter: I) -> Share {
        iter.fold(Share::ZERO, |acc, s| acc + s)
    }
}

/// Sharing of the public constant `c` without randomness: component 0 is
/// `c`, the others are zero.
pub fn public(me: PeerId, c: u64) -> Share {
    match me.index() {
        0 => Share { a: c, b: 0 },
        1 => Share { a: 0, b: 0 },
        _ => Share { a: 0, b: c },
    }
}

/// Splits `x` into the three peers' shares using the dealer's randomness.
pub fn deal<R: Rng + ?Sized>(x: u64, rng: &mut R) -> [Share; 3] {
    let x0: u64 = rng.random();
    let x1: u64 = rng.random();
    let x2 = x.wrapping_sub(x0).wrapping_sub(x1);
    let c = [x0, x1, x2];
    [0, 1, 2].map(|i| Share {
        a: c[i],
        b: c[(i + 1) % 3],
    })
}

/// Recombines three peers' shares of one secret, checking replication.
pub fn reconstruct(ring: Ring, shares: &[Share; 3]) -> Result<u64, AbbError> {
    for i in 0..3 {
        if shares[i].b != shares[(i + 1) % 3].a {
            return Err(AbbError::Corruption { index: 0 });
        }
    }
    Ok(ring.reduce(
        shares[0]
            .a
            .wrapping_add(shares[1].a)
            .wrapping_add(shares[2].a),
    ))
}

/// Dense row-major matrix of shares with public dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Share>,
}

impl ShareMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ShareMatrix {
            rows,
            cols,
            data: vec![Share::ZERO; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Share>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        ShareMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Share {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, s: Share) {
        self.data[i * self.cols + j] = s;
    }

    pub fn as_slice(&self) -> &[Share] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Share] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Share> {
        self.data
    }
}

/// Operation counters for one session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbbStats {
    pub mul_rounds: u64,
    pub mul_elements: u64,
    pub open_rounds: u64,
    pub open_elements: u64,
    pub rand_bits: u64,
}

/// Where a session's pairwise PRG seeds come from.
#[derive(Debug, Clone, Copy)]
pub enum SeedSource {
    /// Fresh operating-system entropy.
    Entropy,
    /// Derived from a test seed and the peer id, for reproducible runs.
    Fixed(u64),
}

/// One peer's handle on a secure computation session.
pub struct Session {
    ep: Endpoint,
    ring: Ring,
    /// `prg[0]` is `F_me` (shared with the previous peer), `prg[1]` is
    /// `F_{me+1}` (shared with the next peer).
    prg: [ChaCha12Rng; 2],
    local: ChaCha12Rng,
    stats: AbbStats,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("me", &self.ep.me())
            .field("ring", &self.ring)
            .field("stats", &self.stats)
            .finish()
    }
}

impl Session {
    /// Runs the one-round seed setup: every peer sends its own seed to the
    /// previous peer, so that each seed ends up known to exactly two peers.
    pub fn setup(mut ep: Endpoint, ring: Ring, seeds: SeedSource) -> Result<Self, AbbError> {
        let me = ep.me();
        let mut local = match seeds {
            SeedSource::Entropy => ChaCha12Rng::from_os_rng(),
            SeedSource::Fixed(s) => {
                ChaCha12Rng::seed_from_u64(s ^ (me.index() as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
            }
        };
        let mut own = [0u8; 32];
        local.fill_bytes(&mut own);
        let mut out = BTreeMap::new();
        out.insert(me.prev(), own.to_vec());
        let mut got = ep.exchange_round(out, &[me.next()])?;
        let theirs: [u8; 32] = got
            .remove(&me.next())
            .unwrap_or_default()
            .try_into()
            .map_err(|_| TransportError::MalformedFrame {
                peer: me.next(),
                reason: "seed must be 32 bytes".into(),
            })?;
        Ok(Session {
            ep,
            ring,
            prg: [ChaCha12Rng::from_seed(own), ChaCha12Rng::from_seed(theirs)],
            local,
            stats: AbbStats::default(),
        })
    }

    pub fn me(&self) -> PeerId {
        self.ep.me()
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn stats(&self) -> AbbStats {
        self.stats
    }

    pub fn transcript(&self) -> &Transcript {
        self.ep.transcript()
    }

    pub fn into_transcript(self) -> Transcript {
        self.ep.into_transcript()
    }

    /// Peer-local randomness, never shared.
    pub fn local_rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.local
    }

    /// The PRG for component `c`, if this peer holds it. Both holders draw
    /// the same stream, so calls must be made symmetrically by both.
    pub fn component_prg(&mut self, c: usize) -> Option<&mut ChaCha12Rng> {
        let me = self.me().index();
        if c % 3 == me {
            Some(&mut self.prg[0])
        } else if c % 3 == (me + 1) % 3 {
            Some(&mut self.prg[1])
        } else {
            None
        }
    }

    pub(crate) fn endpoint(&mut self) -> &mut Endpoint {
        &mut self.ep
    }

    pub fn public(&self, c: u64) -> Share {
        public(self.me(), c)
    }

    /// Adds a public constant to a shared value.
    pub fn add_public(&self, s: Share, c: u64) -> Share {
        s + public(self.me(), c)
    }

    /// Element-wise products, one communication round for the whole batch.
    pub fn mul_batch(&mut self, x: &[Share], y: &[Share]) -> Result<Vec<Share>, AbbError> {
        if x.len() != y.len() {
            return Err(AbbError::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let local: Vec<u64> = x
            .iter()
            .zip(y)
            .map(|(x, y)| {
                x.a.wrapping_mul(y.a)
                    .wrapping_add(x.a.wrapping_mul(y.b))
                    .wrapping_add(x.b.wrapping_mul(y.a))
            })
            .collect();
        self.reshare(local)
    }

    /// Products of pairs given as tuples.
    pub fn mul_pairs(&mut self, pairs: &[(Share, Share)]) -> Result<Vec<Share>, AbbError> {
        let (x, y): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        self.mul_batch(&x, &y)
    }

    /// Several dot products in one round; only one element per dot product
    /// is communicated.
    pub fn dot_batch(&mut self, pairs: &[(&[Share], &[Share])]) -> Result<Vec<Share>, AbbError> {
        let mut local = Vec::with_capacity(pairs.len());
        for (x, y) in pairs {
            if x.len() != y.len() {
                return Err(AbbError::LengthMismatch {
                    left: x.len(),
                    right: y.len(),
                });
            }
            let mut acc = 0u64;
            for (x, y) in x.iter().zip(y.iter()) {
                acc = acc
                    .wrapping_add(x.a.wrapping_mul(y.a))
                    .wrapping_add(x.a.wrapping_mul(y.b))
                    .wrapping_add(x.b.wrapping_mul(y.a));
            }
            local.push(acc);
        }
        self.reshare(local)
    }

    /// Turns local additive terms `z_i` (summing to the product) into a
    /// replicated sharing: mask with a zero-sharing, send to the previous
    /// peer, receive from the next.
    fn reshare(&mut self, mut z: Vec<u64>) -> Result<Vec<Share>, AbbError> {
        if z.is_empty() {
            return Ok(Vec::new());
        }
        for zi in z.iter_mut() {
            let own = self.prg[0].next_u64();
            let next = self.prg[1].next_u64();
            *zi = zi.wrapping_add(own).wrapping_sub(next);
        }
        let me = self.me();
        let n = z.len();
        let mut out = BTreeMap::new();
        out.insert(me.prev(), pack_u64s(z.iter().copied()));
        let mut got = self.ep.exchange_round(out, &[me.next()])?;
        let theirs = unpack_u64s(me.next(), &got.remove(&me.next()).unwrap_or_default(), n)?;
        self.stats.mul_rounds += 1;
        self.stats.mul_elements += n as u64;
        Ok(z
            .into_iter()
            .zip(theirs)
            .map(|(a, b)| Share { a, b })
            .collect())
    }

    /// Opens a batch to all peers, checking that the two received copies of
    /// the missing component agree. Results are reduced mod `2^k`.
    pub fn open_batch(&mut self, xs: &[Share]) -> Result<Vec<u64>, AbbError> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let me = self.me();
        let n = xs.len();
        let mut out = BTreeMap::new();
        out.insert(me.next(), pack_u64s(xs.iter().map(|s| s.a)));
        out.insert(me.prev(), pack_u64s(xs.iter().map(|s| s.b)));
        let mut got = self.ep.exchange_round(out, &me.others())?;
        let from_prev = unpack_u64s(me.prev(), &got.remove(&me.prev()).unwrap_or_default(), n)?;
        let from_next = unpack_u64s(me.next(), &got.remove(&me.next()).unwrap_or_default(), n)?;
        self.stats.open_rounds += 1;
        self.stats.open_elements += n as u64;
        let mut res = Vec::with_capacity(n);
        for (index, (s, (p, q))) in xs.iter().zip(from_prev.into_iter().zip(from_next)).enumerate() {
            // Both neighbours send the component this peer lacks.
            if p != q {
                return Err(AbbError::Corruption { index });
            }
            res.push(self.ring.reduce(s.a.wrapping_add(s.b).wrapping_add(p)));
        }
        Ok(res)
    }

    pub fn open(&mut self, x: Share) -> Result<u64, AbbError> {
        Ok(self.open_batch(&[x])?[0])
    }

    /// Opens a batch to `target` only. Other peers return `None`.
    pub fn open_to(&mut self, target: PeerId, xs: &[Share]) -> Result<Option<Vec<u64>>, AbbError> {
        let me = self.me();
        let n = xs.len();
        let mut out = BTreeMap::new();
        if me != target {
            // The component `target` lacks is x_{target+2}. The next peer of
            // the target holds it as `b`, the previous peer holds it as `a`.
            let words = if me == target.next() {
                xs.iter().map(|s| s.b).collect::<Vec<_>>()
            } else {
                xs.iter().map(|s| s.a).collect()
            };
            out.insert(target, pack_u64s(words));
        }
        let expect: Vec<PeerId> = if me == target { me.others().to_vec() } else { Vec::new() };
        let mut got = self.ep.exchange_round(out, &expect)?;
        self.stats.open_rounds += 1;
        self.stats.open_elements += n as u64;
        if me != target {
            return Ok(None);
        }
        let c1 = unpack_u64s(me.next(), &got.remove(&me.next()).unwrap_or_default(), n)?;
        let c2 = unpack_u64s(me.prev(), &got.remove(&me.prev()).unwrap_or_default(), n)?;
        let mut res = Vec::with_capacity(n);
        for (index, (s, (p, q))) in xs.iter().zip(c1.into_iter().zip(c2)).enumerate() {
            if p != q {
                return Err(AbbError::Corruption { index });
            }
            res.push(self.ring.reduce(s.a.wrapping_add(s.b).wrapping_add(p)));
        }
        Ok(Some(res))
    }

    /// Secret-shares values known to `dealer`. The dealer passes
    /// `Some(values)`, the others `None` together with the public count.
    pub fn input(
        &mut self,
        dealer: PeerId,
        values: Option<&[u64]>,
        count: usize,
    ) -> Result<Vec<Share>, AbbError> {
        let me = self.me();
        if me == dealer {
            let values = values.expect("dealer must supply its input values");
            assert_eq!(values.len(), count, "dealer input count");
            let mut mine = Vec::with_capacity(count);
            let mut to_next = Vec::with_capacity(2 * count);
            let mut to_prev = Vec::with_capacity(2 * count);
            for &x in values {
                let [s_me, s_next, s_prev] = {
                    let all = deal(x, &mut self.local);
                    let i = me.index();
                    [all[i], all[(i + 1) % 3], all[(i + 2) % 3]]
                };
                mine.push(s_me);
                to_next.extend([s_next.a, s_next.b]);
                to_prev.extend([s_prev.a, s_prev.b]);
            }
            let mut out = BTreeMap::new();
            out.insert(me.next(), pack_u64s(to_next));
            out.insert(me.prev(), pack_u64s(to_prev));
            self.ep.exchange_round(out, &[])?;
            Ok(mine)
        } else {
            let mut got = self.ep.exchange_round(BTreeMap::new(), &[dealer])?;
            let words = unpack_u64s(dealer, &got.remove(&dealer).unwrap_or_default(), 2 * count)?;
            Ok(words
                .chunks_exact(2)
                .map(|w| Share { a: w[0], b: w[1] })
                .collect())
        }
    }

    /// Uniformly random shared ring elements, no communication.
    pub fn rand_values(&mut self, n: usize) -> Vec<Share> {
        (0..n)
            .map(|_| Share {
                a: self.prg[0].next_u64(),
                b: self.prg[1].next_u64(),
            })
            .collect()
    }

    /// `n` uniformly random shared bits, unknown to every single peer.
    ///
    /// Component `j` contributes a bit drawn from `F_j`; the three bits are
    /// combined by two rounds of secure XOR, so any two peers together still
    /// miss one of them.
    pub fn rand_bits(&mut self, n: usize) -> Result<Vec<Share>, AbbError> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let me = self.me();
        // Bit j is shared with component j set to b_j and the others zero;
        // each peer knows two of the three bits.
        let mut b0 = Vec::with_capacity(n);
        let mut b1 = Vec::with_capacity(n);
        let mut b2 = Vec::with_capacity(n);
        for _ in 0..n {
            let own = self.prg[0].next_u64() & 1;
            let next = self.prg[1].next_u64() & 1;
            let mut comp = [None; 3];
            comp[me.index()] = Some(own);
            comp[(me.index() + 1) % 3] = Some(next);
            // Sharing of bit j: component j = b_j, the rest zero.
            let bit_share = |j: usize| -> Share {
                let v = comp[j].unwrap_or(0);
                Share {
                    a: if me.index() == j { v } else { 0 },
                    b: if (me.index() + 1) % 3 == j { v } else { 0 },
                }
            };
            b0.push(bit_share(0));
            b1.push(bit_share(1));
            b2.push(bit_share(2));
        }
        let t = self.xor_batch(&b0, &b1)?;
        let r = self.xor_batch(&t, &b2)?;
        self.stats.rand_bits += n as u64;
        Ok(r)
    }

    /// Secure XOR of shared bits: `x + y - 2xy`.
    pub fn xor_batch(&mut self, x: &[Share], y: &[Share]) -> Result<Vec<Share>, AbbError> {
        let p = self.mul_batch(x, y)?;
        Ok(x.iter()
            .zip(y)
            .zip(p)
            .map(|((&x, &y), p)| x + y - p * 2)
            .collect())
    }
}

/// Runs `f` on three in-process peers connected by the memory transport and
/// returns their results in peer order.
///
/// When several peers fail, the error reported is the first one that is not
/// a mere consequence of another peer hanging up.
pub fn run_local<F, R>(ring: Ring, seeds: SeedSource, f: F) -> Result<[R; 3], crate::Error>
where
    F: Fn(&mut Session) -> Result<R, crate::Error> + Sync,
    R: Send,
{
    let endpoints = crate::transport::memory::mesh();
    let results: Vec<Result<R, crate::Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|ep| {
                let f = &f;
                s.spawn(move || {
                    let mut session = Session::setup(ep, ring, seeds)?;
                    f(&mut session)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("peer thread panicked"))
            .collect()
    });
    if results.iter().any(Result::is_err) {
        let mut errs: Vec<crate::Error> = results.into_iter().filter_map(Result::err).collect();
        let pos = errs.iter().position(|e| !e.is_disconnect()).unwrap_or(0);
        return Err(errs.swap_remove(pos));
    }
    let mut it = results.into_iter().map(|r| r.ok().expect("checked above"));
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}
