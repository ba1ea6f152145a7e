//! Ordered, length-delimited message channels between the three computing
//! peers.
//!
//! Every peer owns one [`Endpoint`]. An endpoint holds a [`Link`] to each of
//! the two other peers and drives the round structure used by the secure
//! computation layer: all peers call [`Endpoint::exchange_round`] in the same
//! order, each call advancing a shared round tag that travels with every
//! frame. A frame whose tag does not match the receiver's current round is a
//! protocol desynchronization and surfaces as [`TransportError::Desync`].
//!
//! Two backends are provided: [`memory`] (in-process channels, used by tests
//! and the local runner) and [`tcp`] (one TCP stream per peer pair). Both
//! carry byte-identical frames, see [`frame`].

pub mod frame;
pub mod memory;
pub mod tcp;
mod transcript;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use transcript::{summarize, total_bytes, Direction, Transcript, TranscriptEntry};

/// Number of computing peers in a session.
pub const PEERS: usize = 3;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("channel to peer {0} is closed")]
    ChannelClosed(PeerId),
    #[error("peer {peer} unreachable: {reason}")]
    PeerUnreachable { peer: PeerId, reason: String },
    #[error("round desync with peer {peer}: expected tag {expected}, received {received}")]
    Desync {
        peer: PeerId,
        expected: u32,
        received: u32,
    },
    #[error("malformed frame from peer {peer}: {reason}")]
    MalformedFrame { peer: PeerId, reason: String },
    #[error("empty payload")]
    EmptyPayload,
    #[error("invalid peer id {0}")]
    InvalidPeer(usize),
    #[error("peer {0} cannot address itself")]
    SelfAddressed(PeerId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identity of a computing peer, always in `{0, 1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct PeerId(u8);

impl PeerId {
    pub const ALL: [PeerId; PEERS] = [PeerId(0), PeerId(1), PeerId(2)];

    pub fn new(id: usize) -> Result<Self, TransportError> {
        if id < PEERS {
            Ok(PeerId(id as u8))
        } else {
            Err(TransportError::InvalidPeer(id))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The successor in the ring `0 -> 1 -> 2 -> 0`.
    pub fn next(self) -> PeerId {
        PeerId((self.0 + 1) % PEERS as u8)
    }

    /// The predecessor in the ring `0 -> 2 -> 1 -> 0`.
    pub fn prev(self) -> PeerId {
        PeerId((self.0 + PEERS as u8 - 1) % PEERS as u8)
    }

    /// The two peers other than `self`, in ascending order.
    pub fn others(self) -> [PeerId; 2] {
        let mut out = [self.next(), self.prev()];
        out.sort();
        out
    }
}

impl TryFrom<usize> for PeerId {
    type Error = TransportError;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        PeerId::new(value)
    }
}

impl From<PeerId> for usize {
    fn from(value: PeerId) -> Self {
        value.index()
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A reliable, ordered, bidirectional byte-frame channel to one other peer.
///
/// Implementations carry complete encoded frames (header included); framing
/// and tag checks are done by [`Endpoint`].
pub trait Link: Send {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError>;
    fn recv_frame(&mut self) -> Result<Vec<u8>, TransportError>;
    fn close(&mut self);
}

/// One peer's view of the session network.
pub struct Endpoint {
    me: PeerId,
    links: [Option<Box<dyn Link>>; PEERS],
    round: u32,
    closed: bool,
    transcript: Transcript,
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Endpoint")
            .field("me", &self.me)
            .field("round", &self.round)
            .field("closed", &self.closed)
            .finish()
    }
}

impl Endpoint {
    /// Builds an endpoint from links indexed by peer id. The slot for `me`
    /// must be `None`.
    pub fn new(me: PeerId, links: [Option<Box<dyn Link>>; PEERS]) -> Self {
        debug_assert!(links[me.index()].is_none());
        Endpoint {
            me,
            links,
            round: 0,
            closed: false,
            transcript: Transcript::new(me),
        }
    }

    pub fn me(&self) -> PeerId {
        self.me
    }

    /// Tag of the most recently started round (0 before the first round).
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(mut self) -> Transcript {
        self.close();
        std::mem::replace(&mut self.transcript, Transcript::new(self.me))
    }

    /// Sends a single payload to `to` as its own round.
    ///
    /// The receiving peer must issue the matching [`Endpoint::recv`] so both
    /// sides advance their round tags together.
    pub fn send(&mut self, to: PeerId, payload: &[u8]) -> Result<(), TransportError> {
        if payload.is_empty() {
            return Err(TransportError::EmptyPayload);
        }
        self.check_open(to)?;
        self.round += 1;
        self.send_tagged(to, payload)
    }

    /// Receives a single payload from `from` as its own round.
    pub fn recv(&mut self, from: PeerId) -> Result<Vec<u8>, TransportError> {
        self.check_open(from)?;
        self.round += 1;
        self.recv_tagged(from)
    }

    /// Runs one communication round: sends every outgoing payload, then
    /// blocks until one frame from each peer in `expect` has arrived.
    ///
    /// All peers must call this the same number of times in the same order.
    /// Empty payloads are legal inside a round (they still produce a frame).
    pub fn exchange_round(
        &mut self,
        outgoing: BTreeMap<PeerId, Vec<u8>>,
        expect: &[PeerId],
    ) -> Result<BTreeMap<PeerId, Vec<u8>>, TransportError> {
        self.round += 1;
        for to in outgoing.keys().chain(expect) {
            self.check_open(*to)?;
        }
        for (to, payload) in &outgoing {
            self.send_tagged(*to, payload)?;
        }
        let mut incoming = BTreeMap::new();
        for &from in expect {
            let payload = self.recv_tagged(from)?;
            incoming.insert(from, payload);
        }
        Ok(incoming)
    }

    /// Closes every link. Further sends fail with
    /// [`TransportError::ChannelClosed`].
    pub fn close(&mut self) {
        if self.closed {
            return;
        }
        self.closed = true;
        for link in self.links.iter_mut().flatten() {
            link.close();
        }
    }

    fn check_open(&self, peer: PeerId) -> Result<(), TransportError> {
        if peer == self.me {
            return Err(TransportError::SelfAddressed(peer));
        }
        if self.closed || self.links[peer.index()].is_none() {
            return Err(TransportError::ChannelClosed(peer));
        }
        Ok(())
    }

    fn send_tagged(&mut self, to: PeerId, payload: &[u8]) -> Result<(), TransportError> {
        let frame = frame::encode(self.round, payload);
        let link = self.links[to.index()]
            .as_mut()
            .ok_or(TransportError::ChannelClosed(to))?;
        link.send_frame(frame)?;
        self.transcript
            .push(self.round, Direction::Out, to, payload.len() as u64);
        Ok(())
    }

    fn recv_tagged(&mut self, from: PeerId) -> Result<Vec<u8>, TransportError> {
        let link = self.links[from.index()]
            .as_mut()
            .ok_or(TransportError::ChannelClosed(from))?;
        let raw = link.recv_frame()?;
        let (tag, payload) = frame::decode(&raw).map_err(|reason| TransportError::MalformedFrame {
            peer: from,
            reason,
        })?;
        if tag != self.round {
            return Err(TransportError::Desync {
                peer: from,
                expected: self.round,
                received: tag,
            });
        }
        self.transcript
            .push(self.round, Direction::In, from, payload.len() as u64);
        Ok(payload.to_vec())
    }
}

impl Drop for Endpoint {
    fn drop(&mut self) {
        self.close();
    }
}

/// Packs ring elements as little-endian 8-byte words.
pub fn pack_u64s(values: impl IntoIterator<Item = u64>) -> Vec<u8> {
    let iter = values.into_iter();
    let mut out = Vec::with_capacity(iter.size_hint().0 * 8);
    for v in iter {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Inverse of [`pack_u64s`]; checks the word count.
pub fn unpack_u64s(
    peer: PeerId,
    bytes: &[u8],
    expected: usize,
) -> Result<Vec<u64>, TransportError> {
    if bytes.len() != expected * 8 {
        return Err(TransportError::MalformedFrame {
            peer,
            reason: format!("expected {} words, got {} bytes", expected, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peer_ring_neighbours() {
        let p = PeerId::new(0).unwrap();
        assert_eq!(p.next().index(), 1);
        assert_eq!(p.prev().index(), 2);
        assert_eq!(PeerId::new(2).unwrap().next().index(), 0);
        assert_eq!(PeerId::new(1).unwrap().others(), [PeerId(0), PeerId(2)]);
        assert!(PeerId::new(3).is_err());
    }

    #[test]
    fn pack_roundtrip_and_length_check() {
        let bytes = pack_u64s([1, u64::MAX, 42]);
        assert_eq!(bytes.len(), 24);
        let p = PeerId::new(1).unwrap();
        assert_eq!(unpack_u64s(p, &bytes, 3).unwrap(), vec![1, u64::MAX, 42]);
        assert!(unpack_u64s(p, &bytes, 2).is_err());
    }
}
