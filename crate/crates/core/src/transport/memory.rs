//! In-process backend built on `std::sync::mpsc` channels.

use std::sync::mpsc::{channel, Receiver, Sender};

use super::{Endpoint, Link, PeerId, TransportError, PEERS};

pub struct MemoryLink {
    peer: PeerId,
    tx: Option<Sender<Vec<u8>>>,
    rx: Receiver<Vec<u8>>,
}

impl Link for MemoryLink {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        let tx = self
            .tx
            .as_ref()
            .ok_or(TransportError::ChannelClosed(self.peer))?;
        tx.send(frame)
            .map_err(|_| TransportError::ChannelClosed(self.peer))
    }

    fn recv_frame(&mut self) -> Result<Vec<u8>, TransportError> {
        self.rx
            .recv()
            .map_err(|_| TransportError::ChannelClosed(self.peer))
    }

    fn close(&mut self) {
        self.tx = None;
    }
}

/// Creates three fully connected endpoints, indexed by peer id.
pub fn mesh() -> [Endpoint; PEERS] {
    let mut slots: [[Option<Box<dyn Link>>; PEERS]; PEERS] = Default::default();
    for a in 0..PEERS {
        for b in (a + 1)..PEERS {
            let (tx_ab, rx_ab) = channel();
            let (tx_ba, rx_ba) = channel();
            let pa = PeerId::ALL[a];
            let pb = PeerId::ALL[b];
            slots[a][b] = Some(Box::new(MemoryLink {
                peer: pb,
                tx: Some(tx_ab),
                rx: rx_ba,
            }));
            slots[b][a] = Some(Box::new(MemoryLink {
                peer: pa,
                tx: Some(tx_ba),
                rx: rx_ab,
            }));
        }
    }
    let [s0, s1, s2] = slots;
    [
        Endpoint::new(PeerId::ALL[0], s0),
        Endpoint::new(PeerId::ALL[1], s1),
        Endpoint::new(PeerId::ALL[2], s2),
    ]
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::transport::{frame, summarize, Direction};

    fn p(i: usize) -> PeerId {
        PeerId::new(i).unwrap()
    }

    #[test]
    fn send_records_outgoing_entry() {
        let [mut e0, mut e1, _e2] = mesh();
        e0.send(p(1), &[7u8; 8]).unwrap();
        let got = e1.recv(p(0)).unwrap();
        assert_eq!(got, vec![7u8; 8]);
        let entry = &e0.transcript().entries()[0];
        assert_eq!(entry.direction, Direction::Out);
        assert_eq!(entry.bytes, 8);
        assert_eq!(entry.round_tag, 1);
    }

    #[test]
    fn sends_arrive_in_order() {
        let [mut e0, mut e1, _e2] = mesh();
        e0.send(p(1), b"first").unwrap();
        e0.send(p(1), b"second").unwrap();
        assert_eq!(e1.recv(p(0)).unwrap(), b"first");
        assert_eq!(e1.recv(p(0)).unwrap(), b"second");
    }

    #[test]
    fn send_after_close_fails() {
        let [mut e0, _e1, _e2] = mesh();
        e0.close();
        assert!(matches!(
            e0.send(p(1), b"x"),
            Err(TransportError::ChannelClosed(_))
        ));
        assert!(matches!(e0.send(p(2), b""), Err(TransportError::EmptyPayload)));
    }

    #[test]
    fn recv_from_closed_peer_fails() {
        let [mut e0, e1, _e2] = mesh();
        drop(e1);
        assert!(matches!(
            e0.recv(p(1)),
            Err(TransportError::ChannelClosed(_))
        ));
    }

    #[test]
    fn full_round_exchanges_all_payloads() {
        let endpoints = mesh();
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = endpoints
                .into_iter()
                .map(|mut ep| {
                    s.spawn(move || {
                        let me = ep.me();
                        let others = me.others();
                        let out: BTreeMap<_, _> =
                            others.iter().map(|&o| (o, vec![me.index() as u8; 16])).collect();
                        let got = ep.exchange_round(out, &others).unwrap();
                        (ep.into_transcript(), got)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (t, got) in &results {
            assert_eq!(got.len(), 2);
            for (from, bytes) in got {
                assert_eq!(bytes, &vec![from.index() as u8; 16]);
            }
            assert_eq!(t.bytes_sent(), 32);
        }
        let ts: Vec<_> = results.into_iter().map(|(t, _)| t).collect();
        assert_eq!(summarize(&ts), vec![(1, 96)]);
    }

    #[test]
    fn empty_round_returns_immediately() {
        let [mut e0, _e1, _e2] = mesh();
        let got = e0.exchange_round(BTreeMap::new(), &[]).unwrap();
        assert!(got.is_empty());
        assert!(e0.transcript().entries().is_empty());
    }

    #[test]
    fn mismatched_tag_is_desync() {
        let [mut e0, mut e1, _e2] = mesh();
        // Peer 0 skips one round, so its next frame carries tag 2.
        e0.exchange_round(BTreeMap::new(), &[]).unwrap();
        e0.send(p(1), b"late").unwrap();
        let err = e1.recv(p(0)).unwrap_err();
        assert!(matches!(
            err,
            TransportError::Desync {
                expected: 1,
                received: 2,
                ..
            }
        ));
    }

    #[test]
    fn frames_are_canonical() {
        assert_eq!(frame::encode(1, &[1, 2]).len(), frame::HEADER_LEN + 2);
    }
}
