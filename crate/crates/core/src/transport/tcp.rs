//! TCP backend: one stream per peer pair.
//!
//! Peer `i` listens on its own address. Every peer connects to each
//! lower-numbered peer and introduces itself with a 4-byte hello carrying its
//! id, and accepts connections from the higher-numbered peers. Each stream is
//! drained by a reader thread so that two peers writing large frames to each
//! other at the same time cannot deadlock on full socket buffers.

use std::io::{Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver};
use std::thread;
use std::time::{Duration, Instant};

use super::frame::{self, HEADER_LEN};
use super::{Endpoint, Link, PeerId, TransportError, PEERS};

pub struct TcpLink {
    peer: PeerId,
    stream: Option<TcpStream>,
    rx: Receiver<Result<Vec<u8>, String>>,
}

impl Link for TcpLink {
    fn send_frame(&mut self, frame: Vec<u8>) -> Result<(), TransportError> {
        let stream = self
            .stream
            .as_mut()
            .ok_or(TransportError::ChannelClosed(self.peer))?;
        stream
            .write_all(&frame)
            .map_err(|_| TransportError::ChannelClosed(self.peer))
    }

    fn recv_frame(&mut self) -> Result<Vec<u8>, TransportError> {
        match self.rx.recv() {
            Ok(Ok(frame)) => Ok(frame),
            Ok(Err(reason)) => Err(TransportError::MalformedFrame {
                peer: self.peer,
                reason,
            }),
            Err(_) => Err(TransportError::ChannelClosed(self.peer)),
        }
    }

    fn close(&mut self) {
        if let Some(stream) = self.stream.take() {
            let _ = stream.shutdown(Shutdown::Write);
        }
    }
}

fn spawn_reader(peer: PeerId, mut stream: TcpStream) -> Receiver<Result<Vec<u8>, String>> {
    let (tx, rx) = channel();
    thread::Builder::new()
        .name(format!("tcp-reader-{peer}"))
        .spawn(move || loop {
            let mut header = [0u8; HEADER_LEN];
            if stream.read_exact(&mut header).is_err() {
                return;
            }
            let (len, _) = frame::decode_header(&header);
            let mut buf = vec![0u8; HEADER_LEN + len];
            buf[..HEADER_LEN].copy_from_slice(&header);
            if let Err(e) = stream.read_exact(&mut buf[HEADER_LEN..]) {
                let _ = tx.send(Err(format!("truncated frame: {e}")));
                return;
            }
            if tx.send(Ok(buf)).is_err() {
                return;
            }
        })
        .expect("spawn reader thread");
    rx
}

fn link(peer: PeerId, stream: TcpStream) -> Result<Box<dyn Link>, TransportError> {
    stream.set_nodelay(true)?;
    let reader = stream.try_clone()?;
    Ok(Box::new(TcpLink {
        peer,
        stream: Some(stream),
        rx: spawn_reader(peer, reader),
    }))
}

/// Establishes this peer's connections. `addrs` lists the listen address of
/// every peer, indexed by id; connection attempts are retried until
/// `timeout` elapses.
pub fn connect(
    me: PeerId,
    addrs: &[SocketAddr; PEERS],
    timeout: Duration,
) -> Result<Endpoint, TransportError> {
    let listener = TcpListener::bind(addrs[me.index()])?;
    connect_with_listener(me, listener, addrs, timeout)
}

/// Like [`connect`] but with an already bound listener (useful with port 0).
pub fn connect_with_listener(
    me: PeerId,
    listener: TcpListener,
    addrs: &[SocketAddr; PEERS],
    timeout: Duration,
) -> Result<Endpoint, TransportError> {
    let deadline = Instant::now() + timeout;
    let mut links: [Option<Box<dyn Link>>; PEERS] = Default::default();

    for lower in (0..me.index()).map(|i| PeerId::ALL[i]) {
        let stream = dial(lower, addrs[lower.index()], deadline)?;
        let mut s = stream.try_clone()?;
        s.write_all(&(me.index() as u32).to_le_bytes())?;
        links[lower.index()] = Some(link(lower, stream)?);
    }

    let higher = PEERS - 1 - me.index();
    listener.set_nonblocking(true)?;
    let mut accepted = 0;
    while accepted < higher {
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                stream.set_read_timeout(Some(remaining(deadline, me)?))?;
                let mut hello = [0u8; 4];
                let mut s = stream.try_clone()?;
                s.read_exact(&mut hello)?;
                stream.set_read_timeout(None)?;
                let id = u32::from_le_bytes(hello) as usize;
                let peer = PeerId::new(id)?;
                if peer <= me || links[peer.index()].is_some() {
                    return Err(TransportError::PeerUnreachable {
                        peer,
                        reason: "unexpected hello".into(),
                    });
                }
                links[peer.index()] = Some(link(peer, stream)?);
                accepted += 1;
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    let missing = (me.index() + 1..PEERS)
                        .map(|i| PeerId::ALL[i])
                        .find(|p| links[p.index()].is_none())
                        .unwrap_or(me);
                    return Err(TransportError::PeerUnreachable {
                        peer: missing,
                        reason: "timed out waiting for connection".into(),
                    });
                }
                thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Endpoint::new(me, links))
}

fn remaining(deadline: Instant, me: PeerId) -> Result<Duration, TransportError> {
    deadline
        .checked_duration_since(Instant::now())
        .filter(|d| !d.is_zero())
        .ok_or(TransportError::PeerUnreachable {
            peer: me,
            reason: "connection deadline passed".into(),
        })
}

fn dial(peer: PeerId, addr: SocketAddr, deadline: Instant) -> Result<TcpStream, TransportError> {
    loop {
        match TcpStream::connect_timeout(&addr, Duration::from_millis(500)) {
            Ok(s) => return Ok(s),
            Err(e) => {
                if Instant::now() >= deadline {
                    return Err(TransportError::PeerUnreachable {
                        peer,
                        reason: format!("{addr}: {e}"),
                    });
                }
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    #[test]
    fn tcp_round_matches_memory_transcript() {
        let listeners: Vec<TcpListener> = (0..PEERS)
            .map(|_| TcpListener::bind("127.0.0.1:0").unwrap())
            .collect();
        let addrs: [SocketAddr; PEERS] = [
            listeners[0].local_addr().unwrap(),
            listeners[1].local_addr().unwrap(),
            listeners[2].local_addr().unwrap(),
        ];
        let transcripts: Vec<_> = thread::scope(|s| {
            let handles: Vec<_> = listeners
                .into_iter()
                .enumerate()
                .map(|(i, l)| {
                    let addrs = &addrs;
                    s.spawn(move || {
                        let me = PeerId::ALL[i];
                        let mut ep =
                            connect_with_listener(me, l, addrs, Duration::from_secs(10)).unwrap();
                        for round in 0..3u8 {
                            let out: BTreeMap<_, _> = me
                                .others()
                                .iter()
                                .map(|&o| (o, vec![round; 1 << 16]))
                                .collect();
                            let got = ep.exchange_round(out, &me.others()).unwrap();
                            assert!(got.values().all(|v| v == &vec![round; 1 << 16]));
                        }
                        ep.into_transcript()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let summary = super::super::summarize(&transcripts);
        assert_eq!(summary.len(), 3);
        assert!(summary.iter().all(|&(_, b)| b == 6 << 16));
    }

    #[test]
    fn unreachable_peer_times_out() {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let dead = TcpListener::bind("127.0.0.1:0").unwrap();
        let dead_addr = dead.local_addr().unwrap();
        drop(dead);
        let addrs = [dead_addr, dead_addr, l.local_addr().unwrap()];
        let err = connect_with_listener(PeerId::ALL[2], l, &addrs, Duration::from_millis(300))
            .unwrap_err();
        assert!(matches!(err, TransportError::PeerUnreachable { .. }));
    }
}
