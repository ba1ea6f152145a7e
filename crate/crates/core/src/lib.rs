//! Privacy-preserving kidney exchange.
//!
//! Three computing peers hold replicated secret shares of every pair's
//! medical record and jointly run a greedy cycle-packing algorithm without
//! any peer learning the inputs. The crate contains:
//!
//! * [`transport`]: framed, round-tagged channels between the peers.
//! * [`abb`]: the secret-sharing engine (addition, multiplication, opening).
//! * [`gates`]: comparison, selection, demultiplexing, shuffling and the
//!   maximum-weight subset reduction built on top of the engine.
//! * [`compat`]: secure construction of the compatibility graph.
//! * [`protocol`]: the full matching protocol and a local three-peer runner.
//! * [`oracle`]: plaintext greedy and exact solvers, validation and quality.
//! * [`datagen`]: a synthetic population of patient-donor pairs.
//! * [`formats`]: quote, graph and solution file formats.

pub mod abb;
pub mod compat;
pub mod datagen;
pub mod formats;
pub mod gates;
pub mod oracle;
pub mod protocol;
pub mod transport;

#[cfg(doctest)]
mod book;

use thiserror::Error;

/// Error type spanning every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Transport(#[from] transport::TransportError),
    #[error(transparent)]
    Abb(#[from] abb::AbbError),
    #[error(transparent)]
    Gate(#[from] gates::GateError),
    #[error(transparent)]
    Compat(#[from] compat::CompatError),
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
}

impl Error {
    /// True when the error only reports that another peer went away.
    pub fn is_disconnect(&self) -> bool {
        match self {
            Error::Transport(t) => matches!(t, transport::TransportError::ChannelClosed(_)),
            Error::Abb(a) => a.is_disconnect(),
            Error::Gate(g) => g.is_disconnect(),
            Error::Compat(c) => c.is_disconnect(),
            Error::Protocol(p) => p.is_disconnect(),
        }
    }
}
