//! Three in-process peers running the protocol, with a dealer standing in
//! for the hospitals.

use std::time::{Duration, Instant};

use super::{reveal, run_protocol, run_protocol_on_graph, ExchangeSolution, PhaseStats, ProtocolConfig};
use crate::abb::{run_local, Ring, SeedSource, Session, ShareMatrix};
use crate::compat::{share_quotes, CompatGraph, InputQuote};
use crate::oracle::PlainGraph;
use crate::transport::{PeerId, Transcript};

/// Outcome of a local run.
#[derive(Debug, Clone)]
pub struct LocalRun {
    pub solution: ExchangeSolution,
    pub transcripts: [Transcript; 3],
    pub stats: PhaseStats,
    pub elapsed: Duration,
}

impl LocalRun {
    pub fn total_bytes(&self) -> u64 {
        crate::transport::total_bytes(&self.transcripts)
    }
}

fn dealer() -> PeerId {
    PeerId::new(0).expect("peer 0")
}

/// Secret-shares a plaintext graph from `dealer`; the others pass `None`.
/// Weights of missing edges are dealt as zero.
pub fn deal_graph(
    s: &mut Session,
    dealer: PeerId,
    graph: Option<&PlainGraph>,
    n: usize,
) -> Result<CompatGraph, crate::Error> {
    let values = graph.map(|g| {
        let mut v: Vec<u64> = g.adjacency().iter().map(|&b| u64::from(b)).collect();
        v.extend((0..n * n).map(|k| g.masked_weight(k / n, k % n)));
        v
    });
    let shares = s.input(dealer, values.as_deref(), 2 * n * n)?;
    let (m, w) = shares.split_at(n * n);
    Ok(CompatGraph {
        m: ShareMatrix::from_vec(n, n, m.to_vec()),
        w: ShareMatrix::from_vec(n, n, w.to_vec()),
    })
}

/// Runs the full protocol on plaintext quotes dealt by peer 0 and reveals
/// the result.
pub fn run_local_quotes(
    cfg: &ProtocolConfig,
    quotes: &[InputQuote],
    ring: Ring,
    seeds: SeedSource,
) -> Result<LocalRun, crate::Error> {
    let start = Instant::now();
    let n = quotes.len();
    let out = run_local(ring, seeds, |s| {
        let me = s.me();
        let shared = share_quotes(s, dealer(), (me == dealer()).then_some(quotes), n, cfg.layout)?;
        let (sol, stats) = run_protocol(s, cfg, &shared)?;
        Ok((sol, stats, s.transcript().clone()))
    })?;
    finish(ring, out, start)
}

/// Runs the protocol on a plaintext graph dealt by peer 0 and reveals the
/// result.
pub fn run_local_graph(
    cfg: &ProtocolConfig,
    graph: &PlainGraph,
    ring: Ring,
    seeds: SeedSource,
) -> Result<LocalRun, crate::Error> {
    let start = Instant::now();
    let n = graph.n();
    let out = run_local(ring, seeds, |s| {
        let me = s.me();
        let g = deal_graph(s, dealer(), (me == dealer()).then_some(graph), n)?;
        let (sol, stats) = run_protocol_on_graph(s, cfg, g)?;
        Ok((sol, stats, s.transcript().clone()))
    })?;
    finish(ring, out, start)
}

fn finish(
    ring: Ring,
    out: [(super::SharedSolution, PhaseStats, Transcript); 3],
    start: Instant,
) -> Result<LocalRun, crate::Error> {
    let [a, b, c] = out;
    let stats = a.1;
    let solution = reveal(ring, &[a.0, b.0, c.0])
        .map_err(|e| super::ProtocolError::Config(format!("output reconstruction failed: {e}")))?;
    Ok(LocalRun {
        solution,
        transcripts: [a.2, b.2, c.2],
        stats,
        elapsed: start.elapsed(),
    })
}
