//! The greedy matching protocol, run by each of the three peers.
//!
//! Phases, in order:
//!
//! 1. construction: build the secret compatibility graph and relabel its
//!    nodes with a hidden permutation;
//! 2. evaluation: compute the weight of every candidate subset and which
//!    orientation of a triple to use;
//! 3. approximation: `floor(N/2)` rounds of picking the heaviest subset and
//!    zeroing every subset that shares a node with it;
//! 4. resolution: turn chosen subsets into an adjacency matrix, undo the
//!    relabeling and compute each pair's donor and recipient index.
//!
//! Every phase runs the same sequence of operations whatever the input, so
//! transcripts depend only on the public configuration.

mod local;
mod solution;
pub mod subsets;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abb::{AbbError, Session, Share, ShareMatrix};
use crate::compat::{build_graph, CompatError, CompatGraph, PrioPolicy, QuoteLayout, SharedQuote};
use crate::gates::{
    bit_length, demux_batch, gt_batch, max_weight_set, rev_shuffle, select_batch, shuffle_nodes,
    GateError, PermutationHandle, ShuffleMode, SubsetEncoding,
};
use crate::transport::TransportError;

pub use local::{deal_graph, run_local_graph, run_local_quotes, LocalRun};
pub use solution::{reveal, ExchangeSolution, SharedSolution, SolutionError};
pub use subsets::{binom, subset_count, PublicSubsets};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Compat(#[from] CompatError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("peer {peer} runs a different configuration")]
    ConfigMismatch { peer: usize },
}

impl ProtocolError {
    pub fn is_disconnect(&self) -> bool {
        match self {
            ProtocolError::Gate(g) => g.is_disconnect(),
            ProtocolError::Compat(c) => c.is_disconnect(),
            _ => false,
        }
    }
}

impl From<AbbError> for ProtocolError {
    fn from(e: AbbError) -> Self {
        ProtocolError::Gate(e.into())
    }
}

impl From<TransportError> for ProtocolError {
    fn from(e: TransportError) -> Self {
        ProtocolError::Gate(GateError::Abb(e.into()))
    }
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Public parameters every peer must agree on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Number of patient-donor pairs.
    pub n: usize,
    /// Maximum cycle length, 2 or 3.
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default = "default_shuffle")]
    pub shuffle: ShuffleMode,
    #[serde(default)]
    pub policy: PrioPolicy,
    #[serde(default = "default_w_max")]
    pub w_max: u64,
    #[serde(default)]
    pub layout: QuoteLayout,
    /// Public seed for a pseudo-random subset order; canonical order when
    /// absent.
    #[serde(default)]
    pub subset_shuffle: Option<u64>,
}

fn default_kappa() -> usize {
    3
}

fn default_shuffle() -> ShuffleMode {
    ShuffleMode::Random
}

fn default_w_max() -> u64 {
    crate::compat::DEFAULT_W_MAX
}

impl ProtocolConfig {
    pub fn new(n: usize) -> Self {
        ProtocolConfig {
            n,
            kappa: default_kappa(),
            shuffle: default_shuffle(),
            policy: PrioPolicy::default(),
            w_max: default_w_max(),
            layout: QuoteLayout::default(),
            subset_shuffle: None,
        }
    }

    pub fn with_kappa(mut self, kappa: usize) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_shuffle(mut self, mode: ShuffleMode) -> Self {
        self.shuffle = mode;
        self
    }

    pub fn with_policy(mut self, policy: PrioPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Width of every weight comparison: a triple's weight is at most
    /// `3 * w_max`, and the reduction compares `weight + 1`.
    pub fn compare_bits(&self) -> u32 {
        bit_length((3 * self.w_max + 1) as usize)
    }

    pub fn subsets(&self) -> PublicSubsets {
        match self.subset_shuffle {
            Some(seed) => PublicSubsets::shuffled(self.n, self.kappa, seed),
            None => PublicSubsets::build(self.n, self.kappa),
        }
    }

    pub fn check(&self, ring_bits: u32) -> Result<()> {
        if self.n < 2 {
            return Err(ProtocolError::Config(format!("need at least 2 pairs, got {}", self.n)));
        }
        if self.kappa != 2 && self.kappa != 3 {
            return Err(ProtocolError::Config(format!(
                "cycle length bound must be 2 or 3, got {}",
                self.kappa
            )));
        }
        if self.w_max == 0 || self.w_max > (1 << 40) {
            return Err(ProtocolError::Config(format!("w_max {} out of range", self.w_max)));
        }
        if self.compare_bits() + 2 > ring_bits {
            return Err(ProtocolError::Config(format!(
                "w_max {} needs {}-bit comparisons, too wide for a {}-bit ring",
                self.w_max,
                self.compare_bits(),
                ring_bits
            )));
        }
        self.policy.check(self.w_max)?;
        Ok(())
    }
}

/// Secret state carried between the phases.
#[derive(Debug, Clone)]
pub struct ProtocolState {
    pub subsets: PublicSubsets,
    pub weights: Vec<Share>,
    /// 1 when a triple is used in its first orientation `u -> v -> w`.
    pub choose_first: Vec<Share>,
    pub chosen: Vec<Share>,
}

/// Counters describing one protocol run at one peer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub subsets: usize,
    pub iterations: usize,
    pub max_weight_calls: usize,
    pub rounds: usize,
    pub bytes_sent: u64,
}

/// Exchanges the serialized configuration with both other peers and fails
/// if either differs.
pub fn agree_on_config(s: &mut Session, cfg: &ProtocolConfig) -> Result<()> {
    let me = s.me();
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    let mut out = BTreeMap::new();
    for p in me.others() {
        out.insert(p, bytes.clone());
    }
    let got = s.endpoint().exchange_round(out, &me.others())?;
    for (peer, theirs) in got {
        if theirs != bytes {
            return Err(ProtocolError::ConfigMismatch { peer: peer.index() });
        }
    }
    Ok(())
}

/// Builds the graph from shared quotes and relabels its nodes.
pub fn construction_phase(
    s: &mut Session,
    cfg: &ProtocolConfig,
    quotes: &[SharedQuote],
) -> Result<(CompatGraph, PermutationHandle)> {
    if quotes.len() != cfg.n {
        return Err(ProtocolError::Config(format!(
            "configured for {} pairs, got {} quotes",
            cfg.n,
            quotes.len()
        )));
    }
    let graph = build_graph(s, quotes, &cfg.policy, cfg.w_max)?;
    shuffle_graph(s, cfg, graph)
}

/// Relabels an already built graph.
pub fn shuffle_graph(
    s: &mut Session,
    cfg: &ProtocolConfig,
    graph: CompatGraph,
) -> Result<(CompatGraph, PermutationHandle)> {
    let (mut mats, handle) = shuffle_nodes(s, &[graph.m, graph.w], cfg.shuffle)?;
    let w = mats.pop().expect("two matrices");
    let m = mats.pop().expect("two matrices");
    Ok((CompatGraph { m, w }, handle))
}

/// Subset weights and orientation bits. Two multiplication rounds and one
/// comparison batch for all subsets.
pub fn evaluation_phase(
    s: &mut Session,
    cfg: &ProtocolConfig,
    graph: &CompatGraph,
    subsets: PublicSubsets,
) -> Result<ProtocolState> {
    let n = cfg.n;
    let (m, w) = (&graph.m, &graph.w);
    let me = s.me();

    // Round 1: for a triple, M(u,v)M(v,w) and M(w,u)(edge weight sum) for
    // each orientation; for a pair, M(v,u)(W(u,v)+W(v,u)).
    let mut x1 = Vec::new();
    let mut y1 = Vec::new();
    for &[u, v, t] in subsets.nodes() {
        if t == n {
            x1.push(m.get(v, u));
            y1.push(w.get(u, v) + w.get(v, u));
        } else {
            let (a, b, c) = (u, v, t);
            x1.push(m.get(a, b));
            y1.push(m.get(b, c));
            x1.push(m.get(c, a));
            y1.push(w.get(a, b) + w.get(b, c) + w.get(c, a));
            x1.push(m.get(a, c));
            y1.push(m.get(c, b));
            x1.push(m.get(b, a));
            y1.push(w.get(a, c) + w.get(c, b) + w.get(b, a));
        }
    }
    let r1 = s.mul_batch(&x1, &y1)?;

    // Round 2: combine the halves; a pair multiplies in M(u,v).
    let mut x2 = Vec::new();
    let mut y2 = Vec::new();
    let mut cur = 0;
    for &[u, v, t] in subsets.nodes() {
        if t == n {
            x2.push(m.get(u, v));
            y2.push(r1[cur]);
            cur += 1;
        } else {
            x2.push(r1[cur]);
            y2.push(r1[cur + 1]);
            x2.push(r1[cur + 2]);
            y2.push(r1[cur + 3]);
            cur += 4;
        }
    }
    let r2 = s.mul_batch(&x2, &y2)?;

    // choose_first = first >= second = NOT (second > first).
    let mut firsts = Vec::new();
    let mut seconds = Vec::new();
    let mut cur = 0;
    for &[_, _, t] in subsets.nodes() {
        if t == n {
            cur += 1;
        } else {
            firsts.push(r2[cur]);
            seconds.push(r2[cur + 1]);
            cur += 2;
        }
    }
    let second_wins = gt_batch(s, &seconds, &firsts, cfg.compare_bits())?;
    let choose_first_triples: Vec<Share> = second_wins.iter().map(|b| b.not(me)).collect();
    let picked = select_batch(s, &choose_first_triples, &firsts, &seconds)?;

    let mut weights = Vec::with_capacity(subsets.len());
    let mut choose_first = Vec::with_capacity(subsets.len());
    let (mut cur, mut tri) = (0, 0);
    for &[_, _, t] in subsets.nodes() {
        if t == n {
            weights.push(r2[cur]);
            choose_first.push(s.public(1));
            cur += 1;
        } else {
            weights.push(picked[tri]);
            choose_first.push(choose_first_triples[tri]);
            tri += 1;
            cur += 2;
        }
    }
    let len = subsets.len();
    Ok(ProtocolState {
        subsets,
        weights,
        choose_first,
        chosen: vec![Share::ZERO; len],
    })
}

/// `floor(N/2)` selection rounds. Returns the number of reductions run.
pub fn approximation_phase(
    s: &mut Session,
    cfg: &ProtocolConfig,
    state: &mut ProtocolState,
) -> Result<usize> {
    let n = cfg.n;
    let s_size = state.subsets.len();
    let bits = cfg.compare_bits();
    let iterations = n / 2;
    let me = s.me();
    let mut enc = SubsetEncoding {
        indices: (0..s_size).map(|i| s.public(i as u64)).collect(),
        nodes: state
            .subsets
            .nodes()
            .iter()
            .map(|t| t.map(|x| s.public(x as u64)))
            .collect(),
        weights: Vec::new(),
    };
    for it in 0..iterations {
        enc.weights = state.weights.clone();
        let best = max_weight_set(s, &enc, s_size, n, bits)?;
        let last = it + 1 == iterations;
        let mut reqs = vec![(best.index, s_size)];
        if !last {
            reqs.extend(best.nodes.iter().map(|&v| (v, n)));
        }
        let mut ind = demux_batch(s, &reqs)?.into_iter();
        for (c, x) in state.chosen.iter_mut().zip(ind.next().expect("index indicator")) {
            *c += x;
        }
        if last {
            break;
        }
        let mut comb = vec![Share::ZERO; n];
        for node_ind in ind {
            for (c, x) in comb.iter_mut().zip(node_ind) {
                *c += x;
            }
        }
        let keep: Vec<Share> = comb.iter().map(|c| c.not(me)).collect();

        // weight * keep(u) * keep(v) [* keep(w)], two rounds.
        let mut x1 = Vec::with_capacity(2 * s_size);
        let mut y1 = Vec::with_capacity(2 * s_size);
        for (i, &[u, v, t]) in state.subsets.nodes().iter().enumerate() {
            x1.push(keep[u]);
            y1.push(keep[v]);
            if t != n {
                x1.push(state.weights[i]);
                y1.push(keep[t]);
            }
        }
        let r1 = s.mul_batch(&x1, &y1)?;
        let mut x2 = Vec::with_capacity(s_size);
        let mut y2 = Vec::with_capacity(s_size);
        let mut cur = 0;
        for (i, &[_, _, t]) in state.subsets.nodes().iter().enumerate() {
            if t == n {
                x2.push(r1[cur]);
                y2.push(state.weights[i]);
                cur += 1;
            } else {
                x2.push(r1[cur]);
                y2.push(r1[cur + 1]);
                cur += 2;
            }
        }
        state.weights = s.mul_batch(&x2, &y2)?;
    }
    Ok(iterations)
}

/// Adjacency of the chosen cycles in the original labeling, and each
/// pair's 1-based donor and recipient index.
pub fn resolution_phase(
    s: &mut Session,
    cfg: &ProtocolConfig,
    state: &ProtocolState,
    handle: &PermutationHandle,
) -> Result<SharedSolution> {
    let n = cfg.n;
    let nodes = state.subsets.nodes();
    let triples: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i][2] != n).collect();
    let zs: Vec<Share> = triples.iter().map(|&i| state.choose_first[i]).collect();
    let cs: Vec<Share> = triples.iter().map(|&i| state.chosen[i]).collect();
    let first = s.mul_batch(&zs, &cs)?;

    let mut a = ShareMatrix::zeros(n, n);
    let add = |a: &mut ShareMatrix, i: usize, j: usize, x: Share| {
        let cur = a.get(i, j);
        a.set(i, j, cur + x);
    };
    let mut tri = 0;
    for (i, &[u, v, t]) in nodes.iter().enumerate() {
        let c = state.chosen[i];
        if t == n {
            add(&mut a, u, v, c);
            add(&mut a, v, u, c);
        } else {
            let map0 = first[tri];
            let map1 = c - map0;
            tri += 1;
            add(&mut a, u, v, map0);
            add(&mut a, v, t, map0);
            add(&mut a, t, u, map0);
            add(&mut a, u, t, map1);
            add(&mut a, t, v, map1);
            add(&mut a, v, u, map1);
        }
    }
    let a = rev_shuffle(s, &a, handle)?;
    let mut donor = vec![Share::ZERO; n];
    let mut recipient = vec![Share::ZERO; n];
    for i in 0..n {
        for j in 0..n {
            donor[i] += a.get(j, i) * (j as u64 + 1);
            recipient[i] += a.get(i, j) * (j as u64 + 1);
        }
    }
    Ok(SharedSolution { donor, recipient })
}

/// Evaluation, approximation and resolution on a relabeled graph.
pub fn solve_shuffled(
    s: &mut Session,
    cfg: &ProtocolConfig,
    graph: &CompatGraph,
    handle: &PermutationHandle,
) -> Result<(SharedSolution, PhaseStats)> {
    let rounds_before = s.transcript().rounds();
    let mut state = evaluation_phase(s, cfg, graph, cfg.subsets())?;
    let iterations = approximation_phase(s, cfg, &mut state)?;
    let sol = resolution_phase(s, cfg, &state, handle)?;
    let stats = PhaseStats {
        subsets: state.subsets.len(),
        iterations,
        max_weight_calls: iterations,
        rounds: s.transcript().rounds() - rounds_before,
        bytes_sent: 0,
    };
    Ok((sol, stats))
}

/// The whole protocol from shared quotes to shared output.
pub fn run_protocol(
    s: &mut Session,
    cfg: &ProtocolConfig,
    quotes: &[SharedQuote],
) -> Result<(SharedSolution, PhaseStats)> {
    cfg.check(s.ring().k())?;
    agree_on_config(s, cfg)?;
    let start = s.transcript().rounds();
    let (graph, handle) = construction_phase(s, cfg, quotes)?;
    let (sol, mut stats) = solve_shuffled(s, cfg, &graph, &handle)?;
    stats.rounds = s.transcript().rounds() - start;
    stats.bytes_sent = s.transcript().bytes_sent();
    Ok((sol, stats))
}

/// The protocol on an already shared graph, skipping quote evaluation.
pub fn run_protocol_on_graph(
    s: &mut Session,
    cfg: &ProtocolConfig,
    graph: CompatGraph,
) -> Result<(SharedSolution, PhaseStats)> {
    cfg.check(s.ring().k())?;
    if graph.n() != cfg.n {
        return Err(ProtocolError::Config(format!(
            "configured for {} pairs, graph has {}",
            cfg.n,
            graph.n()
        )));
    }
    agree_on_config(s, cfg)?;
    let start = s.transcript().rounds();
    let (graph, handle) = shuffle_graph(s, cfg, graph)?;
    let (sol, mut stats) = solve_shuffled(s, cfg, &graph, &handle)?;
    stats.rounds = s.transcript().rounds() - start;
    stats.bytes_sent = s.transcript().bytes_sent();
    Ok((sol, stats))
}
