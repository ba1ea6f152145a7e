//! File formats: quote files, share files, the graph text format, solution
//! CSV and the peer configuration.

use std::net::SocketAddr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abb::Share;
use crate::compat::{InputQuote, QuoteLayout};
use crate::oracle::PlainGraph;
use crate::protocol::{ExchangeSolution, ProtocolConfig, SharedSolution};

/// Version written into every JSON file and checked on reading.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error("line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error("unsupported schema version {found}, expected {SCHEMA_VERSION}")]
    Schema { found: u32 },
    #[error("invalid content: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}

/// One pair's record in a quote file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteRecord {
    pub pair_id: usize,
    #[serde(flatten)]
    pub quote: InputQuote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuoteFile {
    pub schema_version: u32,
    pub layout: QuoteLayout,
    pub pairs: Vec<QuoteRecord>,
}

impl QuoteFile {
    pub fn new(layout: QuoteLayout, quotes: &[InputQuote]) -> Self {
        QuoteFile {
            schema_version: SCHEMA_VERSION,
            layout,
            pairs: quotes
                .iter()
                .enumerate()
                .map(|(pair_id, q)| QuoteRecord {
                    pair_id,
                    quote: q.clone(),
                })
                .collect(),
        }
    }

    pub fn quotes(&self) -> Vec<InputQuote> {
        self.pairs.iter().map(|r| r.quote.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("quote file serializes")
    }

    /// Parses and validates every quote against the layout.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let f: QuoteFile = serde_json::from_str(text)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(FormatError::Schema {
                found: f.schema_version,
            });
        }
        for (i, r) in f.pairs.iter().enumerate() {
            if r.pair_id != i {
                return Err(FormatError::Invalid(format!(
                    "pair ids must run 0..n in order; record {i} has id {}",
                    r.pair_id
                )));
            }
            r.quote
                .check(&f.layout)
                .map_err(|e| FormatError::Invalid(format!("pair {i}: {e}")))?;
        }
        Ok(f)
    }
}

/// One peer's shares of every encoded quote, as produced by dealing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuoteShareFile {
    pub schema_version: u32,
    pub peer: usize,
    pub layout: QuoteLayout,
    /// `shares[pair]` is the pair's encoded quote, one `[a, b]` per entry.
    pub shares: Vec<Vec<[u64; 2]>>,
}

impl QuoteShareFile {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let f: QuoteShareFile = serde_json::from_str(text)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(FormatError::Schema {
                found: f.schema_version,
            });
        }
        if let Some(bad) = f.shares.iter().position(|s| s.len() != f.layout.len()) {
            return Err(FormatError::Invalid(format!(
                "pair {bad} has {} shares, layout needs {}",
                f.shares[bad].len(),
                f.layout.len()
            )));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("share file serializes")
    }

    pub fn pair_shares(&self, pair: usize) -> Vec<Share> {
        self.shares[pair].iter().map(|&[a, b]| Share::new(a, b)).collect()
    }
}

/// One peer's shares of the output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputShareFile {
    pub schema_version: u32,
    pub peer: usize,
    pub ring_bits: u32,
    pub solution: SharedSolution,
}

impl OutputShareFile {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let f: OutputShareFile = serde_json::from_str(text)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(FormatError::Schema {
                found: f.schema_version,
            });
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("output file serializes")
    }
}

/// Graph text: the pair count on the first data line, then one
/// `u v weight` line per edge. `#` starts a comment.
pub fn parse_graph(text: &str) -> Result<PlainGraph, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, first) = lines.next().ok_or(FormatError::Text {
        line: 1,
        msg: "missing pair count".into(),
    })?;
    let n: usize = first.parse().map_err(|_| FormatError::Text {
        line,
        msg: format!("expected pair count, found {first:?}"),
    })?;
    let mut g = PlainGraph::empty(n);
    for (line, l) in lines {
        let fields: Vec<&str> = l.split_whitespace().collect();
        let bad = |msg: String| FormatError::Text { line, msg };
        if fields.len() != 3 {
            return Err(bad(format!("expected `u v weight`, found {l:?}")));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("not a number: {s:?}")));
        let (u, v, w) = (num(fields[0])? as usize, num(fields[1])? as usize, num(fields[2])?);
        if u >= n || v >= n {
            return Err(bad(format!("node out of range 0..{n}")));
        }
        if u == v {
            return Err(bad("self loop".into()));
        }
        g.set_edge(u, v, w);
    }
    Ok(g)
}

pub fn write_graph(g: &PlainGraph) -> String {
    let mut out = format!("{}\n", g.n());
    for (u, v, w) in g.edges() {
        out.push_str(&format!("{u} {v} {w}\n"));
    }
    out
}

/// Solution CSV: `pair,donor,recipient`, 1-based indices, 0 = unmatched.
pub fn write_solution(sol: &ExchangeSolution) -> String {
    let mut out = String::from("pair,donor,recipient\n");
    for i in 0..sol.n() {
        out.push_str(&format!("{},{},{}\n", i + 1, sol.donor[i], sol.recipient[i]));
    }
    out
}

pub fn parse_solution(text: &str) -> Result<ExchangeSolution, FormatError> {
    let mut sol = ExchangeSolution::unmatched(0);
    for (i, l) in text.lines().enumerate().skip(1) {
        if l.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| FormatError::Text { line: i + 1, msg };
        let f: Vec<u64> = l
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| bad(format!("not a number: {x:?}"))))
            .collect::<Result<_, _>>()?;
        if f.len() != 3 || f[0] != sol.n() as u64 + 1 {
            return Err(bad("expected `pair,donor,recipient` in pair order".into()));
        }
        sol.donor.push(f[1]);
        sol.recipient.push(f[2]);
    }
    Ok(sol)
}

/// Configuration of one networked peer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeerConfig {
    /// This peer's id, 0, 1 or 2.
    pub peer: usize,
    /// Listening addresses of all three peers, by id.
    pub addresses: [SocketAddr; 3],
    #[serde(default = "default_timeout")]
    pub connect_timeout_secs: u64,
    #[serde(default = "default_ring")]
    pub ring_bits: u32,
    pub protocol: ProtocolConfig,
}

fn default_timeout() -> u64 {
    30
}

fn default_ring() -> u32 {
    64
}

impl PeerConfig {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let c: PeerConfig = toml::from_str(text)?;
        if c.peer > 2 {
            return Err(FormatError::Invalid(format!("peer id {} not in 0..3", c.peer)));
        }
        Ok(c)
    }
}
