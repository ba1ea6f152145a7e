//! Pairs in packed form for fast repeated compatibility checks, and the
//! compatibility snapshot a match run solves.

use kepap::compat::{InputQuote, PrioPolicy};
use kepap::oracle::PlainGraph;

/// A quote with blood groups as bitmasks and HLA vectors as bitsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedQuote {
    donor_blood: u8,
    patient_accepts: u8,
    antigens: Vec<u64>,
    antibodies: Vec<u64>,
    pub quote: InputQuote,
}

fn bits(v: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; v.len().div_ceil(64)];
    for (i, &x) in v.iter().enumerate() {
        if x != 0 {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

fn mask4(v: [u8; 4]) -> u8 {
    v.iter().enumerate().fold(0, |m, (i, &x)| m | (u8::from(x != 0) << i))
}

impl PackedQuote {
    pub fn new(quote: InputQuote) -> Self {
        PackedQuote {
            donor_blood: mask4(quote.donor_blood),
            patient_accepts: mask4(quote.patient_accepts),
            antigens: bits(&quote.donor_antigens),
            antibodies: bits(&quote.patient_antibodies),
            quote,
        }
    }

    pub fn cpra(&self) -> u8 {
        self.quote.cpra
    }

    /// Whether this pair's donor can give to `other`'s patient.
    pub fn gives_to(&self, other: &PackedQuote) -> bool {
        (self.donor_blood & other.patient_accepts).count_ones() == 1
            && self
                .antigens
                .iter()
                .zip(&other.antibodies)
                .all(|(a, b)| a & b == 0)
    }
}

/// Compatibility graph over `nodes` (indices into `pairs`), in the given
/// order.
pub fn snapshot(pairs: &[PackedQuote], nodes: &[usize], policy: &PrioPolicy) -> PlainGraph {
    let n = nodes.len();
    let mut g = PlainGraph::empty(n);
    for (a, &i) in nodes.iter().enumerate() {
        for (b, &j) in nodes.iter().enumerate() {
            if a != b && pairs[i].gives_to(&pairs[j]) {
                g.set_edge(a, b, policy.plain_weight(&pairs[i].quote, &pairs[j].quote).max(1));
            }
        }
    }
    g
}
