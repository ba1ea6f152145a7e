use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PeerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Out,
    In,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub round_tag: u32,
    pub direction: Direction,
    pub peer: PeerId,
    /// Payload bytes, excluding the frame header.
    pub bytes: u64,
}

/// Append-only record of everything one peer sent and received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    owner: PeerId,
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new(owner: PeerId) -> Self {
        Transcript {
            owner,
            entries: Vec::new(),
        }
    }

    pub fn owner(&self) -> PeerId {
        self.owner
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub(crate) fn push(&mut self, round_tag: u32, direction: Direction, peer: PeerId, bytes: u64) {
        self.entries.push(TranscriptEntry {
            round_tag,
            direction,
            peer,
            bytes,
        });
    }

    pub fn bytes_sent(&self) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.direction == Direction::Out)
            .map(|e| e.bytes)
            .sum()
    }

    /// Number of distinct rounds in which this peer sent or received.
    pub fn rounds(&self) -> usize {
        let mut last = None;
        let mut count = 0;
        for e in &self.entries {
            if last != Some(e.round_tag) {
                count += 1;
                last = Some(e.round_tag);
            }
        }
        count
    }

    /// `(round_tag, bytes sent)` for every round this peer sent in.
    pub fn summary(&self) -> Vec<(u32, u64)> {
        summarize(std::slice::from_ref(self))
    }
}

/// Session-wide summary: for each round tag, the total payload bytes sent by
/// all given peers. Sorted by tag; rounds without traffic are omitted.
pub fn summarize(transcripts: &[Transcript]) -> Vec<(u32, u64)> {
    let mut per_round: BTreeMap<u32, u64> = BTreeMap::new();
    for t in transcripts {
        for e in t.entries.iter().filter(|e| e.direction == Direction::Out) {
            *per_round.entry(e.round_tag).or_default() += e.bytes;
        }
    }
    per_round.into_iter().collect()
}

/// Total payload bytes sent across all given peers.
pub fn total_bytes(transcripts: &[Transcript]) -> u64 {
    transcripts.iter().map(Transcript::bytes_sent).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_groups_by_round() {
        let p0 = PeerId::new(0).unwrap();
        let p1 = PeerId::new(1).unwrap();
        let mut t = Transcript::new(p0);
        t.push(1, Direction::Out, p1, 8);
        t.push(2, Direction::Out, p1, 16);
        t.push(2, Direction::In, p1, 100);
        t.push(2, Direction::Out, p1, 8);
        assert_eq!(t.summary(), vec![(1, 8), (2, 24)]);
        assert_eq!(t.rounds(), 2);
        assert_eq!(t.bytes_sent(), 32);
        assert!(summarize(&[]).is_empty());
    }
}
