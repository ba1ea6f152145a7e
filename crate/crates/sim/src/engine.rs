//! The event loop.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use kepap::compat::InputQuote;
use kepap::datagen::PopulationModel;

use crate::config::{ConfigError, Model, SimConfig, TimeDistribution};
use crate::pool::{snapshot, PackedQuote};
use crate::solver::{solve, SolveError};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Supplies the pairs that enrol over time.
pub trait PairSource: Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> InputQuote;
}

impl PairSource for PopulationModel {
    fn draw(&self, rng: &mut dyn RngCore) -> InputQuote {
        self.sample_pair(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    Waiting,
    /// Matched, awaiting crossmatch and acceptance.
    InCrossmatch,
    /// Returning to the pool after a failed match.
    Reentering,
    Departed,
    Transplanted,
}

/// What one match run saw and chose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub time: f64,
    /// Waiting pairs at the start of the run.
    pub pool: usize,
    /// Pairs on at least one candidate cycle together with a new pair.
    pub considered: usize,
    pub matched: usize,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub model: Model,
    /// Pairs registered, including any initial pool.
    pub arrivals: usize,
    pub transplants: usize,
    pub departed: usize,
    /// Waiting at the horizon.
    pub live: usize,
    /// In crossmatch or reentering at the horizon.
    pub in_flight: usize,
    pub runs: Vec<RunRecord>,
}

impl SimResult {
    /// `(time, pool size)` at each match run.
    pub fn pool_series(&self) -> Vec<(f64, usize)> {
        self.runs.iter().map(|r| (r.time, r.pool)).collect()
    }

    pub fn is_conserved(&self) -> bool {
        self.arrivals == self.transplants + self.departed + self.live + self.in_flight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Arrival,
    Departure(usize),
    MatchRun,
    Outcome(usize),
    Reenter(usize),
}

struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Scheduled {
    // Reversed: the heap pops the earliest time first. At equal times,
    // pool changes come before a match run, then scheduling order.
    fn cmp(&self, o: &Self) -> Ordering {
        o.time
            .total_cmp(&self.time)
            .then(o.event.priority().cmp(&self.event.priority()))
            .then(o.seq.cmp(&self.seq))
    }
}

impl Event {
    fn priority(self) -> u8 {
        match self {
            Event::Outcome(_) => 0,
            Event::Reenter(_) => 1,
            Event::Departure(_) => 2,
            Event::Arrival => 3,
            Event::MatchRun => 4,
        }
    }
}

const STREAM_ARRIVALS: u64 = 1;
const STREAM_LABELS: u64 = 2;
const STREAM_OUTCOMES: u64 = 3;
const STREAM_INITIAL: u64 = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of an independent random stream keyed by `parts`.
pub fn stream_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed, |h, &p| splitmix(h ^ splitmix(p)))
}

/// Random order given to the pairs considered by match run `run` (counted
/// from 1) of repetition `rep`.
pub fn shuffle_for_run(seed: u64, rep: u64, run: u64, nodes: &mut [usize]) {
    let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(&[seed, rep, STREAM_LABELS, run]));
    nodes.shuffle(&mut rng);
}

fn draw_time(dist: TimeDistribution, mean: f64, rng: &mut impl Rng) -> f64 {
    match dist {
        TimeDistribution::Fixed => mean,
        TimeDistribution::Exponential => Exp::new(1.0 / mean).expect("positive mean").sample(rng),
    }
}

struct Pair {
    state: PairState,
    offers: u64,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    model: Model,
    rep: u64,
    now: f64,
    seq: u64,
    queue: BinaryHeap<Scheduled>,
    pairs: Vec<Pair>,
    packed: Vec<PackedQuote>,
    waiting: Vec<usize>,
    slot: Vec<usize>,
    fresh: Vec<usize>,
    pending: HashMap<usize, Vec<Vec<usize>>>,
    result: SimResult,
}

impl<'a> Sim<'a> {
    fn schedule(&mut self, time: f64, event: Event) {
        if time <= self.cfg.horizon_days {
            self.seq += 1;
            self.queue.push(Scheduled {
                time,
                seq: self.seq,
                event,
            });
        }
    }

    fn enrol(&mut self, quote: InputQuote, rng: &mut impl Rng) {
        let id = self.pairs.len();
        let packed = PackedQuote::new(quote);
        self.packed.push(packed);
        self.pairs.push(Pair {
            state: PairState::Reentering,
            offers: 0,
        });
        self.slot.push(usize::MAX);
        self.result.arrivals += 1;
        self.make_waiting(id);
        let stay = draw_time(self.cfg.residence, self.cfg.departure_rate_days, rng);
        self.schedule(self.now + stay, Event::Departure(id));
    }

    fn make_waiting(&mut self, id: usize) {
        self.pairs[id].state = PairState::Waiting;
        self.slot[id] = self.waiting.len();
        self.waiting.push(id);
        self.fresh.push(id);
    }

    fn leave_pool(&mut self, id: usize, state: PairState) {
        debug_assert_eq!(self.pairs[id].state, PairState::Waiting);
        let s = self.slot[id];
        self.waiting.swap_remove(s);
        if let Some(&moved) = self.waiting.get(s) {
            self.slot[moved] = s;
        }
        self.slot[id] = usize::MAX;
        self.pairs[id].state = state;
    }

    fn match_run(&mut self, run: u64) -> Result<(), SimError> {
        let pool = self.waiting.len();
        let fresh: Vec<usize> = std::mem::take(&mut self.fresh)
            .into_iter()
            .filter(|&i| self.pairs[i].state == PairState::Waiting)
            .collect();
        // Every positive cycle in the pool passes through a pair that is
        // new since the last run, since both solvers leave no cycle behind.
        let mut involved = vec![false; self.pairs.len()];
        for &f in &fresh {
            involved[f] = true;
        }
        for &x in &self.waiting {
            if !involved[x] {
                let q = &self.packed[x];
                involved[x] = fresh
                    .iter()
                    .any(|&f| q.gives_to(&self.packed[f]) || self.packed[f].gives_to(q));
            }
        }
        let mut nodes: Vec<usize> = (0..self.pairs.len()).filter(|&i| involved[i]).collect();
        // A uniformly random labelling of the pool, restricted to the
        // considered pairs, stands in for the protocol's node shuffle.
        shuffle_for_run(self.cfg.seed, self.rep, run, &mut nodes);
        let g = snapshot(&self.packed, &nodes, &self.cfg.policy);
        let packing = solve(self.model, &g, self.cfg.kappa)?;
        let cycles: Vec<Vec<usize>> = packing
            .cycles
            .iter()
            .map(|c| c.iter().map(|&x| nodes[x]).collect())
            .collect();
        self.result.runs.push(RunRecord {
            time: self.now,
            pool,
            considered: nodes.len(),
            matched: packing.matched_pairs(),
            weight: packing.total_weight,
        });
        for c in &cycles {
            for &x in c {
                self.leave_pool(x, PairState::InCrossmatch);
            }
        }
        if !cycles.is_empty() {
            let runtime = self.cfg.runtime.days(pool);
            self.pending.insert(run as usize, cycles);
            self.schedule(self.now + runtime, Event::Outcome(run as usize));
        }
        Ok(())
    }

    fn resolve(&mut self, run: usize) {
        let cycles = self.pending.remove(&run).unwrap_or_default();
        for c in cycles {
            if c.iter().any(|&x| self.pairs[x].state == PairState::Departed) {
                for &x in &c {
                    if self.pairs[x].state == PairState::InCrossmatch {
                        self.make_waiting(x);
                    }
                }
                continue;
            }
            let mut crossmatch_failed = false;
            let mut refused = false;
            for &x in &c {
                let p = &mut self.pairs[x];
                p.offers += 1;
                let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(&[
                    self.cfg.seed,
                    self.rep,
                    STREAM_OUTCOMES,
                    x as u64,
                    p.offers,
                ]));
                let fail_p = if self.packed[x].cpra() >= self.cfg.sensitized_cpra {
                    self.cfg.crossmatch_fail_high
                } else {
                    self.cfg.crossmatch_fail_other
                };
                crossmatch_failed |= rng.random_bool(fail_p);
                refused |= rng.random_bool(self.cfg.match_refusal_pct / 100.0);
            }
            if crossmatch_failed || refused {
                let delay = if crossmatch_failed {
                    self.cfg.reentry_fail_days
                } else {
                    self.cfg.reentry_refusal_days
                };
                for &x in &c {
                    self.pairs[x].state = PairState::Reentering;
                    self.schedule(self.now + delay, Event::Reenter(x));
                }
            } else {
                for &x in &c {
                    self.pairs[x].state = PairState::Transplanted;
                }
                self.result.transplants += c.len();
            }
        }
    }
}

/// Simulates one repetition under `model`. Both models see the same
/// arrivals and, pair by pair and offer by offer, the same crossmatch and
/// acceptance draws.
pub fn run_sim(
    cfg: &SimConfig,
    model: Model,
    rep: u64,
    source: &dyn PairSource,
    initial: &[InputQuote],
) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let mut sim = Sim {
        cfg,
        model,
        rep,
        now: 0.0,
        seq: 0,
        queue: BinaryHeap::new(),
        pairs: Vec::new(),
        packed: Vec::new(),
        waiting: Vec::new(),
        slot: Vec::new(),
        fresh: Vec::new(),
        pending: HashMap::new(),
        result: SimResult {
            model,
            arrivals: 0,
            transplants: 0,
            departed: 0,
            live: 0,
            in_flight: 0,
            runs: Vec::new(),
        },
    };
    let mut init_rng = ChaCha12Rng::seed_from_u64(stream_seed(&[cfg.seed, rep, STREAM_INITIAL]));
    for q in initial {
        sim.enrol(q.clone(), &mut init_rng);
    }
    let mut arrivals = ChaCha12Rng::seed_from_u64(stream_seed(&[cfg.seed, rep, STREAM_ARRIVALS]));
    if cfg.arrival_rate_days.is_finite() {
        let t = draw_time(cfg.interarrival, cfg.arrival_rate_days, &mut arrivals);
        sim.schedule(t, Event::Arrival);
    }
    let mut run = 1u64;
    sim.schedule(cfg.match_run_interval_days, Event::MatchRun);

    while let Some(Scheduled { time, event, .. }) = sim.queue.pop() {
        sim.now = time;
        match event {
            Event::Arrival => {
                let q = source.draw(&mut arrivals);
                sim.enrol(q, &mut arrivals);
                let t = draw_time(cfg.interarrival, cfg.arrival_rate_days, &mut arrivals);
                sim.schedule(time + t, Event::Arrival);
            }
            Event::Departure(id) => match sim.pairs[id].state {
                PairState::Waiting => {
                    sim.leave_pool(id, PairState::Departed);
                    sim.result.departed += 1;
                }
                PairState::InCrossmatch | PairState::Reentering => {
                    sim.pairs[id].state = PairState::Departed;
                    sim.result.departed += 1;
                }
                PairState::Departed | PairState::Transplanted => {}
            },
            Event::MatchRun => {
                sim.match_run(run)?;
                run += 1;
                sim.schedule(run as f64 * cfg.match_run_interval_days, Event::MatchRun);
            }
            Event::Outcome(r) => sim.resolve(r),
            Event::Reenter(id) => {
                if sim.pairs[id].state == PairState::Reentering {
                    sim.make_waiting(id);
                }
            }
        }
    }
    sim.result.live = sim.waiting.len();
    sim.result.in_flight = sim
        .pairs
        .iter()
        .filter(|p| matches!(p.state, PairState::InCrossmatch | PairState::Reentering))
        .count();
    Ok(sim.result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kepap::compat::{BloodType, PrioAttrs};

    fn relaxed() -> SimConfig {
        SimConfig {
            strict_domains: false,
            crossmatch_fail_high: 0.0,
            crossmatch_fail_other: 0.0,
            match_refusal_pct: 0.0,
            arrival_rate_days: f64::INFINITY,
            departure_rate_days: 1e9,
            horizon_days: 1.0,
            match_run_interval_days: 1.0,
            ..Default::default()
        }
    }

    fn q(donor: BloodType, patient: BloodType) -> InputQuote {
        InputQuote::new(donor, patient, vec![0; 50], vec![0; 50], 0, PrioAttrs::default())
    }

    #[test]
    fn two_swaps_transplant_four() {
        use BloodType::*;
        let pool = vec![q(A, B), q(B, A), q(A, B), q(B, A)];
        let r = run_sim(&relaxed(), Model::Conventional, 0, &PopulationModel::default(), &pool).unwrap();
        assert_eq!(r.transplants, 4);
        assert_eq!(r.runs.len(), 1);
        assert!(r.is_conserved());
    }

    #[test]
    fn nothing_to_match_without_arrivals() {
        let mut cfg = relaxed();
        cfg.horizon_days = 100.0;
        for m in [Model::Greedy, Model::Conventional] {
            let r = run_sim(&cfg, m, 0, &PopulationModel::default(), &[]).unwrap();
            assert_eq!(r.transplants, 0);
            assert_eq!(r.arrivals, 0);
        }
    }

    #[test]
    fn all_refusing_pairs_never_transplant() {
        use BloodType::*;
        let mut cfg = relaxed();
        cfg.match_refusal_pct = 100.0;
        cfg.horizon_days = 30.0;
        let pool = vec![q(A, B), q(B, A)];
        let r = run_sim(&cfg, Model::Greedy, 0, &PopulationModel::default(), &pool).unwrap();
        assert_eq!(r.transplants, 0);
        // Refused on days 1, 3, ..., 29, back in the pool two days later.
        assert_eq!(r.runs.iter().filter(|x| x.matched == 2).count(), 15);
        assert!(r.is_conserved());
    }

    #[test]
    fn same_seed_same_result() {
        let cfg = SimConfig {
            arrival_rate_days: 2.0,
            match_run_interval_days: 14.0,
            horizon_days: 400.0,
            ..Default::default()
        };
        let m = PopulationModel::default();
        for model in [Model::Greedy, Model::Conventional] {
            let a = run_sim(&cfg, model, 3, &m, &[]).unwrap();
            assert_eq!(a, run_sim(&cfg, model, 3, &m, &[]).unwrap());
            assert!(a.is_conserved());
            assert!(a.transplants > 0);
        }
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(stream_seed(&[1, 2]), stream_seed(&[2, 1]));
        assert_ne!(stream_seed(&[0]), stream_seed(&[0, 0]));
    }
}
