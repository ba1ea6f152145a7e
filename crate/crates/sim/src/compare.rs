//! Paired comparison of the two models across repetitions and grid cells.

use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::config::{GridConfig, Model, SimConfig};
use crate::engine::{run_sim, PairSource, SimError};

/// Both models on one repetition of one cell. Also the CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRun {
    pub arrival_rate_days: f64,
    pub match_run_interval_days: f64,
    pub departure_rate_days: f64,
    pub match_refusal_pct: f64,
    pub repetition: u64,
    pub seed: u64,
    pub greedy_transplants: usize,
    pub conventional_transplants: usize,
    /// Greedy over conventional transplants, 1 when both are zero.
    pub ratio: f64,
    pub arrivals: usize,
}

pub fn run_pair(cfg: &SimConfig, rep: u64, source: &dyn PairSource) -> Result<PairedRun, SimError> {
    let g = run_sim(cfg, Model::Greedy, rep, source, &[])?;
    let c = run_sim(cfg, Model::Conventional, rep, source, &[])?;
    let ratio = match (g.transplants, c.transplants) {
        (0, 0) => 1.0,
        (a, b) => a as f64 / b as f64,
    };
    Ok(PairedRun {
        arrival_rate_days: cfg.arrival_rate_days,
        match_run_interval_days: cfg.match_run_interval_days,
        departure_rate_days: cfg.departure_rate_days,
        match_refusal_pct: cfg.match_refusal_pct,
        repetition: rep,
        seed: cfg.seed,
        greedy_transplants: g.transplants,
        conventional_transplants: c.transplants,
        ratio,
        arrivals: g.arrivals,
    })
}

/// Runs every repetition of every cell on `threads` worker threads (all
/// cores when zero). Rows come back in cell order, then repetition order.
pub fn compare_grid(
    grid: &GridConfig,
    source: &dyn PairSource,
    threads: usize,
) -> Result<Vec<PairedRun>, SimError> {
    let cells = grid.cells();
    for c in &cells {
        c.validate()?;
    }
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.repetitions as u64).map(move |r| (i, r)))
        .collect();
    let threads = match threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<Result<PairedRun, SimError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(cell, rep)) = jobs.get(k) else {
                    break;
                };
                let r = run_pair(&cells[cell], rep, source);
                log::debug!("cell {cell} repetition {rep} done");
                out.lock().expect("no panics while held")[k] = Some(r);
            });
        }
    });
    out.into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// One-sided sign test of "first exceeds second" over paired samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// P(at least `wins` successes in `wins + losses` fair coin flips).
    pub p_value: f64,
}

pub fn sign_test(pairs: impl IntoIterator<Item = (f64, f64)>) -> SignTest {
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (a, b) in pairs {
        match a.partial_cmp(&b) {
            Some(std::cmp::Ordering::Greater) => wins += 1,
            Some(std::cmp::Ordering::Less) => losses += 1,
            _ => ties += 1,
        }
    }
    let n = (wins + losses) as u64;
    let p_value = if wins == 0 {
        1.0
    } else {
        let b = Binomial::new(0.5, n).expect("valid binomial");
        1.0 - b.cdf(wins as u64 - 1)
    };
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}

/// Per-cell means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub arrival_rate_days: f64,
    pub match_run_interval_days: f64,
    pub repetitions: usize,
    pub mean_greedy: f64,
    pub mean_conventional: f64,
    /// Mean of the per-repetition ratios.
    pub mean_ratio: f64,
    pub min_ratio: f64,
}

/// Groups rows by (arrival rate, interval), in first-seen order.
pub fn summarize(rows: &[PairedRun]) -> Vec<CellSummary> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        let k = (r.arrival_rate_days, r.match_run_interval_days);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(a, i)| {
            let cell: Vec<&PairedRun> = rows
                .iter()
                .filter(|r| r.arrival_rate_days == a && r.match_run_interval_days == i)
                .collect();
            let n = cell.len() as f64;
            CellSummary {
                arrival_rate_days: a,
                match_run_interval_days: i,
                repetitions: cell.len(),
                mean_greedy: cell.iter().map(|r| r.greedy_transplants as f64).sum::<f64>() / n,
                mean_conventional: cell
                    .iter()
                    .map(|r| r.conventional_transplants as f64)
                    .sum::<f64>()
                    / n,
                mean_ratio: cell.iter().map(|r| r.ratio).sum::<f64>() / n,
                min_ratio: cell.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min),
            }
        })
        .collect()
}

/// Writes `# key=value` lines echoing `echo`, then a header and one row per
/// run.
pub fn write_csv<W: Write>(
    mut w: W,
    echo: &[(String, String)],
    rows: &[PairedRun],
) -> Result<(), csv::Error> {
    for (k, v) in echo {
        writeln!(w, "# {k}={v}")?;
    }
    let mut wr = csv::WriterBuilder::new().has_headers(true).from_writer(w);
    if rows.is_empty() {
        wr.write_record([
            "arrival_rate_days",
            "match_run_interval_days",
            "departure_rate_days",
            "match_refusal_pct",
            "repetition",
            "seed",
            "greedy_transplants",
            "conventional_transplants",
            "ratio",
            "arrivals",
        ])?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads rows written by [`write_csv`], returning the echoed config too.
pub fn read_csv<R: BufRead>(r: R) -> Result<(Vec<(String, String)>, Vec<PairedRun>), csv::Error> {
    let mut echo = Vec::new();
    let mut body = String::new();
    for line in r.lines() {
        let line = line?;
        match line.strip_prefix('#') {
            Some(rest) => {
                let (k, v) = rest.trim().split_once('=').unwrap_or((rest.trim(), ""));
                echo.push((k.to_string(), v.to_string()));
            }
            None => {
                body.push_str(&line);
                body.push('\n');
            }
        }
    }
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(body.as_bytes());
    let rows = rd.deserialize().collect::<Result<Vec<PairedRun>, _>>()?;
    Ok((echo, rows))
}
