use anyhow::{ensure, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use kepap::compat::{plain_graph, PrioPolicy};
use kepap::datagen::gen_pairs;
use kepap::formats::{parse_graph, write_solution};
use kepap::oracle::{exact_solve, greedy_solve, ratio, validate, CyclePacking, EXACT_MAX_N};
use kepap::protocol::ExchangeSolution;

use crate::protocol_cmds::load_model;
use crate::{read, write_out, QualityArgs, SolveArgs};

fn check_kappa(kappa: usize) -> Result<()> {
    ensure!(kappa == 2 || kappa == 3, "--kappa must be 2 or 3");
    Ok(())
}

fn emit(a: &SolveArgs, n: usize, p: &CyclePacking) -> Result<()> {
    log::info!("{} pairs matched, total weight {}", p.matched_pairs(), p.total_weight);
    write_out(a.out.as_ref(), &write_solution(&ExchangeSolution::from_packing(n, p)))
}

pub fn greedy(a: SolveArgs) -> Result<()> {
    check_kappa(a.kappa)?;
    let g = parse_graph(&read(&a.graph)?).with_context(|| format!("in {}", a.graph.display()))?;
    let perm = a.shuffle_seed.map(|s| {
        let mut p: Vec<usize> = (0..g.n()).collect();
        p.shuffle(&mut ChaCha12Rng::seed_from_u64(s));
        p
    });
    let p = greedy_solve(&g, a.kappa, perm.as_deref());
    validate(&g, &p, a.kappa)?;
    emit(&a, g.n(), &p)
}

pub fn exact(a: SolveArgs) -> Result<()> {
    check_kappa(a.kappa)?;
    let g = parse_graph(&read(&a.graph)?).with_context(|| format!("in {}", a.graph.display()))?;
    let p = exact_solve(&g, a.kappa)?;
    emit(&a, g.n(), &p)
}

#[derive(Serialize)]
struct QualityRow {
    repetition: usize,
    seed: u64,
    n: usize,
    kappa: usize,
    greedy_pairs: usize,
    exact_pairs: usize,
    greedy_weight: u64,
    exact_weight: u64,
    ratio: f64,
}

pub fn quality(a: QualityArgs) -> Result<()> {
    check_kappa(a.kappa)?;
    ensure!(
        a.n <= EXACT_MAX_N,
        "--n {} exceeds the exact solver limit of {EXACT_MAX_N} pairs",
        a.n
    );
    ensure!(a.reps >= 1, "--reps must be at least 1");
    let model = load_model(a.model.as_ref())?;
    let mut rows = Vec::with_capacity(a.reps);
    for rep in 0..a.reps {
        let seed = a.seed.wrapping_add(rep as u64);
        let g = plain_graph(&gen_pairs(a.n, &model, seed)?, &PrioPolicy::default());
        let gr = greedy_solve(&g, a.kappa, None);
        let ex = exact_solve(&g, a.kappa)?;
        rows.push(QualityRow {
            repetition: rep,
            seed,
            n: a.n,
            kappa: a.kappa,
            greedy_pairs: gr.matched_pairs(),
            exact_pairs: ex.matched_pairs(),
            greedy_weight: gr.total_weight,
            exact_weight: ex.total_weight,
            ratio: ratio(gr.matched_pairs(), ex.matched_pairs()),
        });
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let sd = if ratios.len() > 1 {
        (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let half = 1.96 * sd / n.sqrt();

    let mut buf = Vec::new();
    {
        use std::io::Write;
        writeln!(buf, "# n={}", a.n)?;
        writeln!(buf, "# reps={}", a.reps)?;
        writeln!(buf, "# kappa={}", a.kappa)?;
        writeln!(buf, "# seed={}", a.seed)?;
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    write_out(a.out.as_ref(), std::str::from_utf8(&buf)?)?;
    eprintln!(
        "mean ratio {mean:.4} (95% CI {:.4}..{:.4}), min {min:.4} over {} instances",
        mean - half,
        mean + half,
        rows.len()
    );
    Ok(())
}
