//! Match-run solvers over a pool snapshot.

use highs::{ColProblem, HighsModelStatus, Sense};
use thiserror::Error;

use kepap::oracle::{
    pack_masks, positive_candidates, select_greedy, Candidate, CyclePacking, PlainGraph, EXACT_MAX_N,
};

use crate::config::Model;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("integer program solver ended with status {0}")]
    Ilp(String),
}

/// Greedy selection in node order, as the secure protocol computes it
/// when the snapshot's node order is the shuffled labelling.
pub fn greedy_match(g: &PlainGraph, kappa: usize) -> CyclePacking {
    select_greedy(positive_candidates(g, kappa), g.n())
}

/// Maximum-weight packing. Candidate cycles are split into connected
/// components; small ones are solved by the bitmask program and large
/// ones as a set-packing integer program.
pub fn conventional_match(g: &PlainGraph, kappa: usize) -> Result<CyclePacking, SolveError> {
    let n = g.n();
    let cands = positive_candidates(g, kappa);
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    for c in &cands {
        let r = find(&mut uf, c.cycle[0]);
        for &x in &c.cycle[1..] {
            let s = find(&mut uf, x);
            uf[s] = r;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<Candidate>> = Default::default();
    for c in cands {
        let r = find(&mut uf, c.cycle[0]);
        groups.entry(r).or_default().push(c);
    }
    let mut packing = CyclePacking::default();
    for comp in groups.into_values() {
        let mut nodes: Vec<usize> = comp.iter().flat_map(|c| c.cycle.iter().copied()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let chosen = if nodes.len() <= EXACT_MAX_N {
            let sets: Vec<(u32, u64)> = comp
                .iter()
                .map(|c| {
                    let m = c
                        .cycle
                        .iter()
                        .fold(0u32, |m, x| m | 1 << nodes.binary_search(x).unwrap());
                    (m, c.weight)
                })
                .collect();
            pack_masks(nodes.len(), &sets).expect("component within size").1
        } else {
            solve_ilp(&nodes, &comp)?
        };
        for i in chosen {
            packing.total_weight += comp[i].weight;
            packing.cycles.push(comp[i].cycle.clone());
        }
    }
    Ok(packing)
}

/// Exact set packing over one large component. The LP relaxation gives an
/// upper bound; its integral columns are kept and the fractional remainder
/// solved exactly. If that reaches the bound (rounded down, weights being
/// integers) it is optimal; otherwise the full integer program is solved.
fn solve_ilp(nodes: &[usize], comp: &[Candidate]) -> Result<Vec<usize>, SolveError> {
    let (bound, x) = set_packing(nodes, comp, false)?;
    let bound = (bound + 1e-6).floor() as u64;
    let mut chosen: Vec<usize> = (0..comp.len()).filter(|&i| x[i] > 1.0 - 1e-6).collect();
    let covered: std::collections::HashSet<usize> = chosen
        .iter()
        .flat_map(|&i| comp[i].cycle.iter().copied())
        .collect();
    let support: std::collections::HashSet<usize> = (0..comp.len())
        .filter(|&i| x[i] > 1e-6 && x[i] < 1.0 - 1e-6)
        .flat_map(|i| comp[i].cycle.iter().copied())
        .collect();
    let rest: Vec<usize> = (0..comp.len())
        .filter(|&i| {
            comp[i]
                .cycle
                .iter()
                .all(|v| support.contains(v) && !covered.contains(v))
        })
        .collect();
    let mut rest_nodes: Vec<usize> = support.difference(&covered).copied().collect();
    rest_nodes.sort_unstable();
    let rest_cands: Vec<Candidate> = rest.iter().map(|&i| comp[i].clone()).collect();
    let picked = if rest_nodes.len() <= EXACT_MAX_N {
        let sets: Vec<(u32, u64)> = rest_cands
            .iter()
            .map(|c| {
                let m = c
                    .cycle
                    .iter()
                    .fold(0u32, |m, x| m | 1 << rest_nodes.binary_search(x).unwrap());
                (m, c.weight)
            })
            .collect();
        pack_masks(rest_nodes.len(), &sets).expect("within size").1
    } else {
        let (_, y) = set_packing(&rest_nodes, &rest_cands, true)?;
        (0..rest_cands.len()).filter(|&i| y[i] > 0.5).collect()
    };
    chosen.extend(picked.into_iter().map(|j| rest[j]));
    let total: u64 = chosen.iter().map(|&i| comp[i].weight).sum();
    if total >= bound {
        return Ok(chosen);
    }
    log::debug!("LP rounding reached {total} of {bound}; solving the full program");
    let (_, y) = set_packing(nodes, comp, true)?;
    Ok((0..comp.len()).filter(|&i| y[i] > 0.5).collect())
}

/// Maximum-weight set packing as a linear or integer program. Returns the
/// objective and column values.
fn set_packing(
    nodes: &[usize],
    comp: &[Candidate],
    integer: bool,
) -> Result<(f64, Vec<f64>), SolveError> {
    let mut pb = ColProblem::default();
    let rows: Vec<_> = nodes.iter().map(|_| pb.add_row(..=1.0)).collect();
    for c in comp {
        let entries: Vec<_> = c
            .cycle
            .iter()
            .map(|x| (rows[nodes.binary_search(x).unwrap()], 1.0))
            .collect();
        pb.add_column_with_integrality(c.weight as f64, 0.0..=1.0, entries, integer);
    }
    let mut model = pb.optimise(Sense::Maximise);
    model.make_quiet();
    model.set_option("mip_rel_gap", 0.0);
    model.set_option("presolve", "off");
    model.set_threads(std::num::NonZeroU32::MIN);
    let solved = model
        .try_solve()
        .map_err(|e| SolveError::Ilp(format!("{e:?}")))?;
    match solved.status() {
        HighsModelStatus::Optimal => {}
        s => return Err(SolveError::Ilp(format!("{s:?}"))),
    }
    Ok((solved.objective_value(), solved.get_solution().columns().to_vec()))
}

pub fn solve(model: Model, g: &PlainGraph, kappa: usize) -> Result<CyclePacking, SolveError> {
    match model {
        Model::Greedy => Ok(greedy_match(g, kappa)),
        Model::Conventional => conventional_match(g, kappa),
    }
}
