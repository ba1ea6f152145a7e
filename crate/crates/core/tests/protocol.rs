use kepap::abb::{Ring, SeedSource};
use kepap::compat::{plain_graph, BloodType, InputQuote, PrioAttrs, QuoteLayout};
use kepap::gates::{PermutationHandle, ShuffleMode};
use kepap::oracle::{exact_solve, greedy_solve, greedy_with_subsets, PlainGraph};
use kepap::protocol::{run_local_graph, run_local_quotes, ExchangeSolution, ProtocolConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn identity(n: usize) -> ProtocolConfig {
    ProtocolConfig::new(n).with_shuffle(ShuffleMode::Identity)
}

fn solve(cfg: &ProtocolConfig, g: &PlainGraph, seed: u64) -> ExchangeSolution {
    run_local_graph(cfg, g, Ring::default(), SeedSource::Fixed(seed))
        .unwrap()
        .solution
}

fn random_graph(rng: &mut StdRng, n: usize, p: f64, wmax: u64) -> PlainGraph {
    let mut g = PlainGraph::empty(n);
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(p) {
                g.set_edge(u, v, rng.random_range(1..=wmax));
            }
        }
    }
    g
}

fn complete(n: usize) -> PlainGraph {
    let mut g = PlainGraph::empty(n);
    for u in 0..n {
        for v in 0..n {
            g.set_edge(u, v, 1);
        }
    }
    g
}

#[test]
fn complete_triangle_resolves_to_one_cycle() {
    let sol = solve(&identity(3), &complete(3), 1);
    assert_eq!(sol.donor, vec![3, 1, 2]);
    assert_eq!(sol.recipient, vec![2, 3, 1]);
}

#[test]
fn two_swaps() {
    let g = PlainGraph::from_edges(4, &[(0, 1, 1), (1, 0, 1), (2, 3, 1), (3, 2, 1)]);
    let sol = solve(&identity(4), &g, 2);
    assert_eq!(sol.donor, vec![2, 1, 4, 3]);
    assert_eq!(sol.recipient, vec![2, 1, 4, 3]);
}

#[test]
fn empty_graph_matches_nobody() {
    let sol = solve(&identity(5), &PlainGraph::empty(5), 3);
    assert_eq!(sol, ExchangeSolution::unmatched(5));
}

#[test]
fn only_reversed_orientation_exists() {
    let g = PlainGraph::from_edges(3, &[(0, 2, 1), (2, 1, 1), (1, 0, 1)]);
    let sol = solve(&identity(3), &g, 4);
    assert_eq!(sol.cycles(3).unwrap(), vec![vec![0, 2, 1]]);
}

#[test]
fn pairwise_mode_ignores_triangles() {
    let g = PlainGraph::from_edges(3, &[(0, 1, 1), (1, 2, 1), (2, 0, 1)]);
    let sol = solve(&identity(3).with_kappa(2), &g, 5);
    assert_eq!(sol, ExchangeSolution::unmatched(3));
}

#[test]
fn iteration_count_is_half_n() {
    let run = run_local_graph(&identity(5), &complete(5), Ring::default(), SeedSource::Fixed(6)).unwrap();
    assert_eq!(run.stats.iterations, 2);
    assert_eq!(run.stats.max_weight_calls, 2);
    assert_eq!(run.stats.subsets, 20);
}

#[test]
fn identity_shuffle_equals_plaintext_greedy() {
    let mut rng = StdRng::seed_from_u64(10);
    for trial in 0..50u64 {
        let n = rng.random_range(2..=10);
        let p = rng.random_range(0.1..0.6);
        let g = random_graph(&mut rng, n, p, 5);
        let kappa = if trial % 5 == 4 { 2 } else { 3 };
        let cfg = identity(n).with_kappa(kappa);
        let sol = solve(&cfg, &g, trial);
        let expected = ExchangeSolution::from_packing(n, &greedy_solve(&g, kappa, None));
        assert_eq!(sol, expected, "trial {trial}");
    }
}

#[test]
fn seeded_shuffle_equals_greedy_on_relabeled_graph() {
    let mut rng = StdRng::seed_from_u64(11);
    for seed in 0..10u64 {
        let n = rng.random_range(3..=8);
        let g = random_graph(&mut rng, n, 0.4, 3);
        let cfg = ProtocolConfig::new(n).with_shuffle(ShuffleMode::Seeded(seed));
        let sol = solve(&cfg, &g, seed);
        let perm = PermutationHandle::composed_public(ShuffleMode::Seeded(seed), n).unwrap();
        let expected = ExchangeSolution::from_packing(n, &greedy_solve(&g, 3, Some(&perm)));
        assert_eq!(sol, expected, "seed {seed}");
    }
}

#[test]
fn shuffled_subset_order_equals_greedy_with_same_order() {
    let mut rng = StdRng::seed_from_u64(12);
    for seed in 0..10u64 {
        let n = rng.random_range(3..=8);
        let g = random_graph(&mut rng, n, 0.5, 1);
        let mut cfg = identity(n);
        cfg.subset_shuffle = Some(seed);
        let sol = solve(&cfg, &g, seed);
        let expected = ExchangeSolution::from_packing(n, &greedy_with_subsets(&g, &cfg.subsets()));
        assert_eq!(sol, expected);
    }
}

#[test]
fn random_shuffle_output_is_valid_and_within_bound() {
    let mut rng = StdRng::seed_from_u64(13);
    for trial in 0..20u64 {
        let n = rng.random_range(2..=9);
        let g = random_graph(&mut rng, n, 0.4, 4);
        for kappa in [2, 3] {
            let cfg = ProtocolConfig::new(n).with_kappa(kappa);
            let sol = run_local_graph(&cfg, &g, Ring::default(), SeedSource::Entropy)
                .unwrap()
                .solution;
            let packing = sol.to_packing(&g, kappa).expect("valid packing");
            let opt = exact_solve(&g, kappa).unwrap().total_weight;
            assert!(packing.total_weight * kappa as u64 >= opt, "trial {trial}");
        }
    }
}

fn quotes(rng: &mut StdRng, n: usize, layout: &QuoteLayout) -> Vec<InputQuote> {
    (0..n)
        .map(|_| {
            InputQuote::new(
                BloodType::ALL[rng.random_range(0..4)],
                BloodType::ALL[rng.random_range(0..4)],
                (0..layout.antigens).map(|_| rng.random_bool(0.1) as u8).collect(),
                (0..layout.antigens).map(|_| rng.random_bool(0.05) as u8).collect(),
                rng.random_range(0..=100),
                PrioAttrs {
                    region: rng.random_range(0..layout.regions as u16),
                    ..Default::default()
                },
            )
        })
        .collect()
}

#[test]
fn quotes_end_to_end_match_plaintext() {
    let mut rng = StdRng::seed_from_u64(14);
    let mut cfg = identity(7);
    cfg.layout = QuoteLayout {
        antigens: 10,
        regions: 2,
    };
    for seed in 0..3 {
        let q = quotes(&mut rng, 7, &cfg.layout);
        let run = run_local_quotes(&cfg, &q, Ring::default(), SeedSource::Fixed(seed)).unwrap();
        let g = plain_graph(&q, &cfg.policy);
        assert_eq!(run.solution, ExchangeSolution::from_packing(7, &greedy_solve(&g, 3, None)));
    }
}

#[test]
fn transcripts_do_not_depend_on_inputs() {
    let mut rng = StdRng::seed_from_u64(15);
    let mut cfg = ProtocolConfig::new(6);
    cfg.layout = QuoteLayout {
        antigens: 8,
        regions: 2,
    };
    let a = quotes(&mut rng, 6, &cfg.layout);
    let b: Vec<InputQuote> = (0..6)
        .map(|_| {
            InputQuote::new(
                BloodType::AB,
                BloodType::O,
                vec![1; 8],
                vec![1; 8],
                100,
                PrioAttrs::default(),
            )
        })
        .collect();
    let ra = run_local_quotes(&cfg, &a, Ring::default(), SeedSource::Entropy).unwrap();
    let rb = run_local_quotes(&cfg, &b, Ring::default(), SeedSource::Entropy).unwrap();
    for p in 0..3 {
        assert_eq!(ra.transcripts[p].entries(), rb.transcripts[p].entries());
    }
    assert_eq!(rb.solution, ExchangeSolution::unmatched(6));
}

#[test]
fn mismatched_configs_are_detected() {
    use kepap::abb::run_local;
    use kepap::protocol::{agree_on_config, ProtocolError};
    let res = run_local(Ring::default(), SeedSource::Fixed(1), |s| {
        let cfg = ProtocolConfig::new(4 + (s.me().index() == 2) as usize);
        agree_on_config(s, &cfg)?;
        Ok(())
    });
    assert!(matches!(
        res,
        Err(kepap::Error::Protocol(ProtocolError::ConfigMismatch { .. }))
    ));
}
