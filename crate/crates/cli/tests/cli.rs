use std::path::Path;
use std::process::{Command, Output};

use kepap::compat::{plain_graph, BloodType, InputQuote, PrioAttrs, PrioPolicy, QuoteLayout};
use kepap::formats::{parse_solution, QuoteFile};

fn kepap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kepap"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = kepap(args, dir);
    assert!(
        out.status.success(),
        "kepap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn complete_quotes(dir: &Path) {
    let layout = QuoteLayout::default();
    let q: Vec<InputQuote> = (0..3)
        .map(|_| {
            InputQuote::new(
                BloodType::O,
                BloodType::AB,
                vec![0; layout.antigens],
                vec![0; layout.antigens],
                0,
                PrioAttrs::default(),
            )
        })
        .collect();
    std::fs::write(dir.join("q.json"), QuoteFile::new(layout, &q).to_json()).unwrap();
}

#[test]
fn run_local_resolves_the_complete_triangle() {
    let dir = tempfile::tempdir().unwrap();
    complete_quotes(dir.path());
    let text = ok(
        &["run-local", "--quotes", "q.json", "--shuffle", "identity", "--seed", "1", "--stats", "s.json"],
        dir.path(),
    );
    let sol = parse_solution(&text).unwrap();
    assert_eq!(sol.donor, vec![3, 1, 2]);
    assert_eq!(sol.recipient, vec![2, 3, 1]);
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(stats["phases"]["iterations"], 1);
    assert!(stats["total_bytes"].as_u64().unwrap() > 0);

    // Pairwise mode on the complete instance picks one swap.
    let text = ok(
        &["run-local", "--quotes", "q.json", "--shuffle", "identity", "--kappa", "2"],
        dir.path(),
    );
    assert_eq!(parse_solution(&text).unwrap().matched_pairs(), 2);
}

#[test]
fn pairwise_mode_on_a_directed_triangle_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "# triangle\n3\n0 1 1\n1 2 1\n2 0 1\n").unwrap();
    let text = ok(&["run-local", "--graph", "g.txt", "--kappa", "2", "--shuffle", "identity"], dir.path());
    assert_eq!(parse_solution(&text).unwrap().matched_pairs(), 0);
    let text = ok(&["run-local", "--graph", "g.txt"], dir.path());
    assert_eq!(parse_solution(&text).unwrap().matched_pairs(), 3);
}

#[test]
fn malformed_inputs_fail_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"schema_version\": 1,\n  oops\n}").unwrap();
    let out = kepap(&["run-local", "--quotes", "bad.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    std::fs::write(dir.path().join("g.txt"), "3\n0 1 1\n1 x 1\n").unwrap();
    let out = kepap(&["greedy", "--graph", "g.txt"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = kepap(&["run-local", "--quotes", "missing.json"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn greedy_and_exact_on_the_trap_instance() {
    let dir = tempfile::tempdir().unwrap();
    // Two swaps plus a triangle through three of their pairs.
    std::fs::write(
        dir.path().join("g.txt"),
        "4\n0 1 1\n1 0 1\n2 3 1\n3 2 1\n0 2 1\n2 3 1\n3 0 1\n",
    )
    .unwrap();
    let exact = parse_solution(&ok(&["exact", "--graph", "g.txt"], dir.path())).unwrap();
    assert_eq!(exact.matched_pairs(), 4);
    let greedy = parse_solution(&ok(&["greedy", "--graph", "g.txt"], dir.path())).unwrap();
    assert_eq!(greedy.matched_pairs(), 3);
}

#[test]
fn quality_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&["quality", "--n", "8", "--reps", "1", "--seed", "4"], dir.path());
    assert_eq!(a, ok(&["quality", "--n", "8", "--reps", "1", "--seed", "4"], dir.path()));
    assert!(a.starts_with("# n=8\n"));
    assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 2);

    let text = ok(&["quality", "--n", "10", "--reps", "100", "--seed", "1"], dir.path());
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let ratios: Vec<f64> = rd
        .deserialize::<std::collections::HashMap<String, String>>()
        .map(|r| r.unwrap()["ratio"].parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 100);
    assert!(ratios.iter().all(|&r| r >= 1.0 / 3.0));

    let out = kepap(&["quality", "--n", "40", "--reps", "1"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("limit"));
}

#[test]
fn simulate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("one.toml"),
        "arrival_rates = [7.0]\nmatch_run_intervals = [30.0]\n[base]\nrepetitions = 1\nhorizon_days = 365.0\nseed = 9\n",
    )
    .unwrap();
    let csv = ok(&["simulate", "--config", "one.toml"], dir.path());
    assert_eq!(csv, ok(&["simulate", "--config", "one.toml"], dir.path()));
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body.len(), 2);
    assert!(body[0].starts_with("arrival_rate_days,match_run_interval_days"));
    assert!(csv.contains("# seed=9"));

    std::fs::write(dir.path().join("empty.csv"), "# nothing\n").unwrap();
    assert!(!kepap(&["plot", "--csv", "empty.csv"], dir.path()).status.success());

    std::fs::write(
        dir.path().join("grid.toml"),
        "[base]\nrepetitions = 1\nhorizon_days = 120.0\n",
    )
    .unwrap();
    ok(&["simulate", "--config", "grid.toml", "--out", "all.csv"], dir.path());
    let grid = ok(&["plot", "--csv", "all.csv", "--svg", "heat.svg"], dir.path());
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "arrival_rate_days,1,2,4,7,14,30,60,120");
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 9));
    let svg = std::fs::read_to_string(dir.path().join("heat.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 40);
}

fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

#[test]
fn three_networked_peers() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen", "--n", "9", "--seed", "2", "--out", "q.json", "--graph-out", "g.txt"], dir.path());
    ok(&["deal", "--quotes", "q.json", "--out-dir", "shares", "--seed", "3"], dir.path());
    let ports: Vec<u16> = (0..3).map(|_| free_port()).collect();
    for p in 0..3 {
        std::fs::write(
            dir.path().join(format!("peer{p}.toml")),
            format!(
                "peer = {p}\naddresses = [\"127.0.0.1:{}\", \"127.0.0.1:{}\", \"127.0.0.1:{}\"]\n\
                 connect_timeout_secs = 20\n[protocol]\nn = 9\nkappa = 3\nshuffle = \"random\"\n",
                ports[0], ports[1], ports[2]
            ),
        )
        .unwrap();
    }
    let children: Vec<_> = (0..3)
        .map(|p| {
            Command::new(env!("CARGO_BIN_EXE_kepap"))
                .args([
                    "peer",
                    "--config",
                    &format!("peer{p}.toml"),
                    "--shares",
                    &format!("shares/shares-{p}.json"),
                    "--out",
                    &format!("out{p}.json"),
                ])
                .current_dir(dir.path())
                .env("RUST_LOG", "warn")
                .spawn()
                .unwrap()
        })
        .collect();
    for mut c in children {
        assert!(c.wait().unwrap().success());
    }
    let text = ok(&["reveal", "out2.json", "out0.json", "out1.json"], dir.path());
    let sol = parse_solution(&text).unwrap();
    let quotes = QuoteFile::parse(&std::fs::read_to_string(dir.path().join("q.json")).unwrap())
        .unwrap()
        .quotes();
    let g = plain_graph(&quotes, &PrioPolicy::default());
    let packing = sol.to_packing(&g, 3).unwrap();
    let best = kepap::oracle::exact_solve(&g, 3).unwrap();
    assert!(3 * packing.total_weight >= best.total_weight);
}
