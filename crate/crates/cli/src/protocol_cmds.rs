use std::collections::BTreeMap;
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use serde::Serialize;

use kepap::abb::{deal as deal_value, Ring, SeedSource, Session};
use kepap::compat::{plain_graph, PrioPolicy, SharedQuote};
use kepap::datagen::{gen_pairs, PopulationModel};
use kepap::formats::{
    parse_graph, write_graph, write_solution, OutputShareFile, PeerConfig, QuoteFile, QuoteShareFile,
    SCHEMA_VERSION,
};
use kepap::gates::ShuffleMode;
use kepap::protocol::{
    reveal as reveal_solution, run_local_graph, run_local_quotes, run_protocol, PhaseStats,
    ProtocolConfig,
};
use kepap::transport::{summarize, tcp, PeerId};

use crate::{read, write_out, DealArgs, GenArgs, PeerArgs, RevealArgs, RunLocalArgs, ShuffleArg};

pub fn load_policy(path: Option<&std::path::PathBuf>) -> Result<PrioPolicy> {
    match path {
        None => Ok(PrioPolicy::default()),
        Some(p) => toml::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display())),
    }
}

pub fn load_model(path: Option<&std::path::PathBuf>) -> Result<PopulationModel> {
    match path {
        None => Ok(PopulationModel::default()),
        Some(p) => toml::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display())),
    }
}

pub fn gen(a: GenArgs) -> Result<()> {
    ensure!(a.n >= 1, "--n must be at least 1");
    let model = load_model(a.model.as_ref())?;
    let quotes = gen_pairs(a.n, &model, a.seed)?;
    write_out(a.out.as_ref(), &QuoteFile::new(model.layout, &quotes).to_json())?;
    if let Some(g) = &a.graph_out {
        let policy = load_policy(a.policy.as_ref())?;
        std::fs::write(g, write_graph(&plain_graph(&quotes, &policy)))?;
    }
    log::info!("generated {} pairs with seed {}", a.n, a.seed);
    Ok(())
}

pub fn deal(a: DealArgs) -> Result<()> {
    let file = QuoteFile::parse(&read(&a.quotes)?).with_context(|| format!("in {}", a.quotes.display()))?;
    let ring = Ring::new(a.ring_bits)?;
    let mut rng = match a.seed {
        Some(s) => rand_chacha::ChaCha12Rng::seed_from_u64(s),
        None => rand_chacha::ChaCha12Rng::from_os_rng(),
    };
    let mut out: [Vec<Vec<[u64; 2]>>; 3] = Default::default();
    for q in file.quotes() {
        let encoded = q.encode(&file.layout)?;
        let mut per_peer: [Vec<[u64; 2]>; 3] = Default::default();
        for x in encoded {
            let shares = deal_value(x, &mut rng);
            for (p, s) in shares.iter().enumerate() {
                per_peer[p].push([ring.reduce(s.a), ring.reduce(s.b)]);
            }
        }
        for p in 0..3 {
            out[p].push(std::mem::take(&mut per_peer[p]));
        }
    }
    std::fs::create_dir_all(&a.out_dir)?;
    for (peer, shares) in out.into_iter().enumerate() {
        let f = QuoteShareFile {
            schema_version: SCHEMA_VERSION,
            peer,
            layout: file.layout,
            shares,
        };
        let path = a.out_dir.join(format!("shares-{peer}.json"));
        std::fs::write(&path, f.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    log::info!("dealt {} pairs into {}", file.pairs.len(), a.out_dir.display());
    Ok(())
}

pub fn peer(a: PeerArgs) -> Result<()> {
    let cfg = PeerConfig::parse(&read(&a.config)?).with_context(|| format!("in {}", a.config.display()))?;
    let shares = QuoteShareFile::parse(&read(&a.shares)?).with_context(|| format!("in {}", a.shares.display()))?;
    ensure!(
        shares.peer == cfg.peer,
        "share file belongs to peer {}, config is for peer {}",
        shares.peer,
        cfg.peer
    );
    ensure!(
        shares.layout == cfg.protocol.layout,
        "share file layout differs from the configured layout"
    );
    ensure!(
        shares.shares.len() == cfg.protocol.n,
        "share file has {} pairs, config expects {}",
        shares.shares.len(),
        cfg.protocol.n
    );
    let ring = Ring::new(cfg.ring_bits)?;
    let me = PeerId::new(cfg.peer)?;
    log::info!("peer {} connecting", cfg.peer);
    let ep = tcp::connect(me, &cfg.addresses, Duration::from_secs(cfg.connect_timeout_secs))?;
    let mut s = Session::setup(ep, ring, SeedSource::Entropy)?;
    let quotes = (0..shares.shares.len())
        .map(|i| SharedQuote::new(shares.layout, shares.pair_shares(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let (solution, stats) = run_protocol(&mut s, &cfg.protocol, &quotes)?;
    log::info!(
        "done: {} rounds, {} bytes sent",
        stats.rounds,
        s.transcript().bytes_sent()
    );
    let out = OutputShareFile {
        schema_version: SCHEMA_VERSION,
        peer: cfg.peer,
        ring_bits: cfg.ring_bits,
        solution,
    };
    std::fs::write(&a.out, out.to_json()).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

pub fn reveal(a: RevealArgs) -> Result<()> {
    let mut parts: Vec<OutputShareFile> = Vec::new();
    for p in &a.parts {
        parts.push(OutputShareFile::parse(&read(p)?).with_context(|| format!("in {}", p.display()))?);
    }
    parts.sort_by_key(|p| p.peer);
    let peers: Vec<usize> = parts.iter().map(|p| p.peer).collect();
    ensure!(peers == [0, 1, 2], "need one output file from each of peers 0, 1, 2; got {peers:?}");
    let bits = parts[0].ring_bits;
    ensure!(parts.iter().all(|p| p.ring_bits == bits), "output files disagree on the ring");
    let [p0, p1, p2]: [OutputShareFile; 3] = parts.try_into().map_err(|_| anyhow::anyhow!("three files"))?;
    let sol = reveal_solution(Ring::new(bits)?, &[p0.solution, p1.solution, p2.solution])?;
    write_out(a.out.as_ref(), &write_solution(&sol))
}

#[derive(Serialize)]
struct RunStats {
    pairs: usize,
    kappa: usize,
    matched_pairs: usize,
    elapsed_secs: f64,
    total_bytes: u64,
    phases: PhaseStats,
    /// Bytes sent per round tag, summed over the peers.
    transcript: BTreeMap<u32, u64>,
}

pub fn run_local(a: RunLocalArgs) -> Result<()> {
    let ring = Ring::new(a.ring_bits)?;
    let policy = load_policy(a.policy.as_ref())?;
    let shuffle = match (a.shuffle, a.seed) {
        (ShuffleArg::Random, _) => ShuffleMode::Random,
        (ShuffleArg::Identity, _) => ShuffleMode::Identity,
        (ShuffleArg::Seeded, Some(s)) => ShuffleMode::Seeded(s),
        (ShuffleArg::Seeded, None) => bail!("--shuffle seeded needs --seed"),
    };
    let seeds = a.seed.map_or(SeedSource::Entropy, SeedSource::Fixed);
    let run = if let Some(path) = &a.quotes {
        let file = QuoteFile::parse(&read(path)?).with_context(|| format!("in {}", path.display()))?;
        let quotes = file.quotes();
        let mut cfg = ProtocolConfig::new(quotes.len())
            .with_kappa(a.kappa)
            .with_shuffle(shuffle)
            .with_policy(policy);
        cfg.layout = file.layout;
        run_local_quotes(&cfg, &quotes, ring, seeds)?
    } else {
        let path = a.graph.as_ref().expect("clap requires one input");
        let g = parse_graph(&read(path)?).with_context(|| format!("in {}", path.display()))?;
        let cfg = ProtocolConfig::new(g.n()).with_kappa(a.kappa).with_shuffle(shuffle);
        run_local_graph(&cfg, &g, ring, seeds)?
    };
    log::info!(
        "{} pairs, {} matched, {} bytes in {:.2?}",
        run.solution.n(),
        run.solution.matched_pairs(),
        run.total_bytes(),
        run.elapsed
    );
    if let Some(p) = &a.stats {
        let stats = RunStats {
            pairs: run.solution.n(),
            kappa: a.kappa,
            matched_pairs: run.solution.matched_pairs(),
            elapsed_secs: run.elapsed.as_secs_f64(),
            total_bytes: run.total_bytes(),
            phases: run.stats,
            transcript: summarize(&run.transcripts).into_iter().collect(),
        };
        std::fs::write(p, serde_json::to_string_pretty(&stats)?)?;
    }
    write_out(a.out.as_ref(), &write_solution(&run.solution))
}
