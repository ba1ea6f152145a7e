//! `kepap`: command-line front end.
//!
//! Log verbosity follows `RUST_LOG` (default `info`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod oracle_cmds;
mod protocol_cmds;
mod sim_cmds;

#[derive(Parser)]
#[command(name = "kepap", version, about = "Privacy-preserving kidney exchange")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic patient-donor pairs.
    Gen(GenArgs),
    /// Split a quote file into one share file per computing peer.
    Deal(DealArgs),
    /// Run one computing peer over TCP.
    Peer(PeerArgs),
    /// Combine the three peers' output shares into a solution.
    Reveal(RevealArgs),
    /// Run all three peers in-process on a quote or graph file.
    RunLocal(RunLocalArgs),
    /// Plaintext greedy solution of a graph file.
    Greedy(SolveArgs),
    /// Optimal solution of a graph file.
    Exact(SolveArgs),
    /// Greedy versus optimal matched pairs on random instances.
    Quality(QualityArgs),
    /// Simulate a dynamic exchange platform under both models.
    Simulate(SimulateArgs),
    /// Turn simulation results into a grid of mean ratios.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Population model (TOML); the built-in synthetic model otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Quote file to write; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the plaintext compatibility graph here.
    #[arg(long)]
    graph_out: Option<PathBuf>,
    /// Weight policy (TOML) for the graph; unit weights otherwise.
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Args)]
struct DealArgs {
    #[arg(long)]
    quotes: PathBuf,
    /// Directory receiving `shares-0.json`, `shares-1.json`, `shares-2.json`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 64)]
    ring_bits: u32,
    /// Dealer randomness; fresh entropy if absent.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PeerArgs {
    /// Peer configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// This peer's share file from `deal`.
    #[arg(long)]
    shares: PathBuf,
    /// Where to write this peer's output shares.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RevealArgs {
    /// The three peers' output share files, in any order.
    #[arg(num_args = 3, required = true)]
    parts: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ShuffleArg {
    Random,
    Identity,
    Seeded,
}

#[derive(Args)]
struct RunLocalArgs {
    /// Quote file (JSON).
    #[arg(long, conflicts_with = "graph", required_unless_present = "graph")]
    quotes: Option<PathBuf>,
    /// Graph file, dealt directly instead of computed from quotes.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    kappa: usize,
    /// Weight policy (TOML); unit weights otherwise.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ShuffleArg::Random)]
    shuffle: ShuffleArg,
    /// Seed for a seeded shuffle and for the peers' randomness.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 64)]
    ring_bits: u32,
    /// Solution CSV; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Transcript and phase statistics (JSON).
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 3)]
    kappa: usize,
    /// Relabel nodes by a random permutation from this seed first (greedy
    /// only).
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QualityArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 3)]
    kappa: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Grid configuration (TOML); the full default grid if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the repetition count.
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads; all cores by default.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Results from `simulate`.
    #[arg(long)]
    csv: PathBuf,
    /// Grid of mean ratios in percent (CSV); standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render the grid as an SVG heat map.
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn write_out(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    use anyhow::Context;
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &PathBuf) -> anyhow::Result<String> {
    use anyhow::Context;
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => protocol_cmds::gen(a),
        Command::Deal(a) => protocol_cmds::deal(a),
        Command::Peer(a) => protocol_cmds::peer(a),
        Command::Reveal(a) => protocol_cmds::reveal(a),
        Command::RunLocal(a) => protocol_cmds::run_local(a),
        Command::Greedy(a) => oracle_cmds::greedy(a),
        Command::Exact(a) => oracle_cmds::exact(a),
        Command::Quality(a) => oracle_cmds::quality(a),
        Command::Simulate(a) => sim_cmds::simulate(a),
        Command::Plot(a) => sim_cmds::plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
