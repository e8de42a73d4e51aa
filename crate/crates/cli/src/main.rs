use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use infowalk::eval::EvalSummary;
use infowalk::pipeline::{self, RunConfig};

/// Distributed-style graph embedding with information-centric random walks.
#[derive(Parser)]
#[command(name = "infowalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream-partition the training graph across logical machines.
    Partition(Opts),
    /// Run the random walks over a saved partition.
    Walk(Opts),
    /// Train embeddings on a saved corpus.
    Train(Opts),
    /// Score saved embeddings on the held-out edges.
    Eval(Opts),
    /// Run every stage and write every artifact.
    Pipeline(Opts),
}

/// Flags mirror the config-file keys; a flag overrides the file.
#[derive(Args)]
struct Opts {
    /// key = value config file applied before the flags
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Edge list, one `u v [w]` per line
    #[arg(long, value_name = "FILE")]
    graph: Option<String>,
    #[arg(long)]
    directed: bool,
    #[arg(long)]
    weighted: bool,
    #[arg(long, value_name = "M")]
    machines: Option<String>,
    /// Partition slack γ
    #[arg(long)]
    gamma: Option<String>,
    /// random | bfs-degree | dfs-degree
    #[arg(long)]
    order: Option<String>,
    /// Stream segments partitioned in parallel
    #[arg(long)]
    segments: Option<String>,
    /// mpgp | hash
    #[arg(long)]
    partitioner: Option<String>,
    /// huge | deepwalk | node2vec
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Fixed walk length; switches off information-centric stopping
    #[arg(long, value_name = "L")]
    fixed_length: Option<String>,
    /// Fixed walks per node; switches off information-centric stopping
    #[arg(long, value_name = "R")]
    walks_per_node: Option<String>,
    /// R² threshold for walk termination
    #[arg(long)]
    mu: Option<String>,
    /// Relative-entropy threshold for stopping rounds
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, value_name = "L")]
    min_length: Option<String>,
    #[arg(long, value_name = "L")]
    max_length: Option<String>,
    #[arg(long, value_name = "N")]
    max_rounds: Option<String>,
    #[arg(long, value_name = "D")]
    dim: Option<String>,
    #[arg(long, value_name = "W")]
    window: Option<String>,
    #[arg(long, value_name = "K")]
    negatives: Option<String>,
    /// Walks trained together in one batch
    #[arg(long, value_name = "N")]
    multi_windows: Option<String>,
    #[arg(long, value_name = "N")]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    lr_min: Option<String>,
    /// Training threads per machine
    #[arg(long, value_name = "N")]
    workers: Option<String>,
    /// Seconds between model synchronizations
    #[arg(long, value_name = "SECS")]
    sync_interval: Option<String>,
    /// Synchronize every N lifetimes instead (deterministic)
    #[arg(long, value_name = "N")]
    sync_lifetimes: Option<String>,
    /// hotness | full
    #[arg(long)]
    sync_mode: Option<String>,
    /// input | mean
    #[arg(long)]
    vectors: Option<String>,
    /// Share of edges held out; 0 trains on the whole graph
    #[arg(long)]
    test_fraction: Option<String>,
    #[arg(long, value_name = "N")]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory for artifacts
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
}

impl Opts {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let values = [
            ("graph", &self.graph),
            ("machines", &self.machines),
            ("gamma", &self.gamma),
            ("order", &self.order),
            ("segments", &self.segments),
            ("partitioner", &self.partitioner),
            ("strategy", &self.strategy),
            ("p", &self.p),
            ("q", &self.q),
            ("fixed-length", &self.fixed_length),
            ("walks-per-node", &self.walks_per_node),
            ("mu", &self.mu),
            ("delta", &self.delta),
            ("min-length", &self.min_length),
            ("max-length", &self.max_length),
            ("max-rounds", &self.max_rounds),
            ("dim", &self.dim),
            ("window", &self.window),
            ("negatives", &self.negatives),
            ("multi-windows", &self.multi_windows),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("lr-min", &self.lr_min),
            ("workers", &self.workers),
            ("sync-interval", &self.sync_interval),
            ("sync-lifetimes", &self.sync_lifetimes),
            ("sync-mode", &self.sync_mode),
            ("vectors", &self.vectors),
            ("test-fraction", &self.test_fraction),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        for (key, value) in values {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if self.directed {
            cfg.directed = true;
        }
        if self.weighted {
            cfg.weighted = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_auc(s: &EvalSummary) {
    if s.trials.len() > 1 {
        println!("auc {:.4} ± {:.4} over {} trials", s.mean, s.std, s.trials.len());
    } else {
        println!("auc {:.4}", s.mean);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Partition(o) => {
            let cfg = o.config()?;
            let parts = pipeline::cmd_partition(&cfg)?;
            println!("partition sizes {:?}", parts.sizes);
        }
        Command::Walk(o) => {
            let cfg = o.config()?;
            let (corpus, comm) = pipeline::cmd_walk(&cfg)?;
            println!(
                "{} walks, mean length {:.2}, {} rounds, {} messages, {} bytes",
                corpus.len(),
                corpus.mean_len(),
                corpus.rounds,
                comm.total_messages(),
                comm.total_bytes()
            );
        }
        Command::Train(o) => {
            let cfg = o.config()?;
            let (_, report) = pipeline::cmd_train(&cfg)?;
            println!(
                "{} epochs, final loss {:.4}, {} sync periods, {} bytes synced",
                report.epochs.len(),
                report.final_loss().unwrap_or(f64::NAN),
                report.sync_periods(),
                report.bytes_synced()
            );
        }
        Command::Eval(o) => {
            let cfg = o.config()?;
            print_auc(&pipeline::cmd_eval(&cfg)?);
        }
        Command::Pipeline(o) => {
            let cfg = o.config()?;
            let (outcome, summary) = pipeline::cmd_pipeline(&cfg)?;
            for t in &outcome.timings {
                println!("{:<9} {:>8.3}s", t.stage, t.seconds);
            }
            match summary {
                Some(s) => print_auc(&s),
                None => println!("no held-out edges; auc skipped"),
            }
            println!("artifacts in {}", cfg.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // the core errors already embed their causes
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
