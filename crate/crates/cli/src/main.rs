//! `aicons` command-line driver.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aicons_core::domain::{verify_chain_jsonl, NodeId};
use aicons_core::metrics::{
    ablate_outcomes, ablation_sweep, cumulative_fairness, run_pipeline, std_dev, write_report,
    FairnessRow, PipelineConfig,
};
use aicons_core::recommender::{train_federated, uniform_guess_baseline, FederatedConfig};
use aicons_core::shapley::DimensionMask;
use aicons_core::sim::{run_simulation, throughput, write_outcomes_csv, EngineKind, SimConfig};
use aicons_core::trace::{generate_trace, group_records, load_trace, save_trace, TraceSpec};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "aicons",
    version,
    about = "AI-driven consensus simulator with Shapley rewards"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    nodes: Option<usize>,
    #[arg(long, global = true)]
    rounds: Option<usize>,
    #[arg(long, global = true, env = "AICONS_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// TOML or JSON run configuration; a manifest.json from an earlier run works too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic monitoring trace.
    GenTrace {
        #[arg(long)]
        records: Option<usize>,
        #[arg(long)]
        planted_winner: Option<u32>,
        #[arg(long)]
        group_size: Option<usize>,
    },
    /// Train the recommender with FedAvg on a trace and report top-1 accuracy.
    Train {
        /// Trace CSV; generated from the trace settings when omitted.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        planted_winner: Option<u32>,
        #[arg(long)]
        fed_rounds: Option<usize>,
    },
    /// Run one consensus engine.
    Simulate {
        #[arg(long)]
        engine: Option<EngineKind>,
        /// Trace whose groups seed the genesis history.
        #[arg(long)]
        genesis_trace: Option<PathBuf>,
        #[arg(long)]
        planted_winner: Option<u32>,
    },
    /// Re-issue AICons rewards from a subset of Shapley dimensions.
    Ablate {
        /// `full`, `acc`, `acc+energy`, `acc+bandwidth`, ...; all standard masks when omitted.
        #[arg(long)]
        mask: Option<DimensionMask>,
    },
    /// Run every experiment and write the CSV reports plus summary.json.
    Report {
        /// Exit 1 when any assertion fails.
        #[arg(long)]
        strict: bool,
    },
    /// Validate an exported chain file.
    VerifyChain { path: PathBuf },
}

/// Everything a run depends on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    pipeline: PipelineConfig,
    trace: TraceSpec,
    federated: FederatedConfig,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    argv: Vec<String>,
    #[serde(flatten)]
    config: &'a RunConfig,
}

/// A failure that should exit with the usage code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_toml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let parsed = if is_toml {
        toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
    };
    Ok(parsed)
}

fn resolve(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.pipeline.sim.seed = seed;
        cfg.trace.seed = seed;
        cfg.federated.seed = seed;
    }
    if let Some(n) = global.nodes {
        cfg.pipeline.sim.nodes = n;
        cfg.trace.nodes = n;
        cfg.federated.nodes = n;
    }
    if let Some(r) = global.rounds {
        cfg.pipeline.sim.rounds = r;
    }
    Ok(cfg)
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv: std::env::args().collect(),
        config: cfg,
    };
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_fairness(dir: &Path, name: &str, rows: &[FairnessRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    w.write_record(["node_id", "reward", "contribution", "ratio", "degenerate"])?;
    for r in rows {
        w.write_record([
            r.node_id.index().to_string(),
            r.reward.to_string(),
            r.contribution.to_string(),
            r.ratio.to_string(),
            r.degenerate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn gen_trace(
    dir: &Path,
    cfg: &mut RunConfig,
    records: Option<usize>,
    planted: Option<u32>,
    k: Option<usize>,
) -> Result<()> {
    if let Some(r) = records {
        cfg.trace.records = r;
    }
    if let Some(p) = planted {
        cfg.trace.planted_winner = Some(NodeId(p));
    }
    if k.is_some() {
        cfg.trace.group_size = k;
    }
    let trace = generate_trace(&cfg.trace)?;
    let path = dir.join("trace.csv");
    save_trace(&path, &trace)?;
    println!("wrote {} records to {}", trace.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    round_accuracy: Vec<f64>,
    final_accuracy: f64,
    uniform_baseline: f64,
    round_losses: Vec<(f64, f64)>,
}

fn train(
    dir: &Path,
    cfg: &mut RunConfig,
    trace: Option<PathBuf>,
    planted: Option<u32>,
    fed_rounds: Option<usize>,
) -> Result<()> {
    if let Some(p) = planted {
        cfg.trace.planted_winner = Some(NodeId(p));
    }
    if let Some(r) = fed_rounds {
        cfg.federated.rounds = r;
    }
    let k = cfg.trace.group_size();
    let records = match &trace {
        Some(p) => load_trace(p, Some(k))?,
        None => generate_trace(&cfg.trace)?,
    };
    let groups = group_records(&records, k);
    let run = train_federated(&groups, &cfg.pipeline.sim.model, &cfg.federated)?;
    let profiles = cfg.trace.resolve_profiles()?;
    let baseline =
        uniform_guess_baseline(&profiles, 1000, &cfg.pipeline.sim.model, cfg.trace.seed)?;
    fs::write(dir.join("model.bin"), run.model.to_blob())?;
    let summary = TrainSummary {
        round_accuracy: run.round_accuracy.clone(),
        final_accuracy: run.accuracy(),
        uniform_baseline: baseline,
        round_losses: run.round_losses.clone(),
    };
    let mut w = create(dir, "train.json")?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    println!(
        "top-1 accuracy {:.4} (uniform-guess baseline {:.4})",
        run.accuracy(),
        baseline
    );
    Ok(())
}

fn simulate(
    dir: &Path,
    cfg: &mut RunConfig,
    engine: Option<EngineKind>,
    genesis: Option<PathBuf>,
    planted: Option<u32>,
) -> Result<()> {
    let sim = &mut cfg.pipeline.sim;
    if let Some(e) = engine {
        sim.engine = e;
    }
    if genesis.is_some() {
        sim.genesis_trace = genesis;
    }
    if let Some(p) = planted {
        sim.planted_winner = Some(NodeId(p));
    }
    let run = run_simulation(sim)?;
    write_outcomes_csv(create(dir, "outcomes.csv")?, &run.outcomes)?;
    run.write_contributions_csv(create(dir, "contributions.csv")?)?;
    write_fairness(dir, "fairness.csv", &cumulative_fairness(&run.outcomes)?)?;
    let mut w = create(dir, "chain.jsonl")?;
    run.chain.write_jsonl(&mut w)?;
    w.flush()?;
    if sim.engine == EngineKind::Aicons {
        fs::write(dir.join("model.bin"), run.final_model.to_blob())?;
    }
    println!(
        "{} rounds of {} on {} nodes: {:.1} tps, chain height {}",
        run.outcomes.len(),
        sim.engine,
        sim.nodes,
        throughput(&run.outcomes)?,
        run.chain.tip().height
    );
    Ok(())
}

fn ablate(dir: &Path, cfg: &mut RunConfig, mask: Option<DimensionMask>) -> Result<()> {
    let sim = SimConfig {
        engine: EngineKind::Aicons,
        ..cfg.pipeline.sim.clone()
    };
    cfg.pipeline.sim.engine = EngineKind::Aicons;
    let run = run_simulation(&sim)?;
    let summaries = match mask {
        Some(m) => {
            let rows = ablate_outcomes(&run.outcomes, m, sim.budget, sim.aicons.signed_rewards)?;
            let sd = std_dev(&rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
            vec![(m.label(), sd, rows)]
        }
        None => ablation_sweep(&run.outcomes, sim.budget, sim.aicons.signed_rewards)?
            .into_iter()
            .map(|a| (a.mask, a.ratio_std_dev, a.rows))
            .collect(),
    };
    let mut w = csv::Writer::from_writer(create(dir, "ablation.csv")?);
    w.write_record([
        "mask",
        "node_id",
        "reward",
        "contribution",
        "ratio",
        "ratio_std_dev",
    ])?;
    for (label, sd, rows) in &summaries {
        for r in rows {
            w.write_record([
                label.clone(),
                r.node_id.index().to_string(),
                r.reward.to_string(),
                r.contribution.to_string(),
                r.ratio.to_string(),
                sd.to_string(),
            ])?;
        }
        println!("{label}: ratio std-dev {sd:.4}");
    }
    w.flush()?;
    Ok(())
}

fn report(dir: &Path, cfg: &RunConfig, strict: bool) -> Result<()> {
    let report = run_pipeline(&cfg.pipeline)?;
    write_report(&report, dir)?;
    for a in &report.assertions {
        println!(
            "{} {} {}",
            if a.passed { "PASS" } else { "FAIL" },
            a.name,
            a.detail
        );
    }
    if strict && !report.all_passed() {
        anyhow::bail!("one or more report assertions failed");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::VerifyChain { path } = &cli.command {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let blocks = verify_chain_jsonl(BufReader::new(file))?;
        println!("chain valid: {blocks} blocks");
        return Ok(());
    }
    let mut cfg = resolve(&cli.global)?;
    let dir = cli.global.out_dir.as_path();
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = match &cli.command {
        Command::GenTrace { .. } => "gen-trace",
        Command::Train { .. } => "train",
        Command::Simulate { .. } => "simulate",
        Command::Ablate { .. } => "ablate",
        Command::Report { .. } => "report",
        Command::VerifyChain { .. } => unreachable!(),
    };
    let result = match cli.command {
        Command::GenTrace {
            records,
            planted_winner,
            group_size,
        } => gen_trace(dir, &mut cfg, records, planted_winner, group_size),
        Command::Train {
            trace,
            planted_winner,
            fed_rounds,
        } => train(dir, &mut cfg, trace, planted_winner, fed_rounds),
        Command::Simulate {
            engine,
            genesis_trace,
            planted_winner,
        } => simulate(dir, &mut cfg, engine, genesis_trace, planted_winner),
        Command::Ablate { mask } => ablate(dir, &mut cfg, mask),
        Command::Report { strict } => report(dir, &cfg, strict),
        Command::VerifyChain { .. } => unreachable!(),
    };
    write_manifest(dir, name, &cfg)?;
    result
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|e| {
        e.downcast_ref::<UsageError>().is_some()
            || matches!(
                e.downcast_ref::<aicons_core::Error>(),
                Some(aicons_core::Error::Config(_))
            )
    });
    if usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
