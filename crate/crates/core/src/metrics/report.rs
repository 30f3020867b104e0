use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ablation::{ablation_sweep, AblationSummary};
use super::fairness::{cumulative_fairness, FairnessRow};
use super::profit::{average_profit, ProfitConfig};
use super::trend::{reward_trend, TrendAxis, TrendReport, DEFAULT_TREND_DEGREE};
use crate::error::{Error, Result};
use crate::sim::{run_simulation, throughput, EngineKind, SimConfig, SimRun};

/// Everything one report run needs. Serialized into the run manifest so a
/// report can be reproduced from it alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Base configuration; `engine` is overridden per run.
    pub sim: SimConfig,
    pub engines: Vec<EngineKind>,
    pub trend_rounds: usize,
    pub trend_degree: usize,
    pub scaling_nodes: Vec<usize>,
    pub scaling_rounds: usize,
    /// Sampled-Shapley permutations for the scaling runs, where only timing
    /// and rewards are read.
    pub scaling_permutations: usize,
    pub max_tps_drop: f64,
    pub profit: ProfitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sim: SimConfig::default(),
            engines: EngineKind::ALL.to_vec(),
            trend_rounds: 100,
            trend_degree: DEFAULT_TREND_DEGREE,
            scaling_nodes: vec![10, 20, 40],
            scaling_rounds: 5,
            scaling_permutations: 200,
            max_tps_drop: 0.15,
            profit: ProfitConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.engines.is_empty() {
            return Err(Error::Config("at least one engine is required".into()));
        }
        if self.trend_rounds == 0 || self.scaling_rounds == 0 || self.scaling_permutations == 0 {
            return Err(Error::Config(
                "round and permutation counts must be >= 1".into(),
            ));
        }
        if self.trend_degree == 0 {
            return Err(Error::Config("trend_degree must be >= 1".into()));
        }
        if self.scaling_nodes.windows(2).any(|w| w[0] >= w[1])
            || self.scaling_nodes.iter().any(|&n| n < 2)
        {
            return Err(Error::Config(
                "scaling_nodes must be strictly increasing and >= 2".into(),
            ));
        }
        Ok(())
    }

    fn engine_config(&self, engine: EngineKind) -> SimConfig {
        SimConfig {
            engine,
            ..self.sim.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineFairness {
    pub engine: EngineKind,
    pub rows: Vec<FairnessRow>,
    /// Distinct values of "number of nodes rewarded" seen across rounds.
    pub rewarded_per_round: BTreeSet<usize>,
    /// Whether every round rewarded exactly one PoFL group.
    pub single_group_rounds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub engine: EngineKind,
    pub nodes: usize,
    pub tps: f64,
    pub avg_profit_aud: f64,
}

/// One named pass/fail outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub fairness: Vec<EngineFairness>,
    pub ablation: Vec<AblationSummary>,
    pub trends: Vec<TrendReport>,
    pub scaling: Vec<ScalingPoint>,
    pub assertions: Vec<Assertion>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn scaling_for(&self, engine: EngineKind) -> Vec<&ScalingPoint> {
        self.scaling.iter().filter(|p| p.engine == engine).collect()
    }
}

fn engine_fairness(run: &SimRun, group_size: usize) -> Result<EngineFairness> {
    let rows = cumulative_fairness(&run.outcomes)?;
    let rewarded_per_round = run
        .outcomes
        .iter()
        .map(|o| o.rewarded_nodes().len())
        .collect();
    let single_group_rounds = run.outcomes.iter().all(|o| {
        let r: Vec<usize> = o.rewarded_nodes().iter().map(|id| id.index()).collect();
        r.len() == group_size && r[0].is_multiple_of(group_size) && r.windows(2).all(|w| w[1] == w[0] + 1)
    });
    Ok(EngineFairness {
        engine: run.config.engine,
        rows,
        rewarded_per_round,
        single_group_rounds,
    })
}

fn expected_rewarded(engine: EngineKind, cfg: &SimConfig) -> Option<usize> {
    match engine {
        EngineKind::Pow | EngineKind::Pos => Some(1),
        EngineKind::Pod => Some(cfg.baseline.pod_validators),
        EngineKind::Pofl => Some(cfg.baseline.pofl_group_size),
        EngineKind::Aicons => None,
    }
}

fn check(name: &str, passed: bool, detail: String) -> Assertion {
    Assertion {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn fairness_assertions(cfg: &PipelineConfig, fairness: &[EngineFairness]) -> Vec<Assertion> {
    let mut out = Vec::new();
    for f in fairness {
        let name = format!("fairness_{}", f.engine);
        match expected_rewarded(f.engine, &cfg.sim) {
            None => {
                let worst = f
                    .rows
                    .iter()
                    .map(|r| (r.ratio - cfg.sim.budget).abs())
                    .fold(0.0, f64::max);
                let degenerate = f.rows.iter().any(|r| r.degenerate);
                out.push(check(
                    &name,
                    worst <= 1e-6 && !degenerate,
                    format!(
                        "max |ratio - {}| = {worst:.3e}, degenerate = {degenerate}",
                        cfg.sim.budget
                    ),
                ));
            }
            Some(k) => {
                let counts_ok =
                    f.rewarded_per_round.len() == 1 && f.rewarded_per_round.contains(&k);
                let group_ok = f.engine != EngineKind::Pofl || f.single_group_rounds;
                out.push(check(
                    &name,
                    counts_ok && group_ok,
                    format!(
                        "rewarded per round {:?}, expected {k}",
                        f.rewarded_per_round
                    ),
                ));
            }
        }
    }
    out
}

fn ablation_assertion(ablation: &[AblationSummary]) -> Assertion {
    let sd = |label: &str| {
        ablation
            .iter()
            .find(|a| a.mask == label)
            .map(|a| a.ratio_std_dev)
    };
    let detail = ablation
        .iter()
        .map(|a| format!("{} {:.4}", a.mask, a.ratio_std_dev))
        .collect::<Vec<_>>()
        .join(", ");
    let passed = match (sd("full"), sd("acc+energy"), sd("acc+bandwidth"), sd("acc")) {
        (Some(full), Some(ae), Some(ab), Some(acc)) => {
            full <= ae && full <= ab && ae <= acc && ab <= acc
        }
        _ => false,
    };
    check("ablation_ordering", passed, detail)
}

fn scaling_assertions(cfg: &PipelineConfig, scaling: &[ScalingPoint]) -> Vec<Assertion> {
    let mut out = Vec::new();
    let order = [
        EngineKind::Aicons,
        EngineKind::Pos,
        EngineKind::Pod,
        EngineKind::Pofl,
        EngineKind::Pow,
    ];
    let present: Vec<EngineKind> = order
        .into_iter()
        .filter(|e| cfg.engines.contains(e))
        .collect();
    let at = |e: EngineKind, n: usize| scaling.iter().find(|p| p.engine == e && p.nodes == n);
    for &n in &cfg.scaling_nodes {
        let tps: Vec<f64> = present
            .iter()
            .filter_map(|&e| at(e, n).map(|p| p.tps))
            .collect();
        let ordered = tps.len() == present.len() && tps.windows(2).all(|w| w[0] > w[1]);
        let detail = present
            .iter()
            .zip(&tps)
            .map(|(e, t)| format!("{e} {t:.1}"))
            .collect::<Vec<_>>()
            .join(" > ");
        out.push(check(&format!("throughput_order_{n}"), ordered, detail));
    }
    if let (Some(&lo), Some(&hi)) = (cfg.scaling_nodes.first(), cfg.scaling_nodes.last()) {
        if let (Some(a), Some(b)) = (at(EngineKind::Aicons, lo), at(EngineKind::Aicons, hi)) {
            let drop = (a.tps - b.tps) / a.tps;
            out.push(check(
                "throughput_aicons_drop",
                drop < cfg.max_tps_drop,
                format!(
                    "{lo} nodes {:.1} tps, {hi} nodes {:.1} tps, drop {:.2}%",
                    a.tps,
                    b.tps,
                    drop * 100.0
                ),
            ));
        }
    }
    for &e in &present {
        let pts: Vec<&ScalingPoint> = scaling.iter().filter(|p| p.engine == e).collect();
        let decreasing = pts
            .windows(2)
            .all(|w| w[1].avg_profit_aud < w[0].avg_profit_aud);
        let detail = pts
            .iter()
            .map(|p| format!("{}: {:.2}", p.nodes, p.avg_profit_aud))
            .collect::<Vec<_>>()
            .join(", ");
        out.push(check(&format!("profit_decreasing_{e}"), decreasing, detail));
    }
    for rival in [EngineKind::Pow, EngineKind::Pofl] {
        if !cfg.engines.contains(&rival) || !cfg.engines.contains(&EngineKind::Aicons) {
            continue;
        }
        let beats =
            cfg.scaling_nodes
                .iter()
                .all(|&n| match (at(EngineKind::Aicons, n), at(rival, n)) {
                    (Some(a), Some(r)) => a.avg_profit_aud > r.avg_profit_aud,
                    _ => false,
                });
        out.push(check(
            &format!("profit_aicons_beats_{rival}"),
            beats,
            String::new(),
        ));
    }
    out
}

/// Runs fairness, ablation, trend, throughput and profit experiments.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Report> {
    cfg.validate()?;
    let mut fairness = Vec::new();
    let mut aicons_run = None;
    for &engine in &cfg.engines {
        log::info!("fairness run: {engine}");
        let run = run_simulation(&cfg.engine_config(engine))?;
        fairness.push(engine_fairness(&run, cfg.sim.baseline.pofl_group_size)?);
        if engine == EngineKind::Aicons {
            aicons_run = Some(run);
        }
    }
    let mut assertions = fairness_assertions(cfg, &fairness);

    let mut ablation = Vec::new();
    let mut trends = Vec::new();
    if let Some(run) = &aicons_run {
        ablation = ablation_sweep(&run.outcomes, cfg.sim.budget, cfg.sim.aicons.signed_rewards)?;
        assertions.push(ablation_assertion(&ablation));

        log::info!("trend run: {} rounds", cfg.trend_rounds);
        let trend_cfg = SimConfig {
            rounds: cfg.trend_rounds,
            ..cfg.engine_config(EngineKind::Aicons)
        };
        let trend_run = run_simulation(&trend_cfg)?;
        for axis in TrendAxis::ALL {
            let t = reward_trend(&trend_run.outcomes, axis, cfg.trend_degree)?;
            assertions.push(check(
                &format!("trend_{}", axis.name()),
                t.sign_ok(),
                format!(
                    "mean derivative {:.6e} over [{:.4}, {:.4}]",
                    t.mean_derivative, t.x_min, t.x_max
                ),
            ));
            trends.push(t);
        }
    }

    let mut scaling = Vec::new();
    for &engine in &cfg.engines {
        for &nodes in &cfg.scaling_nodes {
            log::info!("scaling run: {engine} with {nodes} nodes");
            let mut sc = SimConfig {
                nodes,
                rounds: cfg.scaling_rounds,
                ..cfg.engine_config(engine)
            };
            sc.shapley.permutations = cfg.scaling_permutations;
            sc.profiles.clear();
            sc.baseline.initial_stake.clear();
            let run = run_simulation(&sc)?;
            scaling.push(ScalingPoint {
                engine,
                nodes,
                tps: throughput(&run.outcomes)?,
                avg_profit_aud: average_profit(&run, &cfg.profit)?,
            });
        }
    }
    assertions.extend(scaling_assertions(cfg, &scaling));
    Ok(Report {
        fairness,
        ablation,
        trends,
        scaling,
        assertions,
    })
}

fn csv_file(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        dir.join(name),
    )?)))
}

pub const REPORT_FILES: [&str; 8] = [
    "fairness.csv",
    "ablation.csv",
    "trend_accuracy.csv",
    "trend_energy.csv",
    "trend_bandwidth.csv",
    "throughput.csv",
    "profit.csv",
    "summary.json",
];

/// Writes the report CSVs and `summary.json` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv_file(dir, "fairness.csv")?;
    w.write_record([
        "engine",
        "node_id",
        "reward",
        "contribution",
        "ratio",
        "degenerate",
    ])?;
    for f in &report.fairness {
        for r in &f.rows {
            w.write_record([
                f.engine.to_string(),
                r.node_id.index().to_string(),
                r.reward.to_string(),
                r.contribution.to_string(),
                r.ratio.to_string(),
                r.degenerate.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_file(dir, "ablation.csv")?;
    w.write_record([
        "mask",
        "node_id",
        "reward",
        "contribution",
        "ratio",
        "ratio_std_dev",
    ])?;
    for a in &report.ablation {
        for r in &a.rows {
            w.write_record([
                a.mask.clone(),
                r.node_id.index().to_string(),
                r.reward.to_string(),
                r.contribution.to_string(),
                r.ratio.to_string(),
                a.ratio_std_dev.to_string(),
            ])?;
        }
    }
    w.flush()?;

    for axis in TrendAxis::ALL {
        let mut w = csv_file(dir, &format!("trend_{}.csv", axis.name()))?;
        w.write_record([axis.name(), "reward", "fitted"])?;
        if let Some(t) = report.trends.iter().find(|t| t.axis == axis) {
            for ((x, y), f) in t.xs.iter().zip(&t.ys).zip(&t.fit.fitted) {
                w.write_record([x.to_string(), y.to_string(), f.to_string()])?;
            }
        }
        w.flush()?;
    }

    let mut w = csv_file(dir, "throughput.csv")?;
    w.write_record(["engine", "nodes", "tps"])?;
    for p in &report.scaling {
        w.write_record([p.engine.to_string(), p.nodes.to_string(), p.tps.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_file(dir, "profit.csv")?;
    w.write_record(["engine", "nodes", "avg_profit_aud"])?;
    for p in &report.scaling {
        w.write_record([
            p.engine.to_string(),
            p.nodes.to_string(),
            p.avg_profit_aud.to_string(),
        ])?;
    }
    w.flush()?;

    write_summary(
        report,
        BufWriter::new(File::create(dir.join("summary.json"))?),
    )
}

#[derive(Serialize)]
struct Summary<'a> {
    all_passed: bool,
    assertions: &'a [Assertion],
    scaling: &'a [ScalingPoint],
    trend_coefficients: Vec<(&'static str, &'a [f64])>,
    ablation_std_dev: Vec<(&'a str, f64)>,
}

pub fn write_summary<W: Write>(report: &Report, mut w: W) -> Result<()> {
    let summary = Summary {
        all_passed: report.all_passed(),
        assertions: &report.assertions,
        scaling: &report.scaling,
        trend_coefficients: report
            .trends
            .iter()
            .map(|t| (t.axis.name(), t.fit.coefficients.as_slice()))
            .collect(),
        ablation_std_dev: report
            .ablation
            .iter()
            .map(|a| (a.mask.as_str(), a.ratio_std_dev))
            .collect(),
    };
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
