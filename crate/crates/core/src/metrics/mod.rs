//! Post-processing of simulation runs: reward-contribution fairness,
//! Shapley ablation, reward trend fits, throughput and profit.

mod ablation;
mod fairness;
mod profit;
mod report;
mod trend;

pub use ablation::{
    ablate_outcomes, ablation_sweep, run_ablation, AblationMask, AblationSummary, ABLATION_MASKS,
};
pub use fairness::{
    cumulative_fairness, reward_contribution_ratio, round_fairness, std_dev, FairnessRow,
};
pub use profit::{
    average_profit, node_profits, profit, ProfitConfig, DEFAULT_HORIZON_S,
    DEFAULT_RATE_AUD_PER_KWH, ETH_PRICE_AUD,
};
pub use report::{
    run_pipeline, write_report, write_summary, Assertion, EngineFairness, PipelineConfig, Report,
    ScalingPoint, REPORT_FILES,
};
pub use trend::{
    fit_trend, reward_trend, trend_points, TrendAxis, TrendFit, TrendReport, DEFAULT_TREND_DEGREE,
};
