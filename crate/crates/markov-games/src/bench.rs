//! Seeded multi-trial evaluation: experiment configs, per-trial digests,
//! aggregates, oracle comparison, and line-delimited reports.
//!
//! Determinism contract: trial `t` of an experiment draws from
//! `RandomSource::new(seed, t)`, so a rerun with the same config and seed
//! reproduces byte-identical per-trial digests. Trials execute in a work
//! pool; records are assembled in trial order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grade::compute_grade;
use crate::oracle::{self, OracleStart};
use crate::rng::RandomSource;
use crate::strategy::{
    run_budget_mg_metric_with, run_budget_mg_unit_with, run_doubling_metric_with,
    run_doubling_unit_with, run_fair_greedy_with, run_index_strategy_with, run_sequential_with,
    ChainGrades, DoublingParams, GreedyMedianOrdering, IndexTables, StrategyOutcome,
};
use crate::system::MetricInstance;

/// The playable strategies of the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyId {
    /// Minimum-index play (unit dummy grades), halts at the first reward.
    Index,
    /// Doubling framework over the budgeted unit subroutine.
    DoublingUnit,
    /// One budgeted unit pass with budget `B`.
    BudgetUnit,
    /// One budgeted metric pass with budget `B`.
    BudgetMetric,
    /// Doubling framework over the budgeted metric subroutine.
    DoublingMetric,
    /// Fair-greedy reference (fair budget = safety cap, switching free).
    FairGreedy,
    /// Visits chains in listed order, quitting each at its first epoch end.
    Sequential,
}

impl std::fmt::Display for StrategyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StrategyId::Index => "index",
            StrategyId::DoublingUnit => "doubling-unit",
            StrategyId::BudgetUnit => "budget-unit",
            StrategyId::BudgetMetric => "budget-metric",
            StrategyId::DoublingMetric => "doubling-metric",
            StrategyId::FairGreedy => "fair-greedy",
            StrategyId::Sequential => "sequential",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "index" => StrategyId::Index,
            "doubling-unit" => StrategyId::DoublingUnit,
            "budget-unit" => StrategyId::BudgetUnit,
            "budget-metric" => StrategyId::BudgetMetric,
            "doubling-metric" => StrategyId::DoublingMetric,
            "fair-greedy" => StrategyId::FairGreedy,
            "sequential" => StrategyId::Sequential,
            other => return Err(Error::InvalidParam(format!("unknown strategy `{other}`"))),
        })
    }
}

/// Constant profiles: `experiment` keeps the configured doubling constants;
/// `paper` pins the budget constant to the literal 50000.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Paper,
    Experiment,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "paper" => Profile::Paper,
            "experiment" => Profile::Experiment,
            other => return Err(Error::InvalidParam(format!("unknown profile `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub strategy: StrategyId,
    pub trials: usize,
    pub seed: u64,
    pub beta: f64,
    pub c: f64,
    pub alpha: f64,
    pub tol: f64,
    /// Budget `B` of the one-shot budgeted strategies.
    pub budget: f64,
    pub safety_cap: f64,
    pub max_phases: usize,
    pub profile: Profile,
}

impl ExperimentConfig {
    pub fn new(strategy: StrategyId) -> Self {
        Self {
            strategy,
            trials: 100,
            seed: 0,
            beta: 1.5,
            c: 1.0,
            alpha: 1.0,
            tol: 1e-9,
            budget: 1.0,
            safety_cap: 1e9,
            max_phases: 64,
            profile: Profile::Experiment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParam("trials must be at least 1".into()));
        }
        if !(self.beta > 1.0 && self.beta < 2.0) {
            return Err(Error::InvalidParam("beta must lie in (1, 2)".into()));
        }
        for (name, value) in [
            ("c", self.c),
            ("alpha", self.alpha),
            ("tol", self.tol),
            ("budget", self.budget),
            ("safety-cap", self.safety_cap),
        ] {
            if value <= 0.0 {
                return Err(Error::InvalidParam(format!("{name} must be positive")));
            }
        }
        if self.max_phases == 0 {
            return Err(Error::InvalidParam("max phases must be at least 1".into()));
        }
        Ok(())
    }

    fn doubling_params(&self) -> DoublingParams {
        DoublingParams {
            beta: self.beta,
            c: match self.profile {
                Profile::Paper => 50_000.0,
                Profile::Experiment => self.c,
            },
            alpha: self.alpha,
            max_phases: self.max_phases,
            tol: self.tol,
        }
    }
}

/// One trial's result, stripped to what reports keep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDigest {
    pub trial: usize,
    pub rewards: usize,
    pub movement_cost: f64,
    pub switching_cost: f64,
    pub total_cost: f64,
    pub truncated: bool,
    pub phases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fair_cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostStats {
    pub mean: f64,
    pub stderr: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

fn cost_stats(values: &[f64]) -> CostStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    let quantile = |q: f64| sorted[((n - 1) as f64 * q).round() as usize];
    CostStats {
        mean,
        stderr,
        p10: quantile(0.1),
        p50: quantile(0.5),
        p90: quantile(0.9),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    /// Fraction of trials that collected the full reward target.
    pub success_rate: f64,
    pub total: CostStats,
    pub movement: CostStats,
    pub switching: CostStats,
}

/// Recomputes the aggregate from per-trial digests.
pub fn aggregate_of(records: &[TrialDigest], reward_target: usize) -> Aggregate {
    let totals: Vec<f64> = records.iter().map(|r| r.total_cost).collect();
    let movements: Vec<f64> = records.iter().map(|r| r.movement_cost).collect();
    let switchings: Vec<f64> = records.iter().map(|r| r.switching_cost).collect();
    let successes = records.iter().filter(|r| r.rewards >= reward_target).count();
    Aggregate {
        trials: records.len(),
        success_rate: successes as f64 / records.len() as f64,
        total: cost_stats(&totals),
        movement: cost_stats(&movements),
        switching: cost_stats(&switchings),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub run_id: String,
    /// Wall-clock stamp; the only field excluded from determinism checks.
    pub created_unix: u64,
    pub version: String,
    pub config: ExperimentConfig,
    pub reward_target: usize,
    pub records: Vec<TrialDigest>,
    pub aggregate: Aggregate,
    pub oracle_value: Option<f64>,
    pub oracle_skipped: Option<String>,
    /// Mean total cost over the oracle value, when the oracle ran.
    pub ratio: Option<f64>,
}

impl Report {
    /// Line-delimited form: a header line, one line per trial, and an
    /// aggregate footer.
    pub fn to_jsonl(&self) -> String {
        let header = serde_json::json!({
            "run_id": self.run_id,
            "created_unix": self.created_unix,
            "version": self.version,
            "config": self.config,
            "reward_target": self.reward_target,
        });
        let mut out = String::new();
        out.push_str(&header.to_string());
        out.push('\n');
        out.push_str(&self.body_jsonl());
        out
    }

    /// Records plus footer — the deterministic part of the report.
    pub fn body_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("digest serializes"));
            out.push('\n');
        }
        let footer = serde_json::json!({
            "aggregate": self.aggregate,
            "oracle_value": self.oracle_value,
            "oracle_skipped": self.oracle_skipped,
            "ratio": self.ratio,
        });
        out.push_str(&footer.to_string());
        out.push('\n');
        out
    }
}

/// Precomputed per-instance context shared by all trials of one experiment.
enum StrategyContext {
    UnitTables(IndexTables),
    Grades(ChainGrades),
}

fn build_context(config: &ExperimentConfig, instance: &MetricInstance) -> Result<StrategyContext> {
    Ok(match config.strategy {
        StrategyId::Index | StrategyId::DoublingUnit | StrategyId::BudgetUnit => {
            StrategyContext::UnitTables(IndexTables::unit(instance, config.tol)?)
        }
        StrategyId::BudgetMetric | StrategyId::DoublingMetric | StrategyId::Sequential => {
            StrategyContext::Grades(ChainGrades::compute(instance, config.tol)?)
        }
        StrategyId::FairGreedy => {
            let mut grades = Vec::with_capacity(instance.num_chains());
            for chain in instance.chains() {
                let mut g = Vec::with_capacity(chain.num_states());
                for v in 0..chain.num_states() {
                    g.push(compute_grade(chain, v, config.tol)?);
                }
                grades.push(g);
            }
            StrategyContext::Grades(ChainGrades { grades })
        }
    })
}

fn digest_of(outcome: &StrategyOutcome, trial: usize) -> TrialDigest {
    TrialDigest {
        trial,
        rewards: outcome.rewards_collected,
        movement_cost: outcome.movement_cost,
        switching_cost: outcome.switching_cost,
        total_cost: outcome.total_cost(),
        truncated: outcome.truncated,
        phases: outcome.phase_log.len(),
        fair_cost: outcome.fair_cost,
    }
}

fn run_trial(
    config: &ExperimentConfig,
    instance: &MetricInstance,
    ctx: &StrategyContext,
    trial: usize,
) -> Result<TrialDigest> {
    let k = instance.reward_target();
    let mut rng = RandomSource::new(config.seed, trial as u64);
    let digest = match (config.strategy, ctx) {
        (StrategyId::Index, StrategyContext::UnitTables(tables)) => {
            let out = run_index_strategy_with(instance, tables, &mut rng, config.safety_cap)?;
            digest_of(&out, trial)
        }
        (StrategyId::DoublingUnit, StrategyContext::UnitTables(tables)) => {
            let out =
                run_doubling_unit_with(instance, tables, k, config.doubling_params(), &mut rng)?;
            digest_of(&out, trial)
        }
        (StrategyId::BudgetUnit, StrategyContext::UnitTables(tables)) => {
            let (_, _, out) =
                run_budget_mg_unit_with(instance, tables, k, config.budget, &mut rng)?;
            digest_of(&out, trial)
        }
        (StrategyId::BudgetMetric, StrategyContext::Grades(grades)) => {
            let (_, _, out) = run_budget_mg_metric_with(
                instance,
                grades,
                k,
                config.budget,
                config.alpha,
                &GreedyMedianOrdering,
                &mut rng,
            )?;
            digest_of(&out, trial)
        }
        (StrategyId::DoublingMetric, StrategyContext::Grades(grades)) => {
            let out = run_doubling_metric_with(
                instance,
                grades,
                k,
                config.doubling_params(),
                &GreedyMedianOrdering,
                &mut rng,
            )?;
            digest_of(&out, trial)
        }
        (StrategyId::Sequential, StrategyContext::Grades(grades)) => {
            let out = run_sequential_with(instance, grades, k, &mut rng, config.safety_cap)?;
            digest_of(&out, trial)
        }
        (StrategyId::FairGreedy, StrategyContext::Grades(grades)) => {
            let out = run_fair_greedy_with(
                instance.chains(),
                &grades.grades,
                k,
                config.safety_cap,
                &mut rng,
            )?;
            TrialDigest {
                trial,
                rewards: out.rewards,
                movement_cost: out.movement_cost,
                switching_cost: 0.0,
                total_cost: out.movement_cost,
                truncated: out.rewards < k,
                phases: 0,
                fair_cost: Some(out.fair_cost),
            }
        }
        _ => unreachable!("context built for the configured strategy"),
    };
    Ok(digest)
}

/// Runs the trials of one experiment (work pool, trial-order records).
fn run_records(
    config: &ExperimentConfig,
    instance: &MetricInstance,
) -> Result<(Vec<TrialDigest>, Aggregate)> {
    config.validate()?;
    let ctx = build_context(config, instance)?;
    let records: Vec<TrialDigest> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, instance, &ctx, t))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate_of(&records, instance.reward_target());
    Ok((records, aggregate))
}

fn try_oracle(instance: &MetricInstance, tol: f64) -> (Option<f64>, Option<String>) {
    match oracle::solve_optimal(instance, instance.reward_target(), OracleStart::Root, tol) {
        Ok(res) => (Some(res.optimal_expected_cost), None),
        Err(err) => (None, Some(format!("oracle skipped: {err}"))),
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Executes an experiment: seeded trials, aggregates, and the oracle value
/// whenever the joint state space fits the cap.
pub fn run_experiment(config: &ExperimentConfig, instance: &MetricInstance) -> Result<Report> {
    let (records, aggregate) = run_records(config, instance)?;
    let (oracle_value, oracle_skipped) = try_oracle(instance, 1e-10);
    let ratio = oracle_value.and_then(|v| {
        if v > 0.0 {
            Some(aggregate.total.mean / v)
        } else {
            None
        }
    });
    let created_unix = now_unix();
    Ok(Report {
        run_id: format!("run-{created_unix:x}-{:x}", config.seed),
        created_unix,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: *config,
        reward_target: instance.reward_target(),
        records,
        aggregate,
        oracle_value,
        oracle_skipped,
        ratio,
    })
}

/// One strategy's row in a comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub strategy: StrategyId,
    pub aggregate: Aggregate,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub oracle_value: Option<f64>,
    pub oracle_skipped: Option<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Runs several configs on one instance and tabulates them against the
/// shared oracle value.
pub fn compare_strategies(
    configs: &[ExperimentConfig],
    instance: &MetricInstance,
) -> Result<Comparison> {
    if configs.len() < 2 {
        return Err(Error::InvalidParam(
            "comparison needs at least two strategy configurations".into(),
        ));
    }
    let (oracle_value, oracle_skipped) = try_oracle(instance, 1e-10);
    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let (_, aggregate) = run_records(config, instance)?;
        let ratio = oracle_value.and_then(|v| {
            if v > 0.0 {
                Some(aggregate.total.mean / v)
            } else {
                None
            }
        });
        rows.push(ComparisonRow {
            strategy: config.strategy,
            aggregate,
            ratio,
        });
    }
    Ok(Comparison {
        oracle_value,
        oracle_skipped,
        rows,
    })
}
