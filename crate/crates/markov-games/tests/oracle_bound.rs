//! The optimal-policy oracle is a true lower bound: on small instances
//! where a strategy collects the full reward target in every trial, its
//! empirical mean total cost over 1e5 seeded trials stays above the oracle
//! value minus three standard errors.
//!
//! The fair-greedy reference is excluded: it plays under the fair rule with
//! free switching, so the metric-game oracle does not bound it.

use markov_games::bench::{run_experiment, ExperimentConfig, StrategyId};
use markov_games::oracle::{solve_optimal, OracleStart};
use markov_games::system::{MarkovSystem, MetricInstance};

fn strategies() -> [StrategyId; 6] {
    [
        StrategyId::Index,
        StrategyId::DoublingUnit,
        StrategyId::BudgetUnit,
        StrategyId::BudgetMetric,
        StrategyId::DoublingMetric,
        StrategyId::Sequential,
    ]
}

fn check_instance(instance: &MetricInstance, seed: u64) {
    let oracle = solve_optimal(instance, instance.reward_target(), OracleStart::Root, 1e-10)
        .unwrap()
        .optimal_expected_cost;
    for strategy in strategies() {
        let mut config = ExperimentConfig::new(strategy);
        config.trials = 100_000;
        config.seed = seed;
        config.budget = 10.0;
        let report = run_experiment(&config, instance).unwrap();
        assert_eq!(
            report.aggregate.success_rate, 1.0,
            "{strategy} must always succeed on this instance"
        );
        let mean = report.aggregate.total.mean;
        let stderr = report.aggregate.total.stderr;
        assert!(
            mean >= oracle - 3.0 * stderr,
            "{strategy}: mean {mean} below oracle {oracle} (stderr {stderr})"
        );
    }
}

#[test]
fn strategies_never_beat_the_oracle() {
    // A deterministic front-runner keeps every strategy fully successful.
    let mixed = MetricInstance::unit(
        vec![
            MarkovSystem::deterministic(0.7),
            MarkovSystem::deterministic(1.3),
            MarkovSystem::mixture(0.8, 0.01),
        ],
        1,
    );
    check_instance(&mixed, 2024);

    let two_deltas = MetricInstance::unit(
        vec![
            MarkovSystem::deterministic(1.0),
            MarkovSystem::deterministic(5.0),
        ],
        1,
    );
    check_instance(&two_deltas, 2025);
}
