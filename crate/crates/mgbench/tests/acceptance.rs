//! Acceptance suite: one test per criterion, each printing a pass line
//! after its assertions. Tolerances and thresholds are pinned here.
//!
//! Run with `cargo test -p mgbench --test acceptance -- --nocapture`.

use std::process::Command;

use markov_games::bench::{run_experiment, ExperimentConfig, StrategyId};
use markov_games::generate::{gen_random_instance, random_system, GenParams, MetricKind};
use markov_games::grade::{
    compute_grade, compute_grade_table, never_quit_cost, pmf_from_grades, simulate_teasing,
    solve_stopping,
};
use markov_games::oracle::{
    action_value, banks_sundaram_witness, solve_optimal, Action, OracleStart,
};
use markov_games::scenario;
use markov_games::strategy::{
    order_statistic_cdf, run_budget_mg_metric_with, run_budget_mg_unit_with, ChainGrades,
    GreedyMedianOrdering, IndexTables,
};
use markov_games::system::MarkovSystem;
use markov_games::RandomSource;

// ---------------------------------------------------------------------------
// Independent linear-algebra oracle (no shared code with the crate)
// ---------------------------------------------------------------------------

/// Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.abs() > 1e-300, "singular oracle system");
        for row in (col + 1)..n {
            let factor = a[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Value of the fixed policy "play everywhere except Q, quit on Q" at
/// `state`, for profit `g` at the target.
fn policy_value(sys: &MarkovSystem, quit: &[bool], state: usize, g: f64) -> f64 {
    let n = sys.num_states();
    let t = sys.target();
    let rows: Vec<usize> = (0..n).filter(|&v| v != t && !quit[v]).collect();
    let Some(pos) = rows.iter().position(|&v| v == state) else {
        return 0.0;
    };
    let m = rows.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (i, &v) in rows.iter().enumerate() {
        for (j, &w) in rows.iter().enumerate() {
            a[i][j] = if i == j { 1.0 } else { 0.0 };
            a[i][j] -= sys.row(v)[w];
        }
        b[i] = -sys.move_cost(v) + sys.row(v)[t] * g;
    }
    gauss_solve(a, b)[pos]
}

/// Brute-force stopping value: the best quit set over all
/// `2^(|V|-2)` subsets of the other states, floored at quitting immediately.
fn brute_force_value(sys: &MarkovSystem, state: usize, g: f64) -> f64 {
    let n = sys.num_states();
    let t = sys.target();
    let others: Vec<usize> = (0..n).filter(|&v| v != t && v != state).collect();
    let mut best = 0.0_f64;
    for mask in 0..(1usize << others.len()) {
        let mut quit = vec![false; n];
        for (bit, &v) in others.iter().enumerate() {
            quit[v] = mask >> bit & 1 == 1;
        }
        best = best.max(policy_value(sys, &quit, state, g));
    }
    best
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_closed_form_grades() {
    let tol = 1e-10;
    for a in [0.13, 0.5, 2.0] {
        let delta = MarkovSystem::deterministic(a);
        let grade = compute_grade(&delta, 0, tol).unwrap();
        assert!((grade - a).abs() <= 1e-8, "grade({a}) = {grade}");
        for w in [0.01, 1.0] {
            let table = compute_grade_table(&delta, w, tol).unwrap();
            assert!(
                (table.dummy_grade[0] - (a + w)).abs() <= 1e-8,
                "dummy grade at a={a}, w={w}: {}",
                table.dummy_grade[0]
            );
        }
    }
    for (x, c) in [(0.8, 0.01), (0.4, 0.01), (0.5, 0.05), (0.2, 0.5), (0.6, 0.3)] {
        assert!(c <= 1.0 - x, "grid point outside the closed-form regime");
        let mix = MarkovSystem::mixture(x, c);
        let grade = compute_grade(&mix, 0, tol).unwrap();
        let expected = c / (1.0 - x);
        assert!(
            (grade - expected).abs() <= 1e-8,
            "mixture grade at x={x}, c={c}: {grade} vs {expected}"
        );
    }
    println!("criterion 1 (closed-form grades): PASS");
}

#[test]
fn criterion_2_fairness_identity() {
    let trials = 100_000;
    for seed in 0..200u64 {
        let mut rng = RandomSource::new(seed, 0);
        let sys = random_system(&mut rng, 6, (0.05, 2.0));
        let grades: Vec<f64> = (0..sys.num_states())
            .map(|v| compute_grade(&sys, v, 1e-10).unwrap())
            .collect();
        let pmf = pmf_from_grades(&sys, sys.start(), &grades).unwrap();
        let e = never_quit_cost(&sys, sys.start()).unwrap();
        assert!(
            (pmf.mean() - e).abs() <= 1e-8,
            "seed {seed}: pmf mean {} vs never-quit {e}",
            pmf.mean()
        );

        let mut counts = vec![0usize; pmf.len()];
        let mut sim = RandomSource::new(seed, 1);
        for _ in 0..trials {
            let (prevailing, _) = simulate_teasing(&sys, &grades, &mut sim, 10_000_000).unwrap();
            let idx = pmf
                .support()
                .iter()
                .position(|s| (s - prevailing).abs() <= 1e-9)
                .expect("prevailing cost is a support point");
            counts[idx] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(pmf.mass())
            .map(|(&c, &m)| (c as f64 / trials as f64 - m).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.01, "seed {seed}: total variation {tv}");
    }
    println!("criterion 2 (fairness identity, 200 instances x 1e5 trials): PASS");
}

#[test]
fn criterion_3_stopping_value_oracle_equivalence() {
    for seed in 0..100u64 {
        let mut rng = RandomSource::new(1000 + seed, 0);
        let sys = random_system(&mut rng, 6, (0.05, 2.0));
        let e = never_quit_cost(&sys, sys.start()).unwrap();
        let gamma = compute_grade(&sys, sys.start(), 1e-10).unwrap();
        for g in [0.0, 0.3 * e, 0.7 * e, e, 1.3 * e, gamma] {
            let solved = solve_stopping(&sys, g).unwrap().values[sys.start()];
            let brute = brute_force_value(&sys, sys.start(), g);
            assert!(
                (solved - brute).abs() <= 1e-9,
                "seed {seed}, g={g}: policy iteration {solved} vs brute force {brute}"
            );
        }
    }
    println!("criterion 3 (stopping-value oracle equivalence, 100 systems): PASS");
}

#[test]
fn criterion_4_banks_sundaram_reproduction() {
    let tol = 1e-12;
    for (x, c) in [(0.8, 0.01), (0.4, 0.01), (0.5, 0.05)] {
        let mu = (2.0 + x) * c / (1.0 - x);
        let v = x * c / (1.0 - x);
        // Indifference while active on the deterministic chain at a = μ(x,c).
        let inst = scenario::banks_sundaram(x, c, Some(mu)).unwrap();
        let play = action_value(&inst, 1, OracleStart::ActiveOn(0), Action::Play, tol).unwrap();
        let switch =
            action_value(&inst, 1, OracleStart::ActiveOn(0), Action::SwitchTo(1), tol).unwrap();
        assert!(
            (play - switch).abs() <= 1e-8,
            "x={x}, c={c}, a=mu: play {play} vs switch {switch}"
        );
        // Indifference while active on the mixture at a = v(x,c).
        let inst = scenario::banks_sundaram(x, c, Some(v)).unwrap();
        let play = action_value(&inst, 1, OracleStart::ActiveOn(1), Action::Play, tol).unwrap();
        let switch =
            action_value(&inst, 1, OracleStart::ActiveOn(1), Action::SwitchTo(0), tol).unwrap();
        assert!(
            (play - switch).abs() <= 1e-8,
            "x={x}, c={c}, a=v: play {play} vs switch {switch}"
        );
    }
    let witness = banks_sundaram_witness(0.8, 0.4, 0.01).unwrap();
    assert!((witness.active_index - 0.05).abs() <= 1e-12);
    assert!((witness.inactive_index - 0.04).abs() <= 1e-12);
    assert!(witness.contradiction, "1/20 > 1/25 must be flagged");
    println!("criterion 4 (Banks-Sundaram reproduction): PASS");
}

#[test]
fn criterion_5_counterexample_separation() {
    let mean_of = |strategy: StrategyId, epsilon: f64, seed: u64| -> f64 {
        let inst = scenario::dtw_counterexample(epsilon, 200, 1e6).unwrap();
        let mut config = ExperimentConfig::new(strategy);
        config.trials = 10_000;
        config.seed = seed;
        run_experiment(&config, &inst).unwrap().aggregate.total.mean
    };
    let index_mean = mean_of(StrategyId::Index, 0.1, 20_240_501);
    assert!(
        (8.0..=12.0).contains(&index_mean),
        "index strategy mean {index_mean} outside [8, 12]"
    );
    let sequential_mean = mean_of(StrategyId::Sequential, 0.1, 20_240_502);
    assert!(
        (1.0..=2.1).contains(&sequential_mean),
        "sequential mean {sequential_mean} outside [1, 2.1]"
    );
    let mut last_ratio = 0.0;
    for (i, epsilon) in [0.2, 0.1, 0.05].into_iter().enumerate() {
        let ratio = mean_of(StrategyId::Index, epsilon, 30 + i as u64)
            / mean_of(StrategyId::Sequential, epsilon, 40 + i as u64);
        assert!(
            ratio > last_ratio,
            "ratio not monotone at epsilon={epsilon}: {ratio} vs {last_ratio}"
        );
        last_ratio = ratio;
    }
    println!("criterion 5 (counterexample separation): PASS");
}

#[test]
fn criterion_6_budget_safety() {
    let budgets = [0.01, 0.05, 0.5];
    let mut trials_run = 0usize;
    for seed in 0..50u64 {
        let chains = 1 + (seed as usize % 4);
        let params = GenParams {
            chains,
            max_states: 5,
            cost_range: (0.05, 2.0),
            metric: MetricKind::Unit,
            reward_target: chains.min(2),
        };
        let inst = gen_random_instance(&params, seed).unwrap();
        let k = inst.reward_target();
        let tables = IndexTables::unit(&inst, 1e-9).unwrap();
        let grades = ChainGrades::compute(&inst, 1e-9).unwrap();
        for trial in 0..200u64 {
            let b = budgets[(trial as usize) % budgets.len()];
            let alpha = 1.0;
            let mut rng = RandomSource::new(7000 + seed, trial);
            let (_, _, unit_out) = run_budget_mg_unit_with(&inst, &tables, k, b, &mut rng).unwrap();
            assert!(
                unit_out.movement_cost <= 128.0 * b + 1e-9,
                "unit movement {} above cap {}",
                unit_out.movement_cost,
                128.0 * b
            );
            assert!(
                unit_out.switching_cost <= 128.0 * b + 1e-9,
                "unit switching {} above cap {}",
                unit_out.switching_cost,
                128.0 * b
            );
            let mut rng = RandomSource::new(8000 + seed, trial);
            let (_, _, metric_out) = run_budget_mg_metric_with(
                &inst,
                &grades,
                k,
                b,
                alpha,
                &GreedyMedianOrdering,
                &mut rng,
            )
            .unwrap();
            assert!(
                metric_out.switching_cost <= 10.0 * alpha * b + 1e-9,
                "metric switching {} above cap {}",
                metric_out.switching_cost,
                10.0 * alpha * b
            );
            for segment in &metric_out.trajectory.segments {
                let on_chain: f64 = segment.step_costs.iter().sum();
                assert!(
                    on_chain <= 100.0 * alpha * b + 1e-9,
                    "per-chain movement {} above cap {}",
                    on_chain,
                    100.0 * alpha * b
                );
            }
            trials_run += 1;
        }
    }
    assert_eq!(trials_run, 10_000);

    // The metric subroutine also stays inside its caps on embedded metrics.
    for seed in 0..10u64 {
        let params = GenParams {
            chains: 2 + (seed as usize % 3),
            max_states: 5,
            cost_range: (0.05, 2.0),
            metric: MetricKind::RandomEmbedded,
            reward_target: 2,
        };
        let inst = gen_random_instance(&params, 300 + seed).unwrap();
        let grades = ChainGrades::compute(&inst, 1e-9).unwrap();
        for trial in 0..100u64 {
            let b = budgets[(trial as usize) % budgets.len()];
            let mut rng = RandomSource::new(9000 + seed, trial);
            let (_, _, out) = run_budget_mg_metric_with(
                &inst,
                &grades,
                inst.reward_target(),
                b,
                1.0,
                &GreedyMedianOrdering,
                &mut rng,
            )
            .unwrap();
            assert!(out.switching_cost <= 10.0 * b + 1e-9);
            for segment in &out.trajectory.segments {
                let on_chain: f64 = segment.step_costs.iter().sum();
                assert!(on_chain <= 100.0 * b + 1e-9);
            }
        }
    }
    println!("criterion 6 (budget safety, zero violations in 1e4 trials): PASS");
}

#[test]
fn criterion_7_empirical_approximation_sanity() {
    let mut within = 0usize;
    for seed in 0..50u64 {
        let chains = 1 + (seed as usize % 3);
        let params = GenParams {
            chains,
            max_states: 4,
            cost_range: (0.05, 2.0),
            metric: MetricKind::Unit,
            reward_target: 1,
        };
        let inst = gen_random_instance(&params, 9000 + seed).unwrap();
        let oracle = solve_optimal(&inst, 1, OracleStart::Root, 1e-10).unwrap();
        let mut config = ExperimentConfig::new(StrategyId::Index);
        config.trials = 10_000;
        config.seed = 100 + seed;
        let report = run_experiment(&config, &inst).unwrap();
        let ratio = report.aggregate.total.mean / oracle.optimal_expected_cost;
        if ratio <= 10.0 {
            within += 1;
        }
    }
    assert!(within >= 48, "only {within}/50 instances had ratio <= 10");
    println!("criterion 7 (empirical approximation sanity, {within}/50 within 10x): PASS");
}

#[test]
fn criterion_8_order_statistics() {
    // Hand value: twin mixtures, K = 1, at x = 0.05.
    let mix = MarkovSystem::mixture(0.8, 0.01);
    let grades: Vec<f64> = (0..mix.num_states())
        .map(|v| compute_grade(&mix, v, 1e-10).unwrap())
        .collect();
    let pmf = pmf_from_grades(&mix, 0, &grades).unwrap();
    let dp = order_statistic_cdf(&[pmf.clone(), pmf], 1, 0.05).unwrap();
    assert!((dp - 0.36).abs() <= 1e-10, "twin-mixture value {dp}");

    // Fifty random multi-chain suites against Monte Carlo.
    let samples = 100_000;
    for seed in 0..50u64 {
        let mut rng = RandomSource::new(5000 + seed, 0);
        let n = 2 + (seed as usize % 3);
        let mut pmfs = Vec::new();
        let mut pool = Vec::new();
        for _ in 0..n {
            let sys = random_system(&mut rng, 5, (0.05, 2.0));
            let grades: Vec<f64> = (0..sys.num_states())
                .map(|v| compute_grade(&sys, v, 1e-10).unwrap())
                .collect();
            let pmf = pmf_from_grades(&sys, sys.start(), &grades).unwrap();
            pool.extend(pmf.support().iter().copied());
            pmfs.push(pmf);
        }
        pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = 1 + (seed as usize % n);
        let x = pool[pool.len() / 2];
        let dp = order_statistic_cdf(&pmfs, k, x).unwrap();
        let mut hits = 0usize;
        let mut sim = RandomSource::new(5000 + seed, 1);
        for _ in 0..samples {
            let below = pmfs
                .iter()
                .filter(|pmf| pmf.sample(&mut sim) <= x + 1e-12)
                .count();
            if below >= k {
                hits += 1;
            }
        }
        let empirical = hits as f64 / samples as f64;
        let stderr = (empirical * (1.0 - empirical) / samples as f64).sqrt();
        assert!(
            (dp - empirical).abs() <= 3.0 * stderr + 1e-9,
            "seed {seed}: dp {dp} vs monte carlo {empirical} (stderr {stderr})"
        );
    }
    println!("criterion 8 (order statistics, exact DP vs Monte Carlo): PASS");
}

#[test]
fn criterion_9_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let instance_path = dir.path().join("bs.json");
    let bin = env!("CARGO_BIN_EXE_mgbench");
    let status = Command::new(bin)
        .args([
            "scenario",
            "banks-sundaram",
            "--x",
            "0.8",
            "--c",
            "0.01",
            "--out",
        ])
        .arg(&instance_path)
        .output()
        .unwrap();
    assert!(status.status.success());

    let run = || -> String {
        let output = Command::new(bin)
            .args([
                "simulate",
                instance_path.to_str().unwrap(),
                "--strategy",
                "doubling-unit",
                "--trials",
                "100",
                "--seed",
                "31415",
            ])
            .output()
            .unwrap();
        assert!(output.status.success());
        String::from_utf8(output.stdout).unwrap()
    };
    let first = run();
    let second = run();
    // Per-trial digests and the aggregate footer are byte-identical; only
    // the header line carries the wall-clock stamp.
    let body = |text: &str| text.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&first), body(&second));
    assert_eq!(first.lines().count(), 102);
    println!("criterion 9 (CLI determinism): PASS");
}
