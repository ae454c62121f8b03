//! Built-in scenarios: the Banks–Sundaram two-system game, the
//! counterexample metric on which the unit index strategy is arbitrarily
//! bad, and a small deterministic micro instance.

use crate::error::{Error, Result};
use crate::oracle;
use crate::system::{MarkovSystem, MetricInstance};

/// A named scenario with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// Two systems at mutual distance `c`: a deterministic chain of cost `a`
    /// (`None` defaults to the indifference value μ(x,c)) and the
    /// `[xδ1+(1−x)δ0]` mixture with start cost `c`. K = 1.
    BanksSundaram { x: f64, c: f64, a: Option<f64> },
    /// `n` cheap chains (success probability ε/2) on a geometric path from
    /// the root, listed first, plus `n` tempting chains (success
    /// probability ε, blocking state of cost `m`) at unit distances. K = 1.
    DtwCounterexample { epsilon: f64, n_per_kind: usize, m: f64 },
    /// Two deterministic chains on the unit metric. K = 1.
    PaperMicro { a1: f64, a2: f64 },
}

/// Builds the scenario named by a CLI string, given its parameters.
pub fn build(scenario: Scenario) -> Result<MetricInstance> {
    let instance = match scenario {
        Scenario::BanksSundaram { x, c, a } => banks_sundaram(x, c, a)?,
        Scenario::DtwCounterexample { epsilon, n_per_kind, m } => {
            dtw_counterexample(epsilon, n_per_kind, m)?
        }
        Scenario::PaperMicro { a1, a2 } => paper_micro(a1, a2)?,
    };
    instance.validate().into_result()?;
    Ok(instance)
}

/// The two-system impossibility game: `[δ_a]` versus `[xδ1+(1−x)δ0]` with
/// every switch costing `c`.
pub fn banks_sundaram(x: f64, c: f64, a: Option<f64>) -> Result<MetricInstance> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParam(format!("need 0 < x < 1, got {x}")));
    }
    if c <= 0.0 {
        return Err(Error::InvalidParam(format!("need c > 0, got {c}")));
    }
    let a = a.unwrap_or_else(|| oracle::mu(x, c));
    if a <= 0.0 {
        return Err(Error::InvalidParam(format!("need a > 0, got {a}")));
    }
    let chains = vec![MarkovSystem::deterministic(a), MarkovSystem::mixture(x, c)];
    let distances = vec![
        vec![0.0, c, c],
        vec![c, 0.0, c],
        vec![c, c, 0.0],
    ];
    Ok(MetricInstance::new(chains, distances, 1))
}

fn counterexample_chain(success: f64, blocking_cost: f64) -> MarkovSystem {
    MarkovSystem::new(
        vec!["s".into(), "x".into(), "t".into()],
        vec![
            vec![0.0, 1.0 - success, success],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0],
        ],
        vec![0.0, blocking_cost, 0.0],
        0,
        2,
    )
}

/// The counterexample metric: the cheap chains (ids `0..n`) sit on a path
/// from the root with hop costs `1, 1/2, 1/4, …`, so walking them all costs
/// under 2; the tempting chains (ids `n..2n`) are at unit distance from the
/// root and each other but block with probability `1−ε` behind a state of
/// cost `m`. Distances are the shortest-path closure of that graph.
pub fn dtw_counterexample(epsilon: f64, n_per_kind: usize, m: f64) -> Result<MetricInstance> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParam(format!("need 0 < epsilon < 1, got {epsilon}")));
    }
    if n_per_kind == 0 {
        return Err(Error::InvalidParam("need at least one chain per kind".into()));
    }
    if m <= 0.0 {
        return Err(Error::InvalidParam(format!("need blocking cost > 0, got {m}")));
    }
    let n = n_per_kind;
    let mut chains = Vec::with_capacity(2 * n);
    for _ in 0..n {
        chains.push(counterexample_chain(epsilon / 2.0, m));
    }
    for _ in 0..n {
        chains.push(counterexample_chain(epsilon, m));
    }
    // Metric nodes: 0 = root, 1..=n cheap path, n+1..=2n tempting cluster.
    let nodes = 2 * n + 1;
    let inf = f64::INFINITY;
    let mut d = vec![vec![inf; nodes]; nodes];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    let connect = |a: usize, b: usize, w: f64, d: &mut Vec<Vec<f64>>| {
        if w < d[a][b] {
            d[a][b] = w;
            d[b][a] = w;
        }
    };
    // Geometric path: root -> cheap_1 -> cheap_2 -> ... with hop costs 2^-j.
    connect(0, 1, 1.0, &mut d);
    for j in 1..n {
        connect(j, j + 1, 0.5_f64.powi(j as i32), &mut d);
    }
    // Tempting cluster at unit distances.
    for i in (n + 1)..nodes {
        connect(0, i, 1.0, &mut d);
        for j in (i + 1)..nodes {
            connect(i, j, 1.0, &mut d);
        }
    }
    let nodes_range = 0..nodes;
    for k in nodes_range.clone() {
        for i in nodes_range.clone() {
            for j in nodes_range.clone() {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    Ok(MetricInstance::new(chains, d, 1))
}

/// Two deterministic chains on the unit metric.
pub fn paper_micro(a1: f64, a2: f64) -> Result<MetricInstance> {
    if a1 <= 0.0 || a2 <= 0.0 {
        return Err(Error::InvalidParam("chain costs must be positive".into()));
    }
    Ok(MetricInstance::unit(
        vec![MarkovSystem::deterministic(a1), MarkovSystem::deterministic(a2)],
        1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grade::compute_grade_table;

    #[test]
    fn scenarios_validate() {
        for scenario in [
            Scenario::BanksSundaram { x: 0.8, c: 0.01, a: None },
            Scenario::DtwCounterexample { epsilon: 0.1, n_per_kind: 8, m: 1e6 },
            Scenario::PaperMicro { a1: 1.0, a2: 5.0 },
        ] {
            let inst = build(scenario).unwrap();
            assert!(inst.validate().is_ok());
        }
    }

    #[test]
    fn counterexample_dummy_indices() {
        // Unit-dummy index of a tempting chain is 1/ε, of a cheap chain 2/ε.
        let inst = dtw_counterexample(0.1, 3, 1e6).unwrap();
        let cheap = compute_grade_table(inst.chain(0), 1.0, 1e-9).unwrap();
        let tempting = compute_grade_table(inst.chain(3), 1.0, 1e-9).unwrap();
        assert!((tempting.dummy_grade[0] - 10.0).abs() < 1e-6, "{}", tempting.dummy_grade[0]);
        assert!((cheap.dummy_grade[0] - 20.0).abs() < 1e-6, "{}", cheap.dummy_grade[0]);
        // The chains themselves have grade 0 at the start (free play).
        assert_eq!(cheap.grade[0], 0.0);
        assert_eq!(tempting.grade[0], 0.0);
    }

    #[test]
    fn counterexample_cheap_path_stays_under_two() {
        let inst = dtw_counterexample(0.1, 200, 1e6).unwrap();
        use crate::system::Location;
        let mut total = inst.distance(Location::Root, Location::Chain(0));
        for j in 0..199 {
            total += inst.distance(Location::Chain(j), Location::Chain(j + 1));
        }
        // The full geometric tour approaches 2 from below (f64 rounds the
        // 200-hop sum to exactly 2); any finite prefix stays strictly under.
        assert!(total <= 2.0, "cheap tour costs {total}");
        let mut prefix = inst.distance(Location::Root, Location::Chain(0));
        for j in 0..20 {
            prefix += inst.distance(Location::Chain(j), Location::Chain(j + 1));
        }
        assert!(prefix < 2.0, "20-hop prefix costs {prefix}");
        // Tempting chains sit at unit distance from the root.
        assert_eq!(inst.distance(Location::Root, Location::Chain(200)), 1.0);
        assert_eq!(inst.distance(Location::Chain(200), Location::Chain(201)), 1.0);
    }

    #[test]
    fn banks_sundaram_defaults_to_mu() {
        let inst = banks_sundaram(0.8, 0.01, None).unwrap();
        assert!((inst.chain(0).move_cost(0) - 0.14).abs() < 1e-12);
        assert_eq!(inst.reward_target(), 1);
    }
}
