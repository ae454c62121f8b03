//! Seeded random instance generation. Every generated instance passes
//! validation: transition rows mix in a direct edge to the target (so the
//! target is reachable from everywhere), and random metrics are the
//! shortest-path closure of random nonnegative weights (so the triangle
//! inequality holds by construction).

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::system::{MarkovSystem, MetricInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MetricKind {
    Unit,
    RandomEmbedded,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenParams {
    pub chains: usize,
    pub max_states: usize,
    pub cost_range: (f64, f64),
    pub metric: MetricKind,
    pub reward_target: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            chains: 3,
            max_states: 4,
            cost_range: (0.05, 2.0),
            metric: MetricKind::Unit,
            reward_target: 1,
        }
    }
}

fn uniform_in(rng: &mut RandomSource, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// One random chain with `2..=max_states` states; the last state is the
/// target and every row keeps at least 10% direct mass on it.
pub fn random_system(rng: &mut RandomSource, max_states: usize, cost_range: (f64, f64)) -> MarkovSystem {
    let m = 2 + (rng.uniform() * (max_states.max(2) - 1) as f64) as usize;
    let m = m.min(max_states.max(2));
    let target = m - 1;
    let labels: Vec<String> = (0..m)
        .map(|j| if j == target { "t".to_string() } else { format!("v{j}") })
        .collect();
    let mut transition = Vec::with_capacity(m);
    for v in 0..m {
        if v == target {
            let mut row = vec![0.0; m];
            row[target] = 1.0;
            transition.push(row);
            continue;
        }
        let weights: Vec<f64> = (0..m).map(|_| rng.uniform()).collect();
        let sum: f64 = weights.iter().sum();
        let mut row: Vec<f64> = weights.iter().map(|w| 0.9 * w / sum).collect();
        row[target] += 0.1;
        transition.push(row);
    }
    let move_cost: Vec<f64> = (0..m)
        .map(|v| {
            if v == target {
                0.0
            } else {
                uniform_in(rng, cost_range.0, cost_range.1)
            }
        })
        .collect();
    MarkovSystem::new(labels, transition, move_cost, 0, target)
}

/// All-pairs shortest paths of a complete graph with the given edge weights.
fn shortest_path_closure(mut d: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = d.len();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Deterministic for a fixed `(params, seed)` pair.
pub fn gen_random_instance(params: &GenParams, seed: u64) -> Result<MetricInstance> {
    if params.chains == 0 {
        return Err(Error::InvalidParam("need at least one chain".into()));
    }
    if params.reward_target == 0 || params.reward_target > params.chains {
        return Err(Error::InvalidParam(format!(
            "reward target {} outside 1..={}",
            params.reward_target, params.chains
        )));
    }
    if !(params.cost_range.0 >= 0.0 && params.cost_range.1 >= params.cost_range.0) {
        return Err(Error::InvalidParam("bad cost range".into()));
    }
    if params.max_states < 2 {
        return Err(Error::InvalidParam("chains need at least 2 states".into()));
    }
    let mut rng = RandomSource::new(seed, 0);
    let chains: Vec<MarkovSystem> = (0..params.chains)
        .map(|_| random_system(&mut rng, params.max_states, params.cost_range))
        .collect();
    let m = params.chains + 1;
    let distances = match params.metric {
        MetricKind::Unit => (0..m)
            .map(|i| (0..m).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect(),
        MetricKind::RandomEmbedded => {
            let mut d = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in (i + 1)..m {
                    let w = uniform_in(&mut rng, 0.1, 2.0);
                    d[i][j] = w;
                    d[j][i] = w;
                }
            }
            shortest_path_closure(d)
        }
    };
    let instance = MetricInstance::new(chains, distances, params.reward_target);
    instance.validate().into_result()?;
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io;

    #[test]
    fn deterministic_for_fixed_seed() {
        let params = GenParams::default();
        let a = gen_random_instance(&params, 7).unwrap();
        let b = gen_random_instance(&params, 7).unwrap();
        assert_eq!(io::to_json(&a), io::to_json(&b));
        let c = gen_random_instance(&params, 8).unwrap();
        assert_ne!(io::to_json(&a), io::to_json(&c));
    }

    #[test]
    fn generated_instances_validate() {
        for seed in 0..50 {
            let params = GenParams {
                chains: 1 + (seed as usize % 4),
                max_states: 6,
                metric: if seed % 2 == 0 {
                    MetricKind::Unit
                } else {
                    MetricKind::RandomEmbedded
                },
                ..GenParams::default()
            };
            let inst = gen_random_instance(&params, seed).unwrap();
            assert!(inst.validate().is_ok());
        }
    }

    #[test]
    fn random_metric_passes_metric_axioms() {
        let params = GenParams {
            chains: 5,
            metric: MetricKind::RandomEmbedded,
            ..GenParams::default()
        };
        let inst = gen_random_instance(&params, 123).unwrap();
        assert!(inst.validate_metric().is_ok());
    }
}
