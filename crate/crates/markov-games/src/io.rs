//! Instance files: a JSON document with fields `{chains, distances,
//! reward_target}`, each chain carrying `{states, transition, move_cost,
//! start, target}` with start/target given by state name. Field order is
//! canonical (declaration order below), so serialize ∘ parse is
//! byte-identical on canonical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{MarkovSystem, MetricInstance};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainDoc {
    states: Vec<String>,
    transition: Vec<Vec<f64>>,
    move_cost: Vec<f64>,
    start: String,
    target: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceDoc {
    chains: Vec<ChainDoc>,
    distances: Vec<Vec<f64>>,
    reward_target: usize,
}

fn chain_to_doc(chain: &MarkovSystem) -> ChainDoc {
    ChainDoc {
        states: chain.labels().to_vec(),
        transition: chain.transition().to_vec(),
        move_cost: chain.move_costs().to_vec(),
        start: chain.label(chain.start()).to_string(),
        target: chain.label(chain.target()).to_string(),
    }
}

fn chain_from_doc(idx: usize, doc: ChainDoc) -> Result<MarkovSystem> {
    let find = |name: &str| -> Result<usize> {
        doc.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::InvalidInstance(format!("chain {idx}: unknown state `{name}`")))
    };
    let start = find(&doc.start)?;
    let target = find(&doc.target)?;
    Ok(MarkovSystem::new(
        doc.states,
        doc.transition,
        doc.move_cost,
        start,
        target,
    ))
}

/// Canonical JSON text of an instance (pretty, trailing newline).
pub fn to_json(instance: &MetricInstance) -> String {
    let doc = InstanceDoc {
        chains: instance.chains().iter().map(chain_to_doc).collect(),
        distances: instance.distances().to_vec(),
        reward_target: instance.reward_target(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("instance serializes");
    text.push('\n');
    text
}

/// Parses and fully validates an instance document.
pub fn from_json(text: &str) -> Result<MetricInstance> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    let chains = doc
        .chains
        .into_iter()
        .enumerate()
        .map(|(i, c)| chain_from_doc(i, c))
        .collect::<Result<Vec<_>>>()?;
    let instance = MetricInstance::new(chains, doc.distances, doc.reward_target);
    instance.validate().into_result()?;
    Ok(instance)
}

/// Reads, parses, and validates an instance file.
pub fn parse_instance(path: impl AsRef<Path>) -> Result<MetricInstance> {
    from_json(&std::fs::read_to_string(path)?)
}

/// Writes the canonical JSON of an instance.
pub fn write_instance(path: impl AsRef<Path>, instance: &MetricInstance) -> Result<()> {
    std::fs::write(path, to_json(instance))?;
    Ok(())
}
