//! Exact optimal-policy oracle on the joint Markov decision process, for
//! acceptance testing and approximation-ratio measurement on small
//! instances.
//!
//! The joint state tracks every chain's position, the player's location,
//! and the rewards still missing. Actions: play the located chain (pay its
//! current movement cost, advance stochastically) or switch to another
//! unfinished chain (pay the metric distance). Collecting the last reward
//! ends the game at zero residual value, so the optimal expected total cost
//! solves a stochastic-shortest-path problem, which value iteration with
//! Gauss–Seidel sweeps drives to a fixed point.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::system::{ChainId, Location, MetricInstance};

/// Joint states above this count are refused (the oracle is a test fixture).
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

const MAX_SWEEPS: usize = 100_000;

/// One state of the joint process. `remaining == 0` is the single terminal
/// sentinel (positions and location cleared).
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize)]
pub struct JointState {
    pub positions: Vec<u16>,
    /// `None` while at the root.
    pub location: Option<u16>,
    pub remaining: u16,
}

impl JointState {
    fn terminal() -> Self {
        JointState {
            positions: Vec::new(),
            location: None,
            remaining: 0,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.remaining == 0
    }
}

/// An action at a joint state: advance the located chain, or relocate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Action {
    Play,
    SwitchTo(ChainId),
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Play => write!(f, "play"),
            Action::SwitchTo(j) => write!(f, "switch to chain {j}"),
        }
    }
}

/// Where the optimal player begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStart {
    Root,
    /// Already standing on a chain, with no switch cost owed to it.
    ActiveOn(ChainId),
}

/// The solved joint process: optimal expected total cost from the start,
/// the greedy policy on every reachable state, and solver diagnostics.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub optimal_expected_cost: f64,
    pub state_count: usize,
    /// Final sup-norm Bellman residual.
    pub residual: f64,
    pub sweeps: usize,
    states: Vec<JointState>,
    values: Vec<f64>,
    policy: Vec<Option<Action>>,
    index: HashMap<JointState, usize>,
    start: JointState,
}

impl OracleResult {
    pub fn start_state(&self) -> &JointState {
        &self.start
    }

    pub fn value(&self, state: &JointState) -> Option<f64> {
        if state.is_terminal() {
            return Some(0.0);
        }
        self.index.get(state).map(|&i| self.values[i])
    }

    pub fn action(&self, state: &JointState) -> Option<Action> {
        self.index.get(state).and_then(|&i| self.policy[i])
    }

    /// State → action table for audit, terminal excluded.
    pub fn policy_table(&self) -> Vec<(JointState, Action)> {
        self.states
            .iter()
            .zip(&self.policy)
            .filter_map(|(s, a)| a.map(|a| (s.clone(), a)))
            .collect()
    }
}

fn start_state(instance: &MetricInstance, k: usize, start: OracleStart) -> Result<JointState> {
    let positions: Vec<u16> = (0..instance.num_chains())
        .map(|i| instance.position(i) as u16)
        .collect();
    let location = match start {
        OracleStart::Root => None,
        OracleStart::ActiveOn(i) => {
            if i >= instance.num_chains() {
                return Err(Error::IllegalAction(format!("no chain {i} to start on")));
            }
            Some(i as u16)
        }
    };
    Ok(JointState {
        positions,
        location,
        remaining: k as u16,
    })
}

fn unfinished(instance: &MetricInstance, state: &JointState, chain: ChainId) -> bool {
    state.positions[chain] as usize != instance.chain(chain).target()
}

fn legal_actions(instance: &MetricInstance, state: &JointState) -> Vec<Action> {
    let mut actions = Vec::new();
    if let Some(loc) = state.location {
        if unfinished(instance, state, loc as usize) {
            actions.push(Action::Play);
        }
    }
    for j in 0..instance.num_chains() {
        if state.location == Some(j as u16) || !unfinished(instance, state, j) {
            continue;
        }
        actions.push(Action::SwitchTo(j));
    }
    actions
}

/// Cost of the action plus its successor distribution.
fn expand(
    instance: &MetricInstance,
    state: &JointState,
    action: Action,
) -> (f64, Vec<(f64, JointState)>) {
    match action {
        Action::Play => {
            let i = state.location.expect("play requires a located chain") as usize;
            let pos = state.positions[i] as usize;
            let chain = instance.chain(i);
            let cost = chain.move_cost(pos);
            let mut successors = Vec::new();
            for (w, &p) in chain.row(pos).iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                let mut next = state.clone();
                next.positions[i] = w as u16;
                if w == chain.target() {
                    next.remaining -= 1;
                    if next.remaining == 0 {
                        next = JointState::terminal();
                    }
                }
                successors.push((p, next));
            }
            (cost, successors)
        }
        Action::SwitchTo(j) => {
            let from = match state.location {
                None => Location::Root,
                Some(i) => Location::Chain(i as usize),
            };
            let cost = instance.distance(from, Location::Chain(j));
            let mut next = state.clone();
            next.location = Some(j as u16);
            (cost, vec![(1.0, next)])
        }
    }
}

/// Loose upper bound on the reachable joint state count, saturating.
fn state_space_bound(instance: &MetricInstance, k: usize) -> usize {
    let mut bound: usize = instance.num_chains().saturating_add(1);
    bound = bound.saturating_mul(k.max(1));
    for chain in instance.chains() {
        bound = bound.saturating_mul(chain.num_states());
    }
    bound
}

/// Solves the joint process with the default state cap.
pub fn solve_optimal(
    instance: &MetricInstance,
    k: usize,
    start: OracleStart,
    tol: f64,
) -> Result<OracleResult> {
    solve_optimal_capped(instance, k, start, tol, DEFAULT_STATE_CAP)
}

/// Value iteration from `V = 0`, Gauss–Seidel sweeps in ascending-reward
/// order, until the sup-norm change drops below `tol`; the greedy policy is
/// extracted from the converged values.
pub fn solve_optimal_capped(
    instance: &MetricInstance,
    k: usize,
    start: OracleStart,
    tol: f64,
    cap: usize,
) -> Result<OracleResult> {
    let unfinished_count = (0..instance.num_chains())
        .filter(|&i| instance.position(i) != instance.chain(i).target())
        .count();
    if k == 0 || k > unfinished_count {
        return Err(Error::Infeasible {
            k,
            chains: unfinished_count,
        });
    }
    let bound = state_space_bound(instance, k);
    if bound > cap {
        return Err(Error::OracleTooLarge { states: bound, cap });
    }

    let root = start_state(instance, k, start)?;
    let mut index: HashMap<JointState, usize> = HashMap::new();
    let mut states: Vec<JointState> = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    index.insert(root.clone(), 0);
    states.push(root.clone());
    queue.push_back(0usize);
    while let Some(i) = queue.pop_front() {
        let state = states[i].clone();
        let actions = legal_actions(instance, &state);
        if actions.is_empty() {
            return Err(Error::Numeric(
                "reachable dead end: rewards remain but no chain is playable".into(),
            ));
        }
        for action in actions {
            let (_, successors) = expand(instance, &state, action);
            for (_, next) in successors {
                if next.is_terminal() || index.contains_key(&next) {
                    continue;
                }
                let id = states.len();
                if id >= cap {
                    return Err(Error::OracleTooLarge { states: id + 1, cap });
                }
                index.insert(next.clone(), id);
                states.push(next);
                queue.push_back(id);
            }
        }
    }

    // Sweep order: fewer missing rewards first, so values propagate from
    // the terminal outwards.
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by_key(|&i| states[i].remaining);

    let mut values = vec![0.0_f64; states.len()];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while residual > tol && sweeps < MAX_SWEEPS {
        residual = 0.0;
        sweeps += 1;
        for &i in &order {
            let state = &states[i];
            let mut best = f64::INFINITY;
            for action in legal_actions(instance, state) {
                let (cost, successors) = expand(instance, state, action);
                let mut q = cost;
                let mut self_mass = 0.0;
                for (p, next) in &successors {
                    if next == state {
                        self_mass += p;
                    } else if !next.is_terminal() {
                        q += p * values[index[next]];
                    }
                }
                if self_mass < 1.0 {
                    q /= 1.0 - self_mass;
                }
                best = best.min(q);
            }
            let delta = (best - values[i]).abs();
            if delta > residual {
                residual = delta;
            }
            values[i] = best;
        }
    }

    let mut policy = vec![None; states.len()];
    for i in 0..states.len() {
        let state = &states[i];
        let mut best: Option<(f64, Action)> = None;
        for action in legal_actions(instance, state) {
            let (cost, successors) = expand(instance, state, action);
            let mut q = cost;
            let mut self_mass = 0.0;
            for (p, next) in &successors {
                if next == state {
                    self_mass += p;
                } else if !next.is_terminal() {
                    q += p * values[index[next]];
                }
            }
            if self_mass < 1.0 {
                q /= 1.0 - self_mass;
            }
            if best.map_or(true, |(b, _)| q < b) {
                best = Some((q, action));
            }
        }
        policy[i] = best.map(|(_, a)| a);
    }

    let optimal_expected_cost = values[0];
    Ok(OracleResult {
        optimal_expected_cost,
        state_count: states.len(),
        residual,
        sweeps,
        states,
        values,
        policy,
        index,
        start: root,
    })
}

/// Expected total cost of taking `first_action` at the start and following
/// the optimal policy afterwards.
pub fn action_value(
    instance: &MetricInstance,
    k: usize,
    start: OracleStart,
    first_action: Action,
    tol: f64,
) -> Result<f64> {
    let result = solve_optimal(instance, k, start, tol)?;
    let state = result.start_state();
    if !legal_actions(instance, state).contains(&first_action) {
        return Err(Error::IllegalAction(format!(
            "{first_action} is not legal at the start state"
        )));
    }
    let (cost, successors) = expand(instance, state, first_action);
    let mut q = cost;
    let mut self_mass = 0.0;
    for (p, next) in &successors {
        if next == state {
            self_mass += p;
        } else {
            let v = result
                .value(next)
                .ok_or_else(|| Error::Numeric("successor not enumerated".into()))?;
            q += p * v;
        }
    }
    if self_mass < 1.0 {
        q /= 1.0 - self_mass;
    }
    Ok(q)
}

/// Monte Carlo rollouts of the solved greedy policy; returns the empirical
/// mean total cost and its standard error.
pub fn simulate_policy(
    result: &OracleResult,
    instance: &MetricInstance,
    rng: &mut RandomSource,
    trials: usize,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be positive".into()));
    }
    let mut costs = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut state = result.start_state().clone();
        let mut total = 0.0;
        let mut guard = 0usize;
        while !state.is_terminal() {
            guard += 1;
            if guard > 10_000_000 {
                return Err(Error::Numeric("policy rollout did not terminate".into()));
            }
            let action = result.action(&state).ok_or(Error::PolicyGap)?;
            match action {
                Action::Play => {
                    let i = state.location.expect("play requires location") as usize;
                    let chain = instance.chain(i);
                    let pos = state.positions[i] as usize;
                    let (next_pos, cost) = chain.step(pos, rng)?;
                    total += cost;
                    state.positions[i] = next_pos as u16;
                    if next_pos == chain.target() {
                        state.remaining -= 1;
                        if state.remaining == 0 {
                            state = JointState::terminal();
                        }
                    }
                }
                Action::SwitchTo(j) => {
                    let from = match state.location {
                        None => Location::Root,
                        Some(i) => Location::Chain(i as usize),
                    };
                    total += instance.distance(from, Location::Chain(j));
                    state.location = Some(j as u16);
                }
            }
        }
        costs.push(total);
    }
    let mean = costs.iter().sum::<f64>() / trials as f64;
    let stderr = if trials > 1 {
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

// ---------------------------------------------------------------------------
// Banks–Sundaram impossibility witness
// ---------------------------------------------------------------------------

/// Closed forms of the two-system indifference games and the index
/// comparison that rules out any optimal index under switching costs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WitnessReport {
    pub x: f64,
    pub y: f64,
    pub c: f64,
    /// μ(x,c) = (2+x)c/(1−x): the inactive index the x-mixture must carry.
    pub mu_x: f64,
    /// v(x,c) = xc/(1−x): the indifference point of the active-mixture game.
    pub v_x: f64,
    /// c/(1−x) = v(x,c)+c: the active index the x-mixture must carry.
    pub active_index: f64,
    /// μ(y,c): the inactive index the y-mixture must carry.
    pub inactive_index: f64,
    /// Active x-index above inactive y-index: no consistent index exists.
    pub contradiction: bool,
}

pub fn mu(x: f64, c: f64) -> f64 {
    (2.0 + x) * c / (1.0 - x)
}

pub fn v(x: f64, c: f64) -> f64 {
    x * c / (1.0 - x)
}

/// Evaluates the impossibility witness at `(x, y, c)` after checking the
/// constraints `0 < y ≤ x < 1`, `c > 0`, `3c ≤ 1−x`, and `2x ≤ 1+2y`.
pub fn banks_sundaram_witness(x: f64, y: f64, c: f64) -> Result<WitnessReport> {
    if !(y > 0.0) {
        return Err(Error::ConstraintViolated(format!("need y > 0, got y = {y}")));
    }
    if !(y <= x) {
        return Err(Error::ConstraintViolated(format!(
            "need y <= x, got y = {y}, x = {x}"
        )));
    }
    if !(x < 1.0) {
        return Err(Error::ConstraintViolated(format!("need x < 1, got x = {x}")));
    }
    if !(c > 0.0) {
        return Err(Error::ConstraintViolated(format!("need c > 0, got c = {c}")));
    }
    if 3.0 * c > 1.0 - x {
        return Err(Error::ConstraintViolated(format!(
            "need 3c <= 1 - x, got 3c = {}, 1 - x = {}",
            3.0 * c,
            1.0 - x
        )));
    }
    if 2.0 * x > 1.0 + 2.0 * y {
        return Err(Error::ConstraintViolated(format!(
            "need 2x <= 1 + 2y, got 2x = {}, 1 + 2y = {}",
            2.0 * x,
            1.0 + 2.0 * y
        )));
    }
    let active_index = c / (1.0 - x);
    let inactive_index = mu(y, c);
    Ok(WitnessReport {
        x,
        y,
        c,
        mu_x: mu(x, c),
        v_x: v(x, c),
        active_index,
        inactive_index,
        contradiction: active_index > inactive_index,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
