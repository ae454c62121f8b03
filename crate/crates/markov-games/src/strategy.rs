//! Playable strategies: the dummy-grade index strategy, the doubling
//! framework, the budgeted unit-metric and general-metric subroutines, and
//! the fair-greedy / sequential reference strategies.
//!
//! All strategies drive a shared playout that owns a cloned instance and
//! does the cost accounting: switching between locations pays the metric
//! distance, playing a chain pays its current state's movement cost and
//! advances it. A chain whose target is reached yields one reward and is
//! never replayed.

use crate::error::{Error, Result};
use crate::grade::{
    compute_grade, compute_grade_table, merged_grade_levels, pmf_from_grades, GradeTable,
    SelectionCostPmf, LEVEL_MERGE_EPS,
};
use crate::rng::RandomSource;
use crate::system::{
    ChainId, Location, MarkovSystem, MetricInstance, Segment, StateId, SwitchEvent, Trajectory,
};

/// Global step guard for strategy loops; exhausting it flags the outcome as
/// truncated instead of spinning on zero-cost cycles.
pub const MAX_STEPS: usize = 10_000_000;

// ---------------------------------------------------------------------------
// Outcomes
// ---------------------------------------------------------------------------

/// One doubling phase: its index, the budget handed to the subroutine, and
/// the rewards still missing afterwards.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub budget: f64,
    pub remaining: usize,
}

/// Per-trial record of what a strategy did.
#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub rewards_collected: usize,
    pub movement_cost: f64,
    pub switching_cost: f64,
    pub trajectory: Trajectory,
    pub phase_log: Vec<PhaseRecord>,
    /// Set when a safety cap, phase cap, or the step guard cut the run short.
    pub truncated: bool,
    /// Fair (prevailing) cost paid, for strategies playing under the fair rule.
    pub fair_cost: Option<f64>,
}

impl StrategyOutcome {
    pub fn total_cost(&self) -> f64 {
        self.movement_cost + self.switching_cost
    }
}

// ---------------------------------------------------------------------------
// Playout: shared cost accounting
// ---------------------------------------------------------------------------

struct Playout<'r> {
    instance: MetricInstance,
    location: Location,
    movement_cost: f64,
    switching_cost: f64,
    rewards: usize,
    steps: usize,
    trajectory: Trajectory,
    rng: &'r mut RandomSource,
}

impl<'r> Playout<'r> {
    fn new(instance: &MetricInstance, location: Location, rng: &'r mut RandomSource) -> Self {
        let mut instance = instance.clone();
        for i in 0..instance.num_chains() {
            if instance.position(i) == instance.chain(i).target() {
                instance.mark_finished(i);
            }
        }
        Self {
            instance,
            location,
            movement_cost: 0.0,
            switching_cost: 0.0,
            rewards: 0,
            steps: 0,
            trajectory: Trajectory::default(),
            rng,
        }
    }

    fn total_cost(&self) -> f64 {
        self.movement_cost + self.switching_cost
    }

    fn exhausted(&self) -> bool {
        self.steps >= MAX_STEPS
    }

    /// Pays the metric distance and relocates; moving onto a chain opens a
    /// fresh trajectory segment at its current position.
    fn switch_to(&mut self, to: Location) -> f64 {
        let paid = self.instance.distance(self.location, to);
        self.trajectory.switch_events.push(SwitchEvent {
            from: self.location,
            to,
            paid,
        });
        self.switching_cost += paid;
        self.location = to;
        self.steps += 1;
        if let Location::Chain(c) = to {
            self.trajectory.segments.push(Segment {
                chain: c,
                states: vec![self.instance.position(c)],
                step_costs: Vec::new(),
            });
        }
        paid
    }

    /// Plays the chain underfoot for one step; returns the successor, the
    /// cost paid, and whether the chain just reached its target.
    fn play(&mut self, chain: ChainId) -> Result<(StateId, f64, bool)> {
        debug_assert_eq!(self.location, Location::Chain(chain));
        let pos = self.instance.position(chain);
        let (next, cost) = self.instance.chain(chain).step(pos, self.rng)?;
        self.movement_cost += cost;
        self.instance.set_position(chain, next);
        self.steps += 1;
        match self.trajectory.segments.last_mut() {
            Some(seg) if seg.chain == chain && !seg.states.is_empty() => {
                seg.states.push(next);
                seg.step_costs.push(cost);
            }
            _ => self.trajectory.segments.push(Segment {
                chain,
                states: vec![pos, next],
                step_costs: vec![cost],
            }),
        }
        let finished = next == self.instance.chain(chain).target();
        if finished {
            self.instance.mark_finished(chain);
            self.rewards += 1;
        }
        Ok((next, cost, finished))
    }

    fn into_outcome(self, phase_log: Vec<PhaseRecord>, truncated: bool) -> StrategyOutcome {
        StrategyOutcome {
            rewards_collected: self.rewards,
            movement_cost: self.movement_cost,
            switching_cost: self.switching_cost,
            trajectory: self.trajectory,
            phase_log,
            truncated,
            fair_cost: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Indices
// ---------------------------------------------------------------------------

/// Grade tables for every chain of an instance at one switching cost.
#[derive(Debug, Clone)]
pub struct IndexTables {
    tables: Vec<GradeTable>,
}

impl IndexTables {
    pub fn with_switch_cost(instance: &MetricInstance, switch_cost: f64, tol: f64) -> Result<Self> {
        let tables = instance
            .chains()
            .iter()
            .map(|c| compute_grade_table(c, switch_cost, tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tables })
    }

    /// Tables at unit switching cost — the index of the unit-metric game.
    pub fn unit(instance: &MetricInstance, tol: f64) -> Result<Self> {
        Self::with_switch_cost(instance, 1.0, tol)
    }

    pub fn table(&self, chain: ChainId) -> &GradeTable {
        &self.tables[chain]
    }
}

/// The index an argmin player sees: the grade of the current state when the
/// chain is active, its dummy grade otherwise. A finished chain has no index.
pub fn current_index(
    chain: &MarkovSystem,
    position: StateId,
    active: bool,
    table: &GradeTable,
) -> Result<f64> {
    if position == chain.target() {
        return Err(Error::ChainFinished);
    }
    Ok(if active {
        table.grade[position]
    } else {
        table.dummy_grade[position]
    })
}

/// Per-chain indices at one decision point (`None` for finished chains).
#[derive(Debug, Clone, PartialEq)]
pub struct IndexView {
    pub indices: Vec<Option<f64>>,
    pub active: Option<ChainId>,
}

pub fn index_view(
    instance: &MetricInstance,
    location: Location,
    tables: &IndexTables,
) -> Result<IndexView> {
    let active = match location {
        Location::Chain(c) if instance.is_available(c) => Some(c),
        _ => None,
    };
    let mut indices = Vec::with_capacity(instance.num_chains());
    for i in 0..instance.num_chains() {
        if !instance.is_available(i) {
            indices.push(None);
            continue;
        }
        indices.push(Some(current_index(
            instance.chain(i),
            instance.position(i),
            active == Some(i),
            tables.table(i),
        )?));
    }
    Ok(IndexView { indices, active })
}

/// Minimum-index available chain, ties broken by lowest chain id.
fn argmin_index(p: &Playout, tables: &IndexTables) -> Result<Option<(ChainId, bool)>> {
    let mut best: Option<(f64, ChainId, bool)> = None;
    for i in p.instance.available_chains() {
        let active = p.location == Location::Chain(i);
        let idx = current_index(
            p.instance.chain(i),
            p.instance.position(i),
            active,
            tables.table(i),
        )?;
        if best.map_or(true, |(b, _, _)| idx < b) {
            best = Some((idx, i, active));
        }
    }
    Ok(best.map(|(_, i, active)| (i, active)))
}

// ---------------------------------------------------------------------------
// The index strategy
// ---------------------------------------------------------------------------

/// Plays the minimum-index chain until the first reward, charging the true
/// metric distance on each switch. Indices come from `tables` (unit dummy
/// grades for the unit-metric contract). Halts as truncated when the next
/// action would push total cost past `safety_cap`.
pub fn run_index_strategy_with(
    instance: &MetricInstance,
    tables: &IndexTables,
    rng: &mut RandomSource,
    safety_cap: f64,
) -> Result<StrategyOutcome> {
    let mut p = Playout::new(instance, Location::Root, rng);
    let mut truncated = false;
    loop {
        if p.rewards >= 1 {
            break;
        }
        if p.exhausted() {
            truncated = true;
            break;
        }
        let Some((chain, active)) = argmin_index(&p, tables)? else {
            truncated = true;
            break;
        };
        if !active {
            let d = p.instance.distance(p.location, Location::Chain(chain));
            if p.total_cost() + d > safety_cap {
                truncated = true;
                break;
            }
            p.switch_to(Location::Chain(chain));
        } else {
            let cost = p.instance.chain(chain).move_cost(p.instance.position(chain));
            if p.total_cost() + cost > safety_cap {
                truncated = true;
                break;
            }
            p.play(chain)?;
        }
    }
    Ok(p.into_outcome(Vec::new(), truncated))
}

/// [`run_index_strategy_with`] with freshly computed unit-dummy tables.
pub fn run_index_strategy(
    instance: &MetricInstance,
    rng: &mut RandomSource,
    safety_cap: f64,
    tol: f64,
) -> Result<StrategyOutcome> {
    let tables = IndexTables::unit(instance, tol)?;
    run_index_strategy_with(instance, &tables, rng, safety_cap)
}

// ---------------------------------------------------------------------------
// BudgetMG-Unit
// ---------------------------------------------------------------------------

/// One budgeted pass of greedy minimum-index play with separate movement and
/// switching budgets of `2^7·B` each. Before each action the budget check
/// runs: an action that would push its budget past the cap halts the pass.
/// Returns the rewards still missing.
fn budget_unit_phase(p: &mut Playout, k: usize, budget: f64, tables: &IndexTables) -> Result<usize> {
    let cap = 128.0 * budget;
    let mut movement = 0.0;
    let mut switching = 0.0;
    let mut k = k;
    loop {
        if k == 0 || p.exhausted() {
            break;
        }
        let Some((chain, active)) = argmin_index(p, tables)? else {
            break;
        };
        if !active {
            let d = p.instance.distance(p.location, Location::Chain(chain));
            if switching + d > cap {
                break;
            }
            p.switch_to(Location::Chain(chain));
            switching += d;
        } else {
            let cost = p.instance.chain(chain).move_cost(p.instance.position(chain));
            if movement + cost > cap {
                break;
            }
            let (_, _, finished) = p.play(chain)?;
            movement += cost;
            if finished {
                k -= 1;
            }
        }
    }
    Ok(k)
}

/// Budgeted unit-metric subroutine on a fresh playout starting at the root.
/// Returns the mutated instance, the rewards still missing, and the outcome.
pub fn run_budget_mg_unit(
    instance: &MetricInstance,
    k: usize,
    budget: f64,
    rng: &mut RandomSource,
    tol: f64,
) -> Result<(MetricInstance, usize, StrategyOutcome)> {
    let tables = IndexTables::unit(instance, tol)?;
    run_budget_mg_unit_with(instance, &tables, k, budget, rng)
}

/// [`run_budget_mg_unit`] with precomputed tables.
pub fn run_budget_mg_unit_with(
    instance: &MetricInstance,
    tables: &IndexTables,
    k: usize,
    budget: f64,
    rng: &mut RandomSource,
) -> Result<(MetricInstance, usize, StrategyOutcome)> {
    if budget <= 0.0 {
        return Err(Error::InvalidParam("budget must be positive".into()));
    }
    let mut p = Playout::new(instance, Location::Root, rng);
    let remaining = budget_unit_phase(&mut p, k, budget, tables)?;
    let truncated = p.exhausted();
    let updated = p.instance.clone();
    Ok((updated, remaining, p.into_outcome(Vec::new(), truncated)))
}

// ---------------------------------------------------------------------------
// Ordering solvers (stochastic-k-TSP stand-in)
// ---------------------------------------------------------------------------

/// Produces the chain visiting order of the stochastic-k-TSP reduction. The
/// output must be a permutation of all chains, deterministic for a fixed
/// instance, and independent of any future randomness.
pub trait OrderingSolver {
    fn order(&self, instance: &MetricInstance, pmfs: &[SelectionCostPmf], k: usize)
        -> Vec<ChainId>;
}

/// Default heuristic: starting at the root, repeatedly append the unvisited
/// available chain minimizing `distance(current, chain) + median(selection
/// cost)`, ties by chain id; finished chains go last.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyMedianOrdering;

impl OrderingSolver for GreedyMedianOrdering {
    fn order(
        &self,
        instance: &MetricInstance,
        pmfs: &[SelectionCostPmf],
        _k: usize,
    ) -> Vec<ChainId> {
        let n = instance.num_chains();
        let mut visited = vec![false; n];
        let mut out = Vec::with_capacity(n);
        let mut loc = Location::Root;
        let available = instance.available_chains().count();
        for _ in 0..available {
            let mut best: Option<(f64, ChainId)> = None;
            for c in 0..n {
                if visited[c] || !instance.is_available(c) {
                    continue;
                }
                let eff = instance.distance(loc, Location::Chain(c)) + pmfs[c].median();
                if best.map_or(true, |(b, _)| eff < b) {
                    best = Some((eff, c));
                }
            }
            let (_, c) = best.expect("available chain exists");
            visited[c] = true;
            out.push(c);
            loc = Location::Chain(c);
        }
        for c in 0..n {
            if !visited[c] {
                out.push(c);
            }
        }
        out
    }
}

/// The default ordering heuristic as a free function.
pub fn default_ordering(
    instance: &MetricInstance,
    pmfs: &[SelectionCostPmf],
    k: usize,
) -> Vec<ChainId> {
    GreedyMedianOrdering.order(instance, pmfs, k)
}

// ---------------------------------------------------------------------------
// Order statistics and threshold selection
// ---------------------------------------------------------------------------

/// `Pr[at least k of the independent selection costs are ≤ x]`, computed
/// exactly by the Poisson-binomial recurrence over the marginal cdf values.
pub fn order_statistic_cdf(pmfs: &[SelectionCostPmf], k: usize, x: f64) -> Result<f64> {
    let n = pmfs.len();
    if k == 0 || k > n {
        return Err(Error::RankOutOfRange { k, n });
    }
    let mut counts = vec![0.0_f64; n + 1];
    counts[0] = 1.0;
    for (i, pmf) in pmfs.iter().enumerate() {
        let p = pmf.cdf(x).clamp(0.0, 1.0);
        for j in (0..=i + 1).rev() {
            let stay = if j <= i { counts[j] * (1.0 - p) } else { 0.0 };
            let up = if j > 0 { counts[j - 1] * p } else { 0.0 };
            counts[j] = stay + up;
        }
    }
    Ok(counts[k..].iter().sum())
}

/// The threshold of the budgeted metric subroutine: the unique grade level
/// γ_j with `Pr[k-th order statistic ≤ γ_j] < 0.3` and
/// `Pr[≤ γ_{j+1}] ≥ 0.3`. `chosen_index` is the 1-based position of γ_j in
/// `sorted_grades`; 0 is the sentinel for "even the smallest level crosses".
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSelection {
    pub sorted_grades: Vec<f64>,
    pub chosen_index: usize,
    pub gamma_j: f64,
    pub gamma_j_plus_1: f64,
}

/// Scans ascending distinct grade `levels` for the 0.3-quantile crossing of
/// the k-th order statistic of the given selection-cost laws.
pub fn select_threshold(
    levels: &[f64],
    pmfs: &[SelectionCostPmf],
    k: usize,
) -> Result<ThresholdSelection> {
    if levels.is_empty() {
        return Err(Error::InvalidParam("no grade levels to scan".into()));
    }
    for (idx, &level) in levels.iter().enumerate() {
        let pr = order_statistic_cdf(pmfs, k, level)?;
        if pr >= 0.3 {
            return Ok(if idx == 0 {
                ThresholdSelection {
                    sorted_grades: levels.to_vec(),
                    chosen_index: 0,
                    gamma_j: 0.0,
                    gamma_j_plus_1: levels[0],
                }
            } else {
                ThresholdSelection {
                    sorted_grades: levels.to_vec(),
                    chosen_index: idx,
                    gamma_j: levels[idx - 1],
                    gamma_j_plus_1: levels[idx],
                }
            });
        }
    }
    Err(Error::ThresholdUnreachable)
}

/// [`select_threshold`] over the merged grade levels of all states of the
/// given prefix chains.
pub fn select_threshold_for(
    chains: &[&MarkovSystem],
    pmfs: &[SelectionCostPmf],
    k: usize,
    tol: f64,
) -> Result<ThresholdSelection> {
    let mut pool = Vec::new();
    for chain in chains {
        for v in 0..chain.num_states() {
            pool.push(compute_grade(chain, v, tol)?);
        }
    }
    select_threshold(&merged_grade_levels(&pool), pmfs, k)
}

// ---------------------------------------------------------------------------
// BudgetMG-Metric
// ---------------------------------------------------------------------------

/// Per-chain, per-state grades of an instance.
#[derive(Debug, Clone)]
pub struct ChainGrades {
    pub grades: Vec<Vec<f64>>,
}

impl ChainGrades {
    pub fn compute(instance: &MetricInstance, tol: f64) -> Result<Self> {
        let mut grades = Vec::with_capacity(instance.num_chains());
        for chain in instance.chains() {
            let mut g = Vec::with_capacity(chain.num_states());
            for v in 0..chain.num_states() {
                g.push(compute_grade(chain, v, tol)?);
            }
            grades.push(g);
        }
        Ok(Self { grades })
    }
}

/// One budgeted pass of the metric subroutine: reduce chains to their
/// selection-cost laws, order them, keep the longest prefix whose hop
/// distances sum to at most `10·alpha·B`, pick the 0.3-quantile grade
/// threshold for the k-th order statistic over the prefix, then visit the
/// prefix in order, playing each chain while the current grade stays at or
/// below γ_{j+1} (Condition II) and the movement spent on the chain plus the
/// next move cost stays within `100·alpha·B` (Condition I).
fn budget_metric_phase(
    p: &mut Playout,
    k: usize,
    budget: f64,
    alpha: f64,
    solver: &dyn OrderingSolver,
    grades: &ChainGrades,
) -> Result<usize> {
    let mut k = k;
    if k == 0 {
        return Ok(0);
    }
    let n = p.instance.num_chains();
    let mut pmfs = Vec::with_capacity(n);
    for c in 0..n {
        pmfs.push(pmf_from_grades(
            p.instance.chain(c),
            p.instance.position(c),
            &grades.grades[c],
        )?);
    }
    let ordering = solver.order(&p.instance, &pmfs, k);
    let switch_cap = 10.0 * alpha * budget;
    let mut prefix = Vec::new();
    let mut hop_sum = 0.0;
    let mut loc = p.location;
    for c in ordering {
        if !p.instance.is_available(c) {
            continue;
        }
        let d = p.instance.distance(loc, Location::Chain(c));
        if hop_sum + d > switch_cap {
            break;
        }
        hop_sum += d;
        prefix.push(c);
        loc = Location::Chain(c);
    }
    if prefix.is_empty() {
        return Ok(k);
    }
    let mut level_pool = Vec::new();
    for &c in &prefix {
        level_pool.extend_from_slice(&grades.grades[c]);
    }
    let levels = merged_grade_levels(&level_pool);
    let prefix_pmfs: Vec<SelectionCostPmf> = prefix.iter().map(|&c| pmfs[c].clone()).collect();
    let k_eff = k.min(prefix.len());
    let threshold = select_threshold(&levels, &prefix_pmfs, k_eff)?;
    let move_cap = 100.0 * alpha * budget;
    for &c in &prefix {
        if k == 0 || p.exhausted() {
            break;
        }
        p.switch_to(Location::Chain(c));
        let target = p.instance.chain(c).target();
        let mut chain_movement = 0.0;
        loop {
            if p.exhausted() {
                break;
            }
            let pos = p.instance.position(c);
            if pos == target {
                break;
            }
            if grades.grades[c][pos] > threshold.gamma_j_plus_1 + LEVEL_MERGE_EPS {
                break;
            }
            let cost = p.instance.chain(c).move_cost(pos);
            if chain_movement + cost > move_cap {
                break;
            }
            let (_, _, finished) = p.play(c)?;
            chain_movement += cost;
            if finished {
                k -= 1;
                break;
            }
        }
    }
    Ok(k)
}

/// Budgeted metric subroutine on a fresh playout starting at the root.
/// Returns the mutated instance, the rewards still missing, and the outcome.
/// An empty prefix (the first hop alone exceeds `10·alpha·B`) returns the
/// instance unchanged with a zero-cost outcome.
pub fn run_budget_mg_metric(
    instance: &MetricInstance,
    k: usize,
    budget: f64,
    alpha: f64,
    solver: &dyn OrderingSolver,
    rng: &mut RandomSource,
    tol: f64,
) -> Result<(MetricInstance, usize, StrategyOutcome)> {
    let grades = ChainGrades::compute(instance, tol)?;
    run_budget_mg_metric_with(instance, &grades, k, budget, alpha, solver, rng)
}

/// [`run_budget_mg_metric`] with precomputed grades.
pub fn run_budget_mg_metric_with(
    instance: &MetricInstance,
    grades: &ChainGrades,
    k: usize,
    budget: f64,
    alpha: f64,
    solver: &dyn OrderingSolver,
    rng: &mut RandomSource,
) -> Result<(MetricInstance, usize, StrategyOutcome)> {
    if budget <= 0.0 || alpha <= 0.0 {
        return Err(Error::InvalidParam("budget and alpha must be positive".into()));
    }
    let mut p = Playout::new(instance, Location::Root, rng);
    let remaining = budget_metric_phase(&mut p, k, budget, alpha, solver, grades)?;
    let truncated = p.exhausted();
    let updated = p.instance.clone();
    Ok((updated, remaining, p.into_outcome(Vec::new(), truncated)))
}

// ---------------------------------------------------------------------------
// Doubling framework
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DoublingVariant {
    Unit,
    Metric,
}

/// Constants of the doubling framework: phase `i` hands budget `c·β^i` to
/// the budgeted subroutine.
#[derive(Debug, Clone, Copy)]
pub struct DoublingParams {
    pub beta: f64,
    pub c: f64,
    pub alpha: f64,
    pub max_phases: usize,
    pub tol: f64,
}

impl Default for DoublingParams {
    fn default() -> Self {
        Self {
            beta: 1.5,
            c: 1.0,
            alpha: 1.0,
            max_phases: 64,
            tol: 1e-9,
        }
    }
}

/// Runs the doubling framework until `k` rewards are collected: phase `i`
/// calls the variant's budgeted subroutine with budget `c·β^i`. The unit
/// variant resumes at the chain where the previous phase halted without
/// re-paying its switch; the metric variant returns to the root between
/// phases, charging the return distance. The phase cap flags truncation.
pub fn run_doubling(
    instance: &MetricInstance,
    k: usize,
    variant: DoublingVariant,
    params: DoublingParams,
    solver: &dyn OrderingSolver,
    rng: &mut RandomSource,
) -> Result<StrategyOutcome> {
    match variant {
        DoublingVariant::Unit => {
            let tables = IndexTables::unit(instance, params.tol)?;
            run_doubling_unit_with(instance, &tables, k, params, rng)
        }
        DoublingVariant::Metric => {
            let grades = ChainGrades::compute(instance, params.tol)?;
            run_doubling_metric_with(instance, &grades, k, params, solver, rng)
        }
    }
}

/// Unit-variant doubling with precomputed tables.
pub fn run_doubling_unit_with(
    instance: &MetricInstance,
    tables: &IndexTables,
    k: usize,
    params: DoublingParams,
    rng: &mut RandomSource,
) -> Result<StrategyOutcome> {
    doubling_loop(instance, k, params, DoublingContext::Unit(tables), rng)
}

/// Metric-variant doubling with precomputed grades.
pub fn run_doubling_metric_with(
    instance: &MetricInstance,
    grades: &ChainGrades,
    k: usize,
    params: DoublingParams,
    solver: &dyn OrderingSolver,
    rng: &mut RandomSource,
) -> Result<StrategyOutcome> {
    doubling_loop(instance, k, params, DoublingContext::Metric(grades, solver), rng)
}

enum DoublingContext<'a> {
    Unit(&'a IndexTables),
    Metric(&'a ChainGrades, &'a dyn OrderingSolver),
}

fn doubling_loop(
    instance: &MetricInstance,
    k: usize,
    params: DoublingParams,
    ctx: DoublingContext<'_>,
    rng: &mut RandomSource,
) -> Result<StrategyOutcome> {
    if !(params.beta > 1.0 && params.beta < 2.0) {
        return Err(Error::InvalidParam("beta must lie in (1, 2)".into()));
    }
    if params.c <= 0.0 || params.alpha <= 0.0 {
        return Err(Error::InvalidParam("c and alpha must be positive".into()));
    }
    let available = instance
        .chains()
        .iter()
        .enumerate()
        .filter(|(i, c)| instance.is_available(*i) && instance.position(*i) != c.target())
        .count();
    if k > available {
        return Err(Error::Infeasible {
            k,
            chains: available,
        });
    }
    let metric_variant = matches!(ctx, DoublingContext::Metric(..));
    let mut p = Playout::new(instance, Location::Root, rng);
    let mut phase_log = Vec::new();
    let mut remaining = k;
    let mut truncated = true;
    for phase in 1..=params.max_phases {
        let budget = params.c * params.beta.powi(phase as i32);
        remaining = match ctx {
            DoublingContext::Unit(tables) => {
                budget_unit_phase(&mut p, remaining, budget, tables)?
            }
            DoublingContext::Metric(grades, solver) => {
                budget_metric_phase(&mut p, remaining, budget, params.alpha, solver, grades)?
            }
        };
        phase_log.push(PhaseRecord {
            phase,
            budget,
            remaining,
        });
        if remaining == 0 {
            truncated = false;
            break;
        }
        if p.exhausted() {
            break;
        }
        if metric_variant && p.location != Location::Root {
            p.switch_to(Location::Root);
        }
    }
    Ok(p.into_outcome(phase_log, truncated))
}

// ---------------------------------------------------------------------------
// Fair-greedy reference (test oracle for the metric analysis)
// ---------------------------------------------------------------------------

/// Outcome of the fair-greedy reference player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairGreedyOutcome {
    pub rewards: usize,
    pub fair_cost: f64,
    pub movement_cost: f64,
}

/// Plays the globally minimum-grade chain step by step under the fair rule:
/// a chain reaching its target charges its prevailing (maximum-grade) cost
/// instead of the movement already paid. Halts at `k` rewards or as soon as
/// the fair cost spent plus the smallest available grade would break
/// `fair_budget`. Switching is free here; this is the analysis reference,
/// not a metric player.
pub fn run_fair_greedy(
    chains: &[MarkovSystem],
    k: usize,
    fair_budget: f64,
    tol: f64,
    rng: &mut RandomSource,
) -> Result<FairGreedyOutcome> {
    let mut grades = Vec::with_capacity(chains.len());
    for chain in chains {
        let mut g = Vec::with_capacity(chain.num_states());
        for v in 0..chain.num_states() {
            g.push(compute_grade(chain, v, tol)?);
        }
        grades.push(g);
    }
    run_fair_greedy_with(chains, &grades, k, fair_budget, rng)
}

/// [`run_fair_greedy`] with precomputed per-chain grades.
pub fn run_fair_greedy_with(
    chains: &[MarkovSystem],
    grades: &[Vec<f64>],
    k: usize,
    fair_budget: f64,
    rng: &mut RandomSource,
) -> Result<FairGreedyOutcome> {
    if fair_budget <= 0.0 {
        return Err(Error::InvalidParam("fair budget must be positive".into()));
    }
    let mut positions: Vec<StateId> = chains.iter().map(|c| c.start()).collect();
    let mut prevailing: Vec<f64> = (0..chains.len()).map(|i| grades[i][positions[i]]).collect();
    let mut done: Vec<bool> = chains
        .iter()
        .enumerate()
        .map(|(i, c)| positions[i] == c.target())
        .collect();
    let mut fair_cost = 0.0;
    let mut movement_cost = 0.0;
    let mut rewards = 0;
    for _ in 0..MAX_STEPS {
        if rewards >= k {
            break;
        }
        let mut best: Option<(f64, usize)> = None;
        for i in 0..chains.len() {
            if done[i] {
                continue;
            }
            let g = grades[i][positions[i]];
            if best.map_or(true, |(b, _)| g < b) {
                best = Some((g, i));
            }
        }
        let Some((smallest, i)) = best else {
            break;
        };
        if fair_cost + smallest > fair_budget + 1e-12 {
            break;
        }
        let (next, cost) = chains[i].step(positions[i], rng)?;
        movement_cost += cost;
        positions[i] = next;
        if grades[i][next] > prevailing[i] {
            prevailing[i] = grades[i][next];
        }
        if next == chains[i].target() {
            fair_cost += prevailing[i];
            rewards += 1;
            done[i] = true;
        }
    }
    Ok(FairGreedyOutcome {
        rewards,
        fair_cost,
        movement_cost,
    })
}

// ---------------------------------------------------------------------------
// Sequential reference (counterexample baseline)
// ---------------------------------------------------------------------------

/// Visits chains in listed order starting from the root and plays each one
/// while its current grade stays at or below its grade at entry (quitting at
/// the start of a new epoch), then moves on; halts at `k` rewards. The
/// baseline the index strategy is compared against on the counterexample
/// metric.
pub fn run_sequential(
    instance: &MetricInstance,
    k: usize,
    rng: &mut RandomSource,
    safety_cap: f64,
    tol: f64,
) -> Result<StrategyOutcome> {
    let grades = ChainGrades::compute(instance, tol)?;
    run_sequential_with(instance, &grades, k, rng, safety_cap)
}

/// [`run_sequential`] with precomputed grades.
pub fn run_sequential_with(
    instance: &MetricInstance,
    grades: &ChainGrades,
    k: usize,
    rng: &mut RandomSource,
    safety_cap: f64,
) -> Result<StrategyOutcome> {
    let mut p = Playout::new(instance, Location::Root, rng);
    let mut remaining = k;
    let mut truncated = false;
    'chains: for c in 0..p.instance.num_chains() {
        if remaining == 0 {
            break;
        }
        if !p.instance.is_available(c) {
            continue;
        }
        let d = p.instance.distance(p.location, Location::Chain(c));
        if p.total_cost() + d > safety_cap {
            truncated = true;
            break;
        }
        p.switch_to(Location::Chain(c));
        let entry = grades.grades[c][p.instance.position(c)];
        let target = p.instance.chain(c).target();
        loop {
            if p.exhausted() {
                truncated = true;
                break 'chains;
            }
            let pos = p.instance.position(c);
            if pos == target || grades.grades[c][pos] > entry + LEVEL_MERGE_EPS {
                break;
            }
            let cost = p.instance.chain(c).move_cost(pos);
            if p.total_cost() + cost > safety_cap {
                truncated = true;
                break 'chains;
            }
            let (_, _, finished) = p.play(c)?;
            if finished {
                remaining -= 1;
                break;
            }
        }
    }
    let truncated = truncated || remaining > 0;
    Ok(p.into_outcome(Vec::new(), truncated))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
