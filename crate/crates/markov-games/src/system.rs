//! Markov systems, metric instances, trajectories, and validation.

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Index of a state within one Markov system.
pub type StateId = usize;
/// Index of a chain within a metric instance.
pub type ChainId = usize;

/// Tolerance for "each transition row sums to 1".
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance for the metric axioms (triangle inequality, symmetry).
pub const METRIC_TOL: f64 = 1e-9;

/// A finite Markov chain with per-state movement costs, a start state, and
/// an absorbing target state. Playing the chain in state `u` costs
/// `move_cost[u]` and moves the chain according to `transition[u]`; the
/// target carries zero cost and loops onto itself.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSystem {
    labels: Vec<String>,
    transition: Vec<Vec<f64>>,
    move_cost: Vec<f64>,
    start: StateId,
    target: StateId,
}

impl MarkovSystem {
    pub fn new(
        labels: Vec<String>,
        transition: Vec<Vec<f64>>,
        move_cost: Vec<f64>,
        start: StateId,
        target: StateId,
    ) -> Self {
        Self {
            labels,
            transition,
            move_cost,
            start,
            target,
        }
    }

    /// Two-state chain that reaches the target deterministically at cost `a`.
    pub fn deterministic(a: f64) -> Self {
        Self::new(
            vec!["s".into(), "t".into()],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![a, 0.0],
            0,
            1,
        )
    }

    /// Four-state mixture chain: from the start (cost `c`) the chain lands
    /// with probability `x` on a state that costs 1 to finish and with
    /// probability `1-x` on a state that finishes for free.
    pub fn mixture(x: f64, c: f64) -> Self {
        Self::new(
            vec!["s".into(), "v1".into(), "v0".into(), "t".into()],
            vec![
                vec![0.0, x, 1.0 - x, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
            vec![c, 1.0, 0.0, 0.0],
            0,
            3,
        )
    }

    pub fn num_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: StateId) -> &str {
        &self.labels[state]
    }

    pub fn state_index(&self, label: &str) -> Option<StateId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn row(&self, state: StateId) -> &[f64] {
        &self.transition[state]
    }

    pub fn move_cost(&self, state: StateId) -> f64 {
        self.move_cost[state]
    }

    pub fn move_costs(&self) -> &[f64] {
        &self.move_cost
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn target(&self) -> StateId {
        self.target
    }

    /// Checks every structural invariant; violations are data, not faults.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.num_states();
        if n == 0 {
            report.push("system has no states".into());
            return report;
        }
        if self.start >= n {
            report.push(format!("start index {} out of range", self.start));
        }
        if self.target >= n {
            report.push(format!("target index {} out of range", self.target));
            return report;
        }
        if self.transition.len() != n || self.move_cost.len() != n {
            report.push("transition/move_cost size differs from state count".into());
            return report;
        }
        for (v, row) in self.transition.iter().enumerate() {
            if row.len() != n {
                report.push(format!("row length mismatch at {}", self.labels[v]));
                continue;
            }
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    report.push(format!(
                        "transition entry not a probability at {}",
                        self.labels[v]
                    ));
                    break;
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                report.push(format!("row not stochastic at {} (sum {sum})", self.labels[v]));
            }
        }
        for (v, &c) in self.move_cost.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                report.push(format!("move cost negative or not finite at {}", self.labels[v]));
            }
        }
        let t = self.target;
        if self.move_cost[t] != 0.0 {
            report.push("target not absorbing: nonzero cost at target".into());
        }
        if self.transition[t].len() == n && self.transition[t][t] != 1.0 {
            report.push("target not absorbing: target row does not loop".into());
        }
        // Reachability of the target over positive-probability edges.
        let mut reach = vec![false; n];
        reach[t] = true;
        let mut frontier = vec![t];
        while let Some(w) = frontier.pop() {
            for v in 0..n {
                if !reach[v] && self.transition[v].len() == n && self.transition[v][w] > 0.0 {
                    reach[v] = true;
                    frontier.push(v);
                }
            }
        }
        for v in 0..n {
            if !reach[v] {
                report.push(format!("target unreachable from {}", self.labels[v]));
            }
        }
        report
    }

    /// Samples one transition; the movement cost of `state` is incurred.
    pub fn step(&self, state: StateId, rng: &mut RandomSource) -> Result<(StateId, f64)> {
        if state == self.target {
            return Err(Error::TargetAbsorbing);
        }
        let cost = self.move_cost[state];
        let row = &self.transition[state];
        let u = rng.uniform();
        let mut acc = 0.0;
        for (w, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok((w, cost));
            }
        }
        // Guard against row sums a hair under 1: fall to the last positive entry.
        let w = row.iter().rposition(|&p| p > 0.0).unwrap_or(self.target);
        Ok((w, cost))
    }

    /// Walks from `from` until the target, returning the visited states
    /// (including both endpoints) and the total movement cost paid.
    pub fn sample_to_target(
        &self,
        from: StateId,
        rng: &mut RandomSource,
        step_cap: usize,
    ) -> Result<(Vec<StateId>, f64)> {
        let mut path = vec![from];
        let mut cost = 0.0;
        let mut state = from;
        for _ in 0..step_cap {
            if state == self.target {
                return Ok((path, cost));
            }
            let (next, c) = self.step(state, rng)?;
            cost += c;
            path.push(next);
            state = next;
        }
        if state == self.target {
            return Ok((path, cost));
        }
        Err(Error::StepCapExceeded {
            cap: step_cap,
            partial: path,
            cost_so_far: cost,
        })
    }

    /// Augments the system with one dummy state per non-target state: the
    /// dummy of `u` costs `switch_cost` to play and moves to `u`
    /// deterministically. Original states keep their indices; the augmented
    /// start is the dummy of the original start.
    pub fn with_dummies(&self, switch_cost: f64) -> DummyAugmented {
        let n = self.num_states();
        let mut labels = self.labels.clone();
        let mut transition: Vec<Vec<f64>> = Vec::with_capacity(2 * n - 1);
        for row in &self.transition {
            let mut r = row.clone();
            r.resize(2 * n - 1, 0.0);
            transition.push(r);
        }
        let mut move_cost = self.move_cost.clone();
        let mut dummy_of = vec![None; n];
        let mut next = n;
        for u in 0..n {
            if u == self.target {
                continue;
            }
            labels.push(format!("{}'", self.labels[u]));
            let mut row = vec![0.0; 2 * n - 1];
            row[u] = 1.0;
            transition.push(row);
            move_cost.push(switch_cost);
            dummy_of[u] = Some(next);
            next += 1;
        }
        for row in &mut transition {
            row.resize(next, 0.0);
        }
        let system = MarkovSystem::new(
            labels,
            transition,
            move_cost,
            dummy_of[self.start].expect("start is not the target"),
            self.target,
        );
        DummyAugmented { system, dummy_of }
    }
}

/// A dummy-augmented system together with the original-state -> dummy-state map.
#[derive(Debug, Clone)]
pub struct DummyAugmented {
    pub system: MarkovSystem,
    dummy_of: Vec<Option<StateId>>,
}

impl DummyAugmented {
    /// Dummy state of `u`; `None` for the target.
    pub fn dummy_of(&self, u: StateId) -> Option<StateId> {
        self.dummy_of[u]
    }
}

/// Where the player currently stands: at the root or at one of the chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Root,
    Chain(ChainId),
}

impl Location {
    fn metric_index(self) -> usize {
        match self {
            Location::Root => 0,
            Location::Chain(i) => i + 1,
        }
    }
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Root => write!(f, "root"),
            Location::Chain(i) => write!(f, "chain {i}"),
        }
    }
}

/// A root plus chains embedded in a finite metric, with the mutable play
/// state (current position and availability per chain). The problem asks for
/// `reward_target` chains to reach their targets at minimum expected total
/// (movement plus switching) cost.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricInstance {
    chains: Vec<MarkovSystem>,
    /// Distance matrix over `{root} ∪ chains`; row/column 0 is the root and
    /// chain `i` sits at index `i + 1`.
    distances: Vec<Vec<f64>>,
    reward_target: usize,
    positions: Vec<StateId>,
    available: Vec<bool>,
}

impl MetricInstance {
    pub fn new(chains: Vec<MarkovSystem>, distances: Vec<Vec<f64>>, reward_target: usize) -> Self {
        let positions = chains.iter().map(|c| c.start()).collect();
        let available = vec![true; chains.len()];
        Self {
            chains,
            distances,
            reward_target,
            positions,
            available,
        }
    }

    /// Unit metric: every distinct pair of locations is at distance 1.
    pub fn unit(chains: Vec<MarkovSystem>, reward_target: usize) -> Self {
        let n = chains.len() + 1;
        let distances = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(chains, distances, reward_target)
    }

    pub fn num_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn chains(&self) -> &[MarkovSystem] {
        &self.chains
    }

    pub fn chain(&self, i: ChainId) -> &MarkovSystem {
        &self.chains[i]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    pub fn distance(&self, a: Location, b: Location) -> f64 {
        self.distances[a.metric_index()][b.metric_index()]
    }

    pub fn reward_target(&self) -> usize {
        self.reward_target
    }

    pub fn position(&self, i: ChainId) -> StateId {
        self.positions[i]
    }

    pub fn set_position(&mut self, i: ChainId, state: StateId) {
        self.positions[i] = state;
    }

    pub fn is_available(&self, i: ChainId) -> bool {
        self.available[i]
    }

    pub fn mark_finished(&mut self, i: ChainId) {
        self.available[i] = false;
    }

    pub fn available_chains(&self) -> impl Iterator<Item = ChainId> + '_ {
        (0..self.chains.len()).filter(|&i| self.available[i])
    }

    /// Restores start positions and availability.
    pub fn reset(&mut self) {
        for (i, chain) in self.chains.iter().enumerate() {
            self.positions[i] = chain.start();
            self.available[i] = true;
        }
    }

    /// Scales every movement cost and every distance by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let chains = self
            .chains
            .iter()
            .map(|c| {
                MarkovSystem::new(
                    c.labels.clone(),
                    c.transition.clone(),
                    c.move_cost.iter().map(|&x| lambda * x).collect(),
                    c.start,
                    c.target,
                )
            })
            .collect();
        let distances = self
            .distances
            .iter()
            .map(|row| row.iter().map(|&d| lambda * d).collect())
            .collect();
        let mut out = Self::new(chains, distances, self.reward_target);
        out.positions = self.positions.clone();
        out.available = self.available.clone();
        out
    }

    /// Metric axioms only: symmetry, zero diagonal, nonnegativity, triangle
    /// inequality (within [`METRIC_TOL`]).
    pub fn validate_metric(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let m = self.chains.len() + 1;
        if self.distances.len() != m || self.distances.iter().any(|r| r.len() != m) {
            report.push(format!("distance matrix is not {m}x{m}"));
            return report;
        }
        let name = |i: usize| -> String {
            if i == 0 {
                "root".into()
            } else {
                format!("chain {}", i - 1)
            }
        };
        for i in 0..m {
            if self.distances[i][i] != 0.0 {
                report.push(format!("nonzero diagonal at {}", name(i)));
            }
            for j in 0..m {
                let d = self.distances[i][j];
                if !d.is_finite() || d < 0.0 {
                    report.push(format!("distance negative or not finite ({}, {})", name(i), name(j)));
                }
                if (d - self.distances[j][i]).abs() > METRIC_TOL {
                    report.push(format!("asymmetric distance ({}, {})", name(i), name(j)));
                }
            }
        }
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    if self.distances[i][k] > self.distances[i][j] + self.distances[j][k] + METRIC_TOL {
                        report.push(format!(
                            "triangle inequality violated ({}, {}, {})",
                            name(i),
                            name(j),
                            name(k)
                        ));
                    }
                }
            }
        }
        report
    }

    /// Full validation: every chain, the metric, and the instance structure.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (i, chain) in self.chains.iter().enumerate() {
            for v in chain.validate().violations {
                report.push(format!("chain {i}: {v}"));
            }
        }
        report.extend(self.validate_metric());
        if self.reward_target > self.chains.len() {
            report.push(format!(
                "reward target {} exceeds chain count {}",
                self.reward_target,
                self.chains.len()
            ));
        }
        if self.reward_target == 0 {
            report.push("reward target must be positive".into());
        }
        for (i, &p) in self.positions.iter().enumerate() {
            if p >= self.chains[i].num_states() {
                report.push(format!("chain {i}: position {p} out of range"));
            }
        }
        report
    }
}

/// Outcome of a validation pass: empty means all invariants hold.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, violation: String) {
        self.violations.push(violation);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    /// Turns a failed report into [`Error::InvalidInstance`].
    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(self.violations.join("; ")))
        }
    }
}

/// One continuous run on a single chain: the entry state followed by every
/// sampled successor, with the cost paid for each play.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub chain: ChainId,
    pub states: Vec<StateId>,
    pub step_costs: Vec<f64>,
}

/// A paid relocation between locations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub from: Location,
    pub to: Location,
    pub paid: f64,
}

/// Everything a strategy did: per-chain segments and the switches between
/// them, in execution order (switch `i` opens segment `i`, except that a
/// run which starts on an already-active chain opens segment 0 directly).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    pub switch_events: Vec<SwitchEvent>,
}

impl Trajectory {
    pub fn movement_cost(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.step_costs.iter().sum::<f64>())
            .sum()
    }

    pub fn switching_cost(&self) -> f64 {
        self.switch_events.iter().map(|e| e.paid).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_system_is_valid() {
        let sys = MarkovSystem::deterministic(0.5);
        assert!(sys.validate().is_ok());
    }

    #[test]
    fn non_stochastic_row_reported() {
        let mut sys = MarkovSystem::deterministic(0.5);
        sys.transition[0][1] = 0.9;
        let report = sys.validate();
        assert!(report.violations.iter().any(|v| v.contains("row not stochastic at s")));
    }

    #[test]
    fn leaky_target_reported() {
        let mut sys = MarkovSystem::deterministic(0.5);
        sys.transition[1] = vec![0.1, 0.9];
        let report = sys.validate();
        assert!(report.violations.iter().any(|v| v.contains("target not absorbing")));
    }

    #[test]
    fn unreachable_target_reported() {
        let sys = MarkovSystem::new(
            vec!["s".into(), "u".into(), "t".into()],
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![1.0, 1.0, 0.0],
            0,
            2,
        );
        let report = sys.validate();
        assert!(report.violations.iter().any(|v| v.contains("target unreachable from s")));
    }

    #[test]
    fn step_at_target_errors() {
        let sys = MarkovSystem::deterministic(0.5);
        let mut rng = RandomSource::new(1, 0);
        assert!(matches!(sys.step(1, &mut rng), Err(Error::TargetAbsorbing)));
    }

    #[test]
    fn deterministic_step() {
        let sys = MarkovSystem::deterministic(0.5);
        let mut rng = RandomSource::new(1, 0);
        for _ in 0..10 {
            let (next, cost) = sys.step(0, &mut rng).unwrap();
            assert_eq!(next, 1);
            assert_eq!(cost, 0.5);
        }
    }

    #[test]
    fn mixture_step_frequency_matches_row() {
        let sys = MarkovSystem::mixture(0.8, 0.01);
        let mut rng = RandomSource::new(42, 0);
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let (next, _) = sys.step(0, &mut rng).unwrap();
            if next == 1 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.8).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn empirical_rows_within_binomial_band() {
        let sys = MarkovSystem::mixture(0.33, 0.2);
        let n = 100_000;
        let mut rng = RandomSource::new(9, 0);
        let mut counts = vec![0usize; sys.num_states()];
        for _ in 0..n {
            let (next, _) = sys.step(0, &mut rng).unwrap();
            counts[next] += 1;
        }
        for (w, &p) in sys.row(0).iter().enumerate() {
            let freq = counts[w] as f64 / n as f64;
            let band = 5.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= band.max(1e-9), "state {w}: {freq} vs {p}");
        }
    }

    #[test]
    fn sample_to_target_mixture_mean_cost() {
        let sys = MarkovSystem::mixture(0.8, 0.01);
        let mut rng = RandomSource::new(3, 0);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            let (path, cost) = sys.sample_to_target(0, &mut rng, 100).unwrap();
            assert_eq!(*path.last().unwrap(), sys.target());
            total += cost;
        }
        let mean = total / n as f64;
        assert!((mean - 0.81).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn sample_to_target_step_cap_carries_partial() {
        // Three hops needed, cap of one step.
        let sys = MarkovSystem::new(
            vec!["a".into(), "b".into(), "c".into(), "t".into()],
            vec![
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
            vec![1.0, 1.0, 1.0, 0.0],
            0,
            3,
        );
        let mut rng = RandomSource::new(1, 0);
        match sys.sample_to_target(0, &mut rng, 1) {
            Err(Error::StepCapExceeded { partial, .. }) => assert_eq!(partial, vec![0, 1]),
            other => panic!("expected step-cap error, got {other:?}"),
        }
    }

    #[test]
    fn dummy_augmentation_shape() {
        let sys = MarkovSystem::deterministic(0.5);
        let aug = sys.with_dummies(1.0);
        assert_eq!(aug.system.num_states(), 3);
        let s_dummy = aug.dummy_of(0).unwrap();
        assert_eq!(aug.system.move_cost(s_dummy), 1.0);
        assert_eq!(aug.system.row(s_dummy)[0], 1.0);
        assert_eq!(aug.system.start(), s_dummy);
        assert!(aug.dummy_of(1).is_none());
        assert!(aug.system.validate().is_ok());
    }

    #[test]
    fn metric_validation_flags_asymmetry_and_triangle() {
        let chains = vec![
            MarkovSystem::deterministic(1.0),
            MarkovSystem::deterministic(2.0),
        ];
        let mut inst = MetricInstance::new(
            chains.clone(),
            vec![
                vec![0.0, 1.0, 1.0],
                vec![2.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0],
            ],
            1,
        );
        let report = inst.validate_metric();
        assert!(report.violations.iter().any(|v| v.contains("asymmetric")));

        inst = MetricInstance::new(
            chains,
            vec![
                vec![0.0, 1.0, 3.0],
                vec![1.0, 0.0, 1.0],
                vec![3.0, 1.0, 0.0],
            ],
            1,
        );
        let report = inst.validate_metric();
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("triangle inequality")));
    }

    #[test]
    fn unit_metric_is_valid() {
        let inst = MetricInstance::unit(
            vec![
                MarkovSystem::deterministic(1.0),
                MarkovSystem::deterministic(2.0),
                MarkovSystem::deterministic(3.0),
            ],
            1,
        );
        assert!(inst.validate().is_ok());
    }
}
