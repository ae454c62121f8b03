//! Stopping values, grades, prevailing costs, the teasing game, and the
//! exact selection-cost distribution.
//!
//! The single-chain game behind everything here: fix a profit level `g` and
//! a current state `u`. At each step the player either quits (ending the
//! game) or pays the movement cost and advances the chain; reaching the
//! target pays out `g`. The game value `val(S_u(g))` is piecewise linear,
//! convex, and nondecreasing in `g`, and the *grade* of `u` is the largest
//! `g` at which the value is still zero — the point where an optimal player
//! is indifferent between playing and quitting. The grade of the target is
//! zero by convention.
//!
//! Folding a switching cost `w` into the index works through *dummy states*:
//! a synthetic predecessor of `u` with movement cost `w` and a deterministic
//! transition to `u`. The grade of the dummy is the index an inactive chain
//! carries.

use std::collections::BTreeSet;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{i_minus_p, solve_dense};
use crate::rng::RandomSource;
use crate::system::{MarkovSystem, StateId};

/// Grade levels closer than this are merged into one support point.
pub const LEVEL_MERGE_EPS: f64 = 1e-9;

/// Default precision for the grade search.
pub const DEFAULT_GRADE_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Optimal stopping
// ---------------------------------------------------------------------------

/// Solution of the optimal stopping game at one profit level: the value of
/// every state and the optimal quit region (ties resolved toward quitting).
#[derive(Debug, Clone)]
pub struct StoppingSolution {
    pub profit_level: f64,
    pub values: Vec<f64>,
    pub quit_set: BTreeSet<StateId>,
}

/// Solves `V(v) = max(0, -C_v + Σ_w P[v][w]·V(w))` with `V(target) = g` by
/// policy iteration over quit sets, with an exact linear solve per policy.
pub fn solve_stopping(sys: &MarkovSystem, profit_level: f64) -> Result<StoppingSolution> {
    let n = sys.num_states();
    let t = sys.target();
    let g = profit_level;
    let tie = 1e-12 * g.max(1.0);
    let mut play = vec![false; n];
    let mut values = vec![0.0; n];
    values[t] = g;
    let max_rounds = 16 * n + 64;
    for _ in 0..max_rounds {
        let rows: Vec<StateId> = (0..n).filter(|&v| v != t && play[v]).collect();
        for v in 0..n {
            if v != t {
                values[v] = 0.0;
            }
        }
        if !rows.is_empty() {
            let a = i_minus_p(sys.transition(), &rows);
            let b = DVector::from_fn(rows.len(), |i, _| {
                let v = rows[i];
                -sys.move_cost(v) + sys.row(v)[t] * g
            });
            let x = solve_dense(a, b)?;
            for (i, &v) in rows.iter().enumerate() {
                values[v] = x[i];
            }
        }
        let mut changed = false;
        for v in 0..n {
            if v == t {
                continue;
            }
            let continuation: f64 = sys
                .row(v)
                .iter()
                .zip(values.iter())
                .map(|(p, val)| p * val)
                .sum();
            let play_value = continuation - sys.move_cost(v);
            let want = play_value > tie;
            if want != play[v] {
                play[v] = want;
                changed = true;
            }
        }
        if !changed {
            for v in values.iter_mut() {
                if *v < 0.0 && *v > -1e-9 {
                    *v = 0.0;
                }
            }
            let quit_set = (0..n).filter(|&v| v != t && !play[v]).collect();
            return Ok(StoppingSolution {
                profit_level: g,
                values,
                quit_set,
            });
        }
    }
    Err(Error::Numeric("policy iteration did not stabilize".into()))
}

/// Expected movement cost of a never-quitting player, per state.
pub fn never_quit_costs(sys: &MarkovSystem) -> Result<Vec<f64>> {
    let n = sys.num_states();
    let t = sys.target();
    let rows: Vec<StateId> = (0..n).filter(|&v| v != t).collect();
    let mut out = vec![0.0; n];
    if rows.is_empty() {
        return Ok(out);
    }
    let a = i_minus_p(sys.transition(), &rows);
    let b = DVector::from_fn(rows.len(), |i, _| sys.move_cost(rows[i]));
    let x = solve_dense(a, b)?;
    for (i, &v) in rows.iter().enumerate() {
        out[v] = x[i];
    }
    Ok(out)
}

/// Expected cost of a never-quitting player started at `from`.
pub fn never_quit_cost(sys: &MarkovSystem, from: StateId) -> Result<f64> {
    Ok(never_quit_costs(sys)?[from])
}

// ---------------------------------------------------------------------------
// Grades
// ---------------------------------------------------------------------------

/// The grade of `state`: the largest profit level at which the stopping
/// value at `state` is still zero.
///
/// Binary search over `[0, never_quit_cost]` with the predicate
/// `value > tol·max(1, g)`, followed by one exact refinement: the optimal
/// policy on the play side of the bracket defines a linear piece
/// `value(g) = a·g − b` of the game value, and its root `b/a` is returned
/// (clamped into `[0, hi]`). Ties resolve toward the larger `g`.
pub fn compute_grade(sys: &MarkovSystem, state: StateId, tol: f64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::InvalidParam("grade tolerance must be positive".into()));
    }
    if state == sys.target() {
        return Ok(0.0);
    }
    let e = never_quit_costs(sys)?[state];
    if e == 0.0 {
        return Ok(0.0);
    }
    let passes = |g: f64, value: f64| value > tol * g.max(1.0);
    let mut lo = 0.0_f64;
    // value(g) ≥ g − e, so the predicate holds here and the grade is below.
    let mut hi = e + 2.0 * tol * e.max(1.0);
    let mut rounds = 0;
    while hi - lo > tol && rounds < 200 {
        rounds += 1;
        let mid = 0.5 * (lo + hi);
        let sol = solve_stopping(sys, mid)?;
        if passes(mid, sol.values[state]) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let sol = solve_stopping(sys, hi)?;
    let t = sys.target();
    let rows: Vec<StateId> = (0..sys.num_states())
        .filter(|&v| v != t && !sol.quit_set.contains(&v))
        .collect();
    if let Some(pos) = rows.iter().position(|&v| v == state) {
        let m = i_minus_p(sys.transition(), &rows);
        let reach = solve_dense(
            m.clone(),
            DVector::from_fn(rows.len(), |i, _| sys.row(rows[i])[t]),
        )?;
        let cost = solve_dense(m, DVector::from_fn(rows.len(), |i, _| sys.move_cost(rows[i])))?;
        if reach[pos] > 1e-12 {
            return Ok((cost[pos] / reach[pos]).clamp(0.0, hi));
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-state grades plus the dummy grades at one switching cost.
#[derive(Debug, Clone)]
pub struct GradeTable {
    /// Grade of each state; zero at the target.
    pub grade: Vec<f64>,
    /// Grade of each state's dummy at `switch_cost`. The target slot holds
    /// the (unused) indifference point of a dummy feeding an absorbing
    /// state, which is `switch_cost` itself.
    pub dummy_grade: Vec<f64>,
    pub switch_cost: f64,
}

/// Grades for every state, and dummy grades computed on the
/// dummy-augmented system at the given switching cost.
pub fn compute_grade_table(sys: &MarkovSystem, switch_cost: f64, tol: f64) -> Result<GradeTable> {
    if switch_cost < 0.0 {
        return Err(Error::InvalidParam("switch cost must be nonnegative".into()));
    }
    let n = sys.num_states();
    let mut grade = vec![0.0; n];
    for v in 0..n {
        grade[v] = compute_grade(sys, v, tol)?;
    }
    let aug = sys.with_dummies(switch_cost);
    let mut dummy_grade = vec![switch_cost; n];
    for v in 0..n {
        if let Some(d) = aug.dummy_of(v) {
            dummy_grade[v] = compute_grade(&aug.system, d, tol)?;
        }
    }
    Ok(GradeTable {
        grade,
        dummy_grade,
        switch_cost,
    })
}

// ---------------------------------------------------------------------------
// Prevailing cost and epochs
// ---------------------------------------------------------------------------

/// Running maximum of grades along a path, with epoch boundaries (an epoch
/// is a maximal run over which the prevailing cost does not change).
#[derive(Debug, Clone, PartialEq)]
pub struct PrevailingRecord {
    pub prevailing: Vec<f64>,
    pub epoch_starts: Vec<usize>,
}

impl PrevailingRecord {
    pub fn epoch_count(&self) -> usize {
        self.epoch_starts.len()
    }

    pub fn final_prevailing(&self) -> Option<f64> {
        self.prevailing.last().copied()
    }
}

pub fn prevailing_and_epochs(segment: &[StateId], table: &GradeTable) -> PrevailingRecord {
    let mut prevailing = Vec::with_capacity(segment.len());
    let mut epoch_starts = Vec::new();
    let mut max = f64::NEG_INFINITY;
    for (i, &v) in segment.iter().enumerate() {
        let g = table.grade[v];
        if g > max {
            max = g;
            epoch_starts.push(i);
        }
        prevailing.push(max);
    }
    PrevailingRecord {
        prevailing,
        epoch_starts,
    }
}

// ---------------------------------------------------------------------------
// Selection-cost distribution
// ---------------------------------------------------------------------------

/// Exact law of the prevailing cost paid by a never-quitting player of the
/// teasing game — the selection cost of the stochastic-k-TSP reduction.
/// Finite support on the chain's distinct grade levels.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SelectionCostPmf {
    support: Vec<f64>,
    mass: Vec<f64>,
}

impl SelectionCostPmf {
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `Pr[cost ≤ x]`, with a 1e-12 slack so merged levels compare equal.
    pub fn cdf(&self, x: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .take_while(|(s, _)| **s <= x + 1e-12)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.mass).map(|(s, m)| s * m).sum()
    }

    /// Smallest support point at or above the half quantile.
    pub fn median(&self) -> f64 {
        let mut acc = 0.0;
        for (s, m) in self.support.iter().zip(&self.mass) {
            acc += m;
            if acc >= 0.5 {
                return *s;
            }
        }
        *self.support.last().unwrap_or(&0.0)
    }

    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (s, m) in self.support.iter().zip(&self.mass) {
            acc += m;
            if u < acc {
                return *s;
            }
        }
        *self.support.last().unwrap_or(&0.0)
    }
}

/// Sorted distinct grade values, merging levels closer than
/// [`LEVEL_MERGE_EPS`] into one point.
pub fn merged_grade_levels(grades: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = grades.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("grades are finite"));
    let mut out: Vec<f64> = Vec::new();
    for v in sorted {
        match out.last() {
            Some(&last) if v - last <= LEVEL_MERGE_EPS => {}
            _ => out.push(v),
        }
    }
    out
}

/// Selection-cost law of the chain started at its start state.
pub fn selection_cost_pmf(sys: &MarkovSystem, tol: f64) -> Result<SelectionCostPmf> {
    selection_cost_pmf_from(sys, sys.start(), tol)
}

/// Selection-cost law of the chain started at `from`.
pub fn selection_cost_pmf_from(
    sys: &MarkovSystem,
    from: StateId,
    tol: f64,
) -> Result<SelectionCostPmf> {
    let n = sys.num_states();
    let mut grades = vec![0.0; n];
    for v in 0..n {
        grades[v] = compute_grade(sys, v, tol)?;
    }
    pmf_from_grades(sys, from, &grades)
}

/// Selection-cost law given precomputed grades. For each distinct level γ
/// (ascending) the cumulative probability is `x_from` in the linear system
/// `x_target = 1`, `x_v = 0` for states with grade above γ, and
/// `x_v = Σ_u P[v][u]·x_u` otherwise; the pmf is the successive differences.
pub fn pmf_from_grades(
    sys: &MarkovSystem,
    from: StateId,
    grades: &[f64],
) -> Result<SelectionCostPmf> {
    let t = sys.target();
    if from == t {
        return Ok(SelectionCostPmf {
            support: vec![0.0],
            mass: vec![1.0],
        });
    }
    let n = sys.num_states();
    let levels = merged_grade_levels(grades);
    let mut cdf = Vec::with_capacity(levels.len());
    for &level in &levels {
        if grades[from] > level + LEVEL_MERGE_EPS {
            cdf.push(0.0);
            continue;
        }
        let rows: Vec<StateId> = (0..n)
            .filter(|&v| v != t && grades[v] <= level + LEVEL_MERGE_EPS)
            .collect();
        let a = i_minus_p(sys.transition(), &rows);
        let b = DVector::from_fn(rows.len(), |i, _| sys.row(rows[i])[t]);
        let x = solve_dense(a, b)?;
        let pos = rows
            .iter()
            .position(|&v| v == from)
            .expect("from is admissible at its own grade level");
        cdf.push(x[pos].clamp(0.0, 1.0));
    }
    let mut support = Vec::new();
    let mut mass = Vec::new();
    let mut prev = 0.0;
    for (i, &level) in levels.iter().enumerate() {
        let mut m = cdf[i] - prev;
        if m < 0.0 {
            if m < -1e-12 {
                return Err(Error::Numeric(format!(
                    "selection-cost cdf decreased by {m} at level {level}"
                )));
            }
            m = 0.0;
        }
        prev = cdf[i];
        if m > 1e-12 {
            support.push(level);
            mass.push(m);
        }
    }
    Ok(SelectionCostPmf { support, mass })
}

// ---------------------------------------------------------------------------
// Teasing game
// ---------------------------------------------------------------------------

/// Runs a never-quitting player of the teasing game from the start state:
/// the profit on the target is raised to the prevailing cost whenever the
/// chain reaches a state of higher grade, so the player always breaks even
/// in expectation. Returns `(final prevailing cost, movement cost paid)`.
pub fn simulate_teasing(
    sys: &MarkovSystem,
    grades: &[f64],
    rng: &mut RandomSource,
    step_cap: usize,
) -> Result<(f64, f64)> {
    let t = sys.target();
    let mut state = sys.start();
    let mut prevailing = grades[state];
    let mut cost = 0.0;
    let mut visited = vec![state];
    for _ in 0..step_cap {
        if state == t {
            return Ok((prevailing, cost));
        }
        let (next, c) = sys.step(state, rng)?;
        cost += c;
        state = next;
        visited.push(state);
        if grades[state] > prevailing {
            prevailing = grades[state];
        }
    }
    if state == t {
        return Ok((prevailing, cost));
    }
    Err(Error::StepCapExceeded {
        cap: step_cap,
        partial: visited,
        cost_so_far: cost,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
