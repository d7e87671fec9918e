//! Threshold grid and the two-pointer frontier search over it.
//!
//! Indices are 0-based throughout. `q` indexes the text threshold and `p`
//! the vision threshold, so a cell `(q, p)` means `(τ[q], τ[p])`.
//!
//! When `g` is non-decreasing in both indices the feasible set
//! `{(q, p) : g(q, p) ≥ ρ}` is a staircase, and its lower edge
//! `p(q) = min { p : g(q, p) ≥ ρ }` is non-increasing in `q`. One pointer
//! sweep finds every `p(q)` with at most `2D` evaluations of `g`; `f` is then
//! needed only on those `D` cells. If `f` is also monotone, the constrained
//! minimum lies on that edge.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::dmt::{DmtObjective, FgValue, ThresholdPair};
use crate::error::{Error, Result};

/// Rectified-sigmoid steepness.
pub const GRID_STEEPNESS: f64 = 12.0;
/// Clamp margin keeping grid values inside the open unit interval.
pub const GRID_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    values: Vec<f64>,
}

impl Grid {
    /// A grid from explicit values; they must be strictly increasing in (0, 1).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("grid is empty".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidArgument("grid values must lie in (0, 1)".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("grid values must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn pair(&self, q: usize, p: usize) -> ThresholdPair {
        ThresholdPair { tau_text: self.values[q], tau_vision: self.values[p] }
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `D` points `u_i = i / (D + 1)`, mapped through a clamped steep sigmoid so
/// that resolution concentrates around the middle of the unit interval.
pub fn make_grid(d: usize) -> Result<Grid> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 points, got {d}")));
    }
    let values = (1..=d)
        .map(|i| {
            let u = i as f64 / (d + 1) as f64;
            logistic(GRID_STEEPNESS * (u - 0.5)).clamp(GRID_EPSILON, 1.0 - GRID_EPSILON)
        })
        .collect();
    Grid::from_values(values)
}

/// `(f, g)` at grid cell `(q, p)`.
pub trait FgEvaluator {
    fn grid_size(&self) -> usize;
    fn evaluate(&self, q: usize, p: usize) -> FgValue;
}

impl<E: FgEvaluator + ?Sized> FgEvaluator for &E {
    fn grid_size(&self) -> usize {
        (**self).grid_size()
    }

    fn evaluate(&self, q: usize, p: usize) -> FgValue {
        (**self).evaluate(q, p)
    }
}

/// Fully materialised `D × D` table, row-major in `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTable {
    d: usize,
    f: Vec<f64>,
    g: Vec<f64>,
}

impl FullTable {
    pub fn new(d: usize, f: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if d == 0 || f.len() != d * d || g.len() != d * d {
            return Err(Error::InvalidArgument(format!("table values must be {d}×{d}")));
        }
        Ok(Self { d, f, g })
    }

    pub fn materialize<E: FgEvaluator>(evaluator: &E) -> Self {
        let d = evaluator.grid_size();
        let mut f = Vec::with_capacity(d * d);
        let mut g = Vec::with_capacity(d * d);
        for q in 0..d {
            for p in 0..d {
                let v = evaluator.evaluate(q, p);
                f.push(v.f);
                g.push(v.g);
            }
        }
        Self { d, f, g }
    }

    pub fn size(&self) -> usize {
        self.d
    }

    pub fn f(&self, q: usize, p: usize) -> f64 {
        self.f[q * self.d + p]
    }

    pub fn g(&self, q: usize, p: usize) -> f64 {
        self.g[q * self.d + p]
    }
}

impl FgEvaluator for FullTable {
    fn grid_size(&self) -> usize {
        self.d
    }

    fn evaluate(&self, q: usize, p: usize) -> FgValue {
        FgValue { f: self.f(q, p), g: self.g(q, p) }
    }
}

/// DMT objective sampled on a threshold grid.
pub struct GridObjective<'o, 'a> {
    objective: &'o DmtObjective<'a>,
    grid: &'o Grid,
}

impl<'o, 'a> GridObjective<'o, 'a> {
    pub fn new(objective: &'o DmtObjective<'a>, grid: &'o Grid) -> Self {
        Self { objective, grid }
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }
}

impl FgEvaluator for GridObjective<'_, '_> {
    fn grid_size(&self) -> usize {
        self.grid.len()
    }

    fn evaluate(&self, q: usize, p: usize) -> FgValue {
        // Model, factors and calibration set were validated when the
        // objective was built, and grid thresholds are always in range.
        self.objective.evaluate(self.grid.pair(q, p)).expect("validated objective failed to evaluate").value
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    /// Distinct cells whose `f` was requested.
    pub f_calls: u64,
    /// Distinct cells whose `g` was requested.
    pub g_calls: u64,
    /// Underlying evaluator invocations (one per distinct cell touched).
    pub evaluations: u64,
}

/// Memoising, counting view over an evaluator.
pub struct FgTable<E> {
    evaluator: E,
    memo: HashMap<(usize, usize), FgValue>,
    f_seen: HashSet<(usize, usize)>,
    g_seen: HashSet<(usize, usize)>,
    counters: Counters,
}

impl<E: FgEvaluator> FgTable<E> {
    pub fn new(evaluator: E) -> Self {
        Self {
            evaluator,
            memo: HashMap::new(),
            f_seen: HashSet::new(),
            g_seen: HashSet::new(),
            counters: Counters::default(),
        }
    }

    pub fn grid_size(&self) -> usize {
        self.evaluator.grid_size()
    }

    fn fetch(&mut self, q: usize, p: usize) -> FgValue {
        let evaluator = &self.evaluator;
        let counters = &mut self.counters;
        *self.memo.entry((q, p)).or_insert_with(|| {
            counters.evaluations += 1;
            evaluator.evaluate(q, p)
        })
    }

    pub fn g(&mut self, q: usize, p: usize) -> f64 {
        if self.g_seen.insert((q, p)) {
            self.counters.g_calls += 1;
        }
        self.fetch(q, p).g
    }

    pub fn f(&mut self, q: usize, p: usize) -> f64 {
        if self.f_seen.insert((q, p)) {
            self.counters.f_calls += 1;
        }
        self.fetch(q, p).f
    }

    /// Memoised value without touching counters.
    pub fn peek(&self, q: usize, p: usize) -> Option<FgValue> {
        self.memo.get(&(q, p)).copied()
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontierEntry {
    pub q: usize,
    pub p: usize,
    pub f: f64,
    pub g: f64,
}

/// A broken search invariant; only possible when `g` is not monotone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InvariantViolation {
    /// `g(q, p(q)) < ρ`.
    Infeasible { q: usize, p: usize, g: f64 },
    /// `g(q, p(q) - 1) ≥ ρ`.
    NotMinimal { q: usize, p: usize, g_below: f64 },
    /// `p(q) > p(q')` for an earlier `q'`.
    Increasing { q: usize, p: usize, previous_p: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierResult {
    pub frontier: Vec<FrontierEntry>,
    /// `None` when no cell satisfies `g ≥ ρ`.
    pub optimum: Option<FrontierEntry>,
    pub counters: Counters,
    pub rho: f64,
    pub grid_size: usize,
    pub violations: Vec<InvariantViolation>,
}

impl FrontierResult {
    pub fn is_feasible(&self) -> bool {
        self.optimum.is_some()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("target ratio {rho} outside (0, 1)")));
    }
    Ok(())
}

/// Smallest `f`; ties go to the larger `g`, then to the earlier entry.
fn better(candidate: &FrontierEntry, best: &FrontierEntry) -> bool {
    candidate.f < best.f || (candidate.f == best.f && candidate.g > best.g)
}

pub fn frontier_search<E: FgEvaluator>(evaluator: E, rho: f64) -> Result<FrontierResult> {
    check_rho(rho)?;
    let d = evaluator.grid_size();
    let mut table = FgTable::new(evaluator);
    let mut frontier: Vec<FrontierEntry> = Vec::new();
    let mut violations = Vec::new();

    // `p` is one past the candidate being tested, so it never goes negative.
    let mut p = d;
    for q in 0..d {
        while p >= 1 && table.g(q, p - 1) >= rho {
            p -= 1;
        }
        if p < d {
            let f = table.f(q, p);
            let g = table.peek(q, p).map(|v| v.g).expect("f evaluation memoises g");
            if g < rho {
                violations.push(InvariantViolation::Infeasible { q, p, g });
            }
            if p >= 1 {
                if let Some(below) = table.peek(q, p - 1) {
                    if below.g >= rho {
                        violations.push(InvariantViolation::NotMinimal { q, p, g_below: below.g });
                    }
                }
            }
            if let Some(prev) = frontier.last() {
                if p > prev.p {
                    violations.push(InvariantViolation::Increasing { q, p, previous_p: prev.p });
                }
            }
            frontier.push(FrontierEntry { q, p, f, g });
        }
    }

    let optimum = frontier.iter().fold(None::<FrontierEntry>, |best, e| match best {
        Some(b) if !better(e, &b) => Some(b),
        _ => Some(*e),
    });
    Ok(FrontierResult { frontier, optimum, counters: table.counters(), rho, grid_size: d, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveResult {
    pub best: Option<FrontierEntry>,
    pub counters: Counters,
}

/// Exhaustive scan of all `D²` cells; ties go to the lexicographically
/// smallest `(q, p)`.
pub fn naive_search<E: FgEvaluator>(evaluator: E, rho: f64) -> Result<NaiveResult> {
    check_rho(rho)?;
    let d = evaluator.grid_size();
    let mut table = FgTable::new(evaluator);
    let mut best: Option<FrontierEntry> = None;
    for q in 0..d {
        for p in 0..d {
            let g = table.g(q, p);
            let f = table.f(q, p);
            if g >= rho && best.is_none_or(|b| f < b.f) {
                best = Some(FrontierEntry { q, p, f, g });
            }
        }
    }
    Ok(NaiveResult { best, counters: table.counters() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    /// Between `(q, p)` and `(q + 1, p)`.
    Q,
    /// Between `(q, p)` and `(q, p + 1)`.
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub axis: Axis,
    pub q: usize,
    pub p: usize,
    /// How far the value drops when stepping along `axis`; always positive.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub f_violations: Vec<Violation>,
    pub g_violations: Vec<Violation>,
}

impl MonotoneReport {
    pub fn is_monotone(&self) -> bool {
        self.f_violations.is_empty() && self.g_violations.is_empty()
    }
}

fn inversions(d: usize, value: impl Fn(usize, usize) -> f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for q in 0..d {
        for p in 0..d {
            let here = value(q, p);
            if q + 1 < d {
                let next = value(q + 1, p);
                if next < here {
                    out.push(Violation { axis: Axis::Q, q, p, magnitude: here - next });
                }
            }
            if p + 1 < d {
                let next = value(q, p + 1);
                if next < here {
                    out.push(Violation { axis: Axis::P, q, p, magnitude: here - next });
                }
            }
        }
    }
    out
}

/// Every adjacent-cell decrease of `f` and of `g`.
pub fn verify_monotone(table: &FullTable) -> MonotoneReport {
    MonotoneReport {
        f_violations: inversions(table.size(), |q, p| table.f(q, p)),
        g_violations: inversions(table.size(), |q, p| table.g(q, p)),
    }
}
