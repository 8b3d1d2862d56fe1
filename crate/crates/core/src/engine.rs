//! Branch and bound over coalition space with anytime SHAP bounds.
//!
//! Every active branch contributes, for each feature `i`, an interval term to
//! the bounds on `φ_i`; the running bounds are the sum of these terms plus the
//! terms of every pruned branch. A step pops a batch, splits each branch on one
//! feature, propagates the children and swaps the parent's terms for theirs.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::coalition::{Branch, Category, PartitionQueue, PrunedAccumulator, SelectStrategy};
use crate::error::{Error, Result};
use crate::propagate::{gradient_interval, propagate, Interval, LinearBounds, Propagation};
use crate::valuefn::AttributionProblem;

/// Strong/smart branching simulate at most this many free features per branch.
pub const MAX_SPLIT_CANDIDATES: usize = 32;

/// How the feature to split on is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Smallest free index.
    InOrder,
    /// Largest bound on `|∂v/∂μ_j|` over the branch box.
    Smears,
    /// Simulate every candidate split with the configured propagation.
    StrongBranching,
    /// Simulate every candidate split with IBP.
    SmartBranchingIbp,
}

impl SplitStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitStrategy::InOrder => "in_order",
            SplitStrategy::Smears => "smears",
            SplitStrategy::StrongBranching => "strong_branching",
            SplitStrategy::SmartBranchingIbp => "smart_branching_ibp",
        }
    }
}

/// Any-of stopping rules. Queue exhaustion always stops the search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StopCriteria {
    /// Absolute target for `max_i (ub_i − lb_i)`.
    pub delta: Option<f64>,
    /// Target for `max_i (ub_i − lb_i) / 2` as a fraction of `|f(x)_k|`.
    pub hr_fraction: Option<f64>,
    pub timeout: Option<Duration>,
    pub max_iterations: Option<u64>,
}

impl StopCriteria {
    /// Run until the queue is empty.
    pub fn exhaustive() -> Self {
        Self {
            delta: Some(0.0),
            ..Self::default()
        }
    }

    fn is_empty(&self) -> bool {
        self.delta.is_none() && self.hr_fraction.is_none() && self.timeout.is_none() && self.max_iterations.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub batch_size: usize,
    pub select: SelectStrategy,
    pub split: SplitStrategy,
    pub propagation: Propagation,
    pub stop: StopCriteria,
    /// Children whose value bounds (or linear-plane gap) are at most this wide are pruned.
    pub prune_tol: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            select: SelectStrategy::MaxDiam,
            split: SplitStrategy::Smears,
            propagation: Propagation::Lbp,
            stop: StopCriteria::default(),
            prune_tol: 1e-12,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.stop.is_empty() {
            return Err(Error::Config("at least one stop criterion is required".into()));
        }
        if self.prune_tol.is_nan() || self.prune_tol < 0.0 {
            return Err(Error::Config("prune_tol must be non-negative".into()));
        }
        if let Some(d) = self.stop.delta {
            if d.is_nan() || d < 0.0 {
                return Err(Error::Config("delta must be non-negative".into()));
            }
        }
        if let Some(h) = self.stop.hr_fraction {
            if h.is_nan() || h < 0.0 {
                return Err(Error::Config("hr fraction must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Anytime SHAP bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsState {
    pub lb_phi: Vec<f64>,
    pub ub_phi: Vec<f64>,
    /// 1 after the root is bounded, then one more per popped batch.
    pub iteration: u64,
    pub branches_explored: u64,
    pub branches_pruned: u64,
}

impl BoundsState {
    pub fn gaps(&self) -> Vec<f64> {
        self.lb_phi.iter().zip(&self.ub_phi).map(|(l, u)| u - l).collect()
    }

    pub fn max_gap(&self) -> f64 {
        self.gaps().into_iter().fold(0.0, f64::max)
    }

    pub fn interval(&self, i: usize) -> Interval {
        Interval::new(self.lb_phi[i], self.ub_phi[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    ConvergedExact,
    ReachedDelta,
    ReachedHr,
    Timeout,
    MaxIter,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::ConvergedExact => "converged_exact",
            Status::ReachedDelta => "reached_delta",
            Status::ReachedHr => "reached_hr",
            Status::Timeout => "timeout",
            Status::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    pub active_branches: usize,
    pub pruned_total: u64,
    pub max_gap: f64,
    pub wall_seconds: f64,
    pub lb_phi: Vec<f64>,
    pub ub_phi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub bounds: BoundsState,
    pub trace: Vec<TraceRecord>,
    pub status: Status,
}

/// Per-feature bound terms of one branch from its value interval:
/// `Λ⁻·[lb, ub]` when `i ∈ In`, `Λ·[lb − ub, ub − lb]` when `i` is free and
/// `−Λ⁺·[ub, lb]` when `i ∈ Ex`, with `Λ⁻ = Λ(s+1)/r` and `Λ⁺ = Λ(s+1)/(s−r)`.
pub fn branch_terms(branch: &Branch) -> Result<Vec<Interval>> {
    let (lambda, r, s) = (branch.lambda(), branch.r(), branch.s());
    let v = branch.value_bounds;
    let width = v.width();
    (0..branch.num_features())
        .map(|i| match branch.category(i) {
            Category::Included => {
                if r == 0 {
                    return Err(Error::Category(format!("feature {i} included but r = 0")));
                }
                let k = lambda * (s + 1) as f64 / r as f64;
                Ok(Interval::new(k * v.lb, k * v.ub))
            }
            Category::Excluded => {
                if s == r {
                    return Err(Error::Category(format!("feature {i} excluded but s = r")));
                }
                let k = lambda * (s + 1) as f64 / (s - r) as f64;
                Ok(Interval::new(-k * v.ub, -k * v.lb))
            }
            Category::Free => Ok(Interval::new(-lambda * width, lambda * width)),
        })
        .collect()
}

/// Per-feature bound terms of a branch on which `v` is sandwiched between two
/// planes. Each coalition sum is evaluated at its weighted mask centroid:
/// free coordinates sit at `r/(s+1)` (`i ∈ In`), `(r+1)/(s+1)` (`i ∈ Ex`) or
/// `(r+1)/(s+2)` (`i` free, pairs `S`, `S ∪ {i}`).
pub fn linear_terms(branch: &Branch, planes: &LinearBounds) -> Vec<Interval> {
    let (lambda, r, s) = (branch.lambda(), branch.r() as f64, branch.s() as f64);
    let g = branch.num_features();
    let sums = |slope: &[f64]| {
        let mut included = 0.0;
        let mut free = 0.0;
        for (j, &a) in slope.iter().enumerate() {
            match branch.category(j) {
                Category::Included => included += a,
                Category::Free => free += a,
                Category::Excluded => {}
            }
        }
        (included, free)
    };
    let (in_l, free_l) = sums(&planes.lower.slope);
    let (in_u, free_u) = sums(&planes.upper.slope);
    let (c_l, c_u) = (planes.lower.offset, planes.upper.offset);
    (0..g)
        .map(|i| match branch.category(i) {
            Category::Included => {
                let k = lambda * (s + 1.0) / r;
                let t = r / (s + 1.0);
                ordered(k * (c_l + in_l + free_l * t), k * (c_u + in_u + free_u * t))
            }
            Category::Excluded => {
                let k = lambda * (s + 1.0) / (s - r);
                let t = (r + 1.0) / (s + 1.0);
                ordered(-k * (c_u + in_u + free_u * t), -k * (c_l + in_l + free_l * t))
            }
            Category::Free => {
                let t = (r + 1.0) / (s + 2.0);
                let (al, au) = (planes.lower.slope[i], planes.upper.slope[i]);
                let low_with = c_l + in_l + (free_l - al) * t + al;
                let low_without = c_l + in_l + (free_l - al) * t;
                let up_with = c_u + in_u + (free_u - au) * t + au;
                let up_without = c_u + in_u + (free_u - au) * t;
                ordered(lambda * (low_with - up_without), lambda * (up_with - low_without))
            }
        })
        .collect()
}

/// The terms a branch contributes to the bounds: its interval terms,
/// tightened by its plane terms when it carries planes.
pub fn bound_terms(branch: &Branch) -> Result<Vec<Interval>> {
    let terms = branch_terms(branch)?;
    Ok(match &branch.planes {
        Some(planes) => linear_terms(branch, planes)
            .into_iter()
            .zip(terms)
            .map(|(l, t)| l.intersect(&t))
            .collect(),
        None => terms,
    })
}

fn ordered(a: f64, b: f64) -> Interval {
    Interval {
        lb: a.min(b),
        ub: a.max(b),
    }
}

/// Sums the terms of `branches` onto the pruned accumulator.
pub fn assemble<'b>(
    branches: impl IntoIterator<Item = &'b Branch>,
    acc: &PrunedAccumulator,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lb = acc.lb_phi_acc.clone();
    let mut ub = acc.ub_phi_acc.clone();
    for branch in branches {
        if branch.num_features() != lb.len() {
            return Err(Error::Dimension("branch and accumulator sizes differ".into()));
        }
        for (i, t) in bound_terms(branch)?.into_iter().enumerate() {
            lb[i] += t.lb;
            ub[i] += t.ub;
        }
    }
    Ok((lb, ub))
}

/// A propagated child and what to do with it.
#[derive(Debug, Clone)]
struct Child {
    branch: Branch,
    terms: Vec<Interval>,
    pruned: bool,
}

fn evaluate(
    problem: &AttributionProblem,
    mut branch: Branch,
    parent: Option<Interval>,
    method: Propagation,
) -> Result<Branch> {
    let vb = propagate(problem, &branch.mask_box(), method)?;
    branch.value_bounds = match parent {
        Some(p) => vb.interval.intersect(&p),
        None => vb.interval,
    };
    branch.planes = vb.linear;
    Ok(branch)
}

fn collapses(branch: &Branch, tol: f64) -> bool {
    branch
        .planes
        .as_ref()
        .is_some_and(|lin| lin.max_gap(&branch.mask_box()) <= tol)
}

/// Width a split leaves behind: zero when the child collapses to its planes.
fn residual_width(branch: &Branch, tol: f64) -> f64 {
    if collapses(branch, tol) {
        0.0
    } else {
        branch.value_bounds.width()
    }
}

fn finalize(branch: Branch, tol: f64) -> Result<Child> {
    let terms = bound_terms(&branch)?;
    let pruned = collapses(&branch, tol) || branch.value_bounds.width() <= tol || branch.num_free() == 0;
    Ok(Child { branch, terms, pruned })
}

/// Picks the feature to split `branch` on.
pub fn choose_split_feature(
    branch: &Branch,
    strategy: SplitStrategy,
    problem: &AttributionProblem,
    propagation: Propagation,
    prune_tol: f64,
) -> Result<usize> {
    let first = branch.free_features().next().ok_or(Error::NoFreeFeature)?;
    match strategy {
        SplitStrategy::InOrder => Ok(first),
        SplitStrategy::Smears => {
            let grad = gradient_interval(problem, &branch.mask_box())?;
            let mut best = (first, f64::NEG_INFINITY);
            for j in branch.free_features() {
                let score = grad.0[j].abs_max();
                if score > best.1 {
                    best = (j, score);
                }
            }
            Ok(best.0)
        }
        SplitStrategy::StrongBranching | SplitStrategy::SmartBranchingIbp => {
            let method = if strategy == SplitStrategy::SmartBranchingIbp {
                Propagation::Ibp
            } else {
                propagation
            };
            let mut best = (first, f64::INFINITY);
            for j in branch.free_features().take(MAX_SPLIT_CANDIDATES) {
                let (a, b) = branch.split(j)?;
                let parent = Some(branch.value_bounds);
                let wa = residual_width(&evaluate(problem, a, parent, method)?, prune_tol);
                let wb = residual_width(&evaluate(problem, b, parent, method)?, prune_tol);
                let score = wa.max(wb);
                if score < best.1 {
                    best = (j, score);
                }
            }
            Ok(best.0)
        }
    }
}

struct Expansion {
    parent_terms: Vec<Interval>,
    children: [Child; 2],
}

/// The search state. Drive it with [`Engine::step`] or [`Engine::run`].
pub struct Engine<'a> {
    problem: &'a AttributionProblem,
    config: EngineConfig,
    queue: PartitionQueue,
    acc: PrunedAccumulator,
    // running sums of the branch terms; `state` is their intersection over
    // all iterates so far
    raw_lb: Vec<f64>,
    raw_ub: Vec<f64>,
    state: BoundsState,
    started: Instant,
}

impl<'a> Engine<'a> {
    /// Bounds the root branch and assembles the first bounds.
    pub fn new(problem: &'a AttributionProblem, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let g = problem.num_features();
        let started = Instant::now();
        let root = Branch::root(g, Interval::point(0.0));
        let root = finalize(evaluate(problem, root, None, config.propagation)?, config.prune_tol)?;
        let mut queue = PartitionQueue::new();
        let mut acc = PrunedAccumulator::new(g);
        let mut state = BoundsState {
            lb_phi: root.terms.iter().map(|t| t.lb).collect(),
            ub_phi: root.terms.iter().map(|t| t.ub).collect(),
            iteration: 1,
            branches_explored: 1,
            branches_pruned: 0,
        };
        if root.pruned {
            acc.add(&root.terms);
            queue.record_pruned(&root.branch);
            state.branches_pruned = 1;
        } else {
            queue.push(root.branch);
        }
        let (raw_lb, raw_ub) = (state.lb_phi.clone(), state.ub_phi.clone());
        Ok(Self {
            problem,
            config,
            queue,
            acc,
            raw_lb,
            raw_ub,
            state,
            started,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn state(&self) -> &BoundsState {
        &self.state
    }

    pub fn queue(&self) -> &PartitionQueue {
        &self.queue
    }

    pub fn accumulator(&self) -> &PrunedAccumulator {
        &self.acc
    }

    pub fn is_exhausted(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    /// Full assembly over the active branches and the accumulator.
    pub fn reassemble(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        assemble(self.queue.branches(), &self.acc)
    }

    fn expand(&self, branch: &Branch) -> Result<Expansion> {
        let cfg = &self.config;
        let j = choose_split_feature(branch, cfg.split, self.problem, cfg.propagation, cfg.prune_tol)?;
        let (a, b) = branch.split(j)?;
        let parent = Some(branch.value_bounds);
        let ca = finalize(evaluate(self.problem, a, parent, cfg.propagation)?, cfg.prune_tol)?;
        let cb = finalize(evaluate(self.problem, b, parent, cfg.propagation)?, cfg.prune_tol)?;
        Ok(Expansion {
            parent_terms: bound_terms(branch)?,
            children: [ca, cb],
        })
    }

    /// Pops one batch, splits and propagates it, and updates the bounds.
    pub fn step(&mut self) -> Result<()> {
        let batch = self.queue.pop_batch(self.config.batch_size, self.config.select)?;
        let expansions = batch.par_iter().map(|b| self.expand(b)).collect::<Result<Vec<_>>>()?;
        let (lb, ub) = (&mut self.raw_lb, &mut self.raw_ub);
        for exp in expansions {
            for (i, t) in exp.parent_terms.iter().enumerate() {
                lb[i] -= t.lb;
                ub[i] -= t.ub;
            }
            for child in exp.children {
                for (i, t) in child.terms.iter().enumerate() {
                    lb[i] += t.lb;
                    ub[i] += t.ub;
                }
                self.state.branches_explored += 1;
                if child.pruned {
                    self.acc.add(&child.terms);
                    self.queue.record_pruned(&child.branch);
                    self.state.branches_pruned += 1;
                } else {
                    self.queue.push(child.branch);
                }
            }
        }
        // Children can be looser than their parent, so keep the tightest bounds seen.
        for i in 0..self.raw_lb.len() {
            let mut lo = self.raw_lb[i].max(self.state.lb_phi[i]);
            let mut hi = self.raw_ub[i].min(self.state.ub_phi[i]);
            if lo > hi {
                let mid = 0.5 * (lo + hi);
                lo = mid;
                hi = mid;
            }
            self.state.lb_phi[i] = lo;
            self.state.ub_phi[i] = hi;
        }
        self.state.iteration += 1;
        Ok(())
    }

    /// The status that ends the search now, if any.
    pub fn stop_status(&self) -> Option<Status> {
        let stop = &self.config.stop;
        if self.queue.is_empty() {
            return Some(Status::ConvergedExact);
        }
        let gap = self.state.max_gap();
        if stop.delta.is_some_and(|d| gap <= d) {
            return Some(Status::ReachedDelta);
        }
        if let Some(frac) = stop.hr_fraction {
            if 0.5 * gap <= frac * self.problem.output_at_explicand().abs() {
                return Some(Status::ReachedHr);
            }
        }
        if stop.max_iterations.is_some_and(|m| self.state.iteration >= m) {
            return Some(Status::MaxIter);
        }
        if stop.timeout.is_some_and(|t| self.started.elapsed() >= t) {
            return Some(Status::Timeout);
        }
        None
    }

    pub fn trace_record(&self) -> TraceRecord {
        TraceRecord {
            iteration: self.state.iteration,
            active_branches: self.queue.len(),
            pruned_total: self.state.branches_pruned,
            max_gap: self.state.max_gap(),
            wall_seconds: self.started.elapsed().as_secs_f64(),
            lb_phi: self.state.lb_phi.clone(),
            ub_phi: self.state.ub_phi.clone(),
        }
    }

    /// Steps until a stop criterion fires, recording one trace row per iteration.
    pub fn run(mut self) -> Result<RunOutput> {
        let mut trace = vec![self.trace_record()];
        let status = loop {
            if let Some(status) = self.stop_status() {
                break status;
            }
            self.step()?;
            trace.push(self.trace_record());
        };
        Ok(RunOutput {
            bounds: self.state,
            trace,
            status,
        })
    }
}

/// Runs the search to a stop criterion.
pub fn run(problem: &AttributionProblem, config: EngineConfig) -> Result<RunOutput> {
    Engine::new(problem, config)?.run()
}
