//! Branches over coalition space and the batched partition queue.
//!
//! A branch is the set of coalitions `S` with `In ⊆ S` and `S ∩ Ex = ∅`,
//! encoded as mask bounds `mask_lb ≤ μ ≤ mask_ub`. Its coalition-weight sum
//! depends only on `r = |In|` and `s = |In| + |Ex|`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::propagate::{Interval, IntervalBox, LinearBounds};
use crate::valuefn::Mask;

/// `1 / ((s + 1) · C(s, r))`, built by multiplying child ratios from the root
/// so no binomial coefficient is ever formed.
pub fn sum_coalition_weights(r: usize, s: usize) -> Result<f64> {
    if r > s {
        return Err(Error::Domain(format!("r = {r} exceeds s = {s}")));
    }
    let mut lambda = 1.0;
    // include r features, then exclude s − r
    for t in 0..r {
        lambda *= (t + 1) as f64 / (t + 2) as f64;
    }
    for depth in r..s {
        lambda *= (depth + 1 - r) as f64 / (depth + 2) as f64;
    }
    Ok(lambda)
}

/// Weights of the include / exclude children of a branch with weight `lambda`.
pub fn child_lambdas(lambda: f64, r: usize, s: usize) -> Result<(f64, f64)> {
    if r > s {
        return Err(Error::Domain(format!("r = {r} exceeds s = {s}")));
    }
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let denom = (s + 2) as f64;
    Ok((lambda * (r + 1) as f64 / denom, lambda * (s + 1 - r) as f64 / denom))
}

/// Where feature `i` stands relative to a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// `i ∈ In`
    Included,
    /// `i ∈ Ex`
    Excluded,
    /// `i` still free
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    mask_lb: Vec<bool>,
    mask_ub: Vec<bool>,
    lambda: f64,
    pub value_bounds: Interval,
    /// Planes sandwiching `v` on this branch's box, when the propagation
    /// method produces them.
    pub planes: Option<LinearBounds>,
    r: usize,
    s: usize,
    seq: u64,
}

impl Branch {
    /// The branch holding every coalition of `g` features.
    pub fn root(g: usize, value_bounds: Interval) -> Self {
        Self {
            mask_lb: vec![false; g],
            mask_ub: vec![true; g],
            lambda: 1.0,
            value_bounds,
            planes: None,
            r: 0,
            s: 0,
            seq: 0,
        }
    }

    /// Branch with explicit `In`/`Ex` sets (0-based), weight from the closed form.
    pub fn from_sets(g: usize, included: &[usize], excluded: &[usize]) -> Result<Self> {
        let mut b = Self::root(g, Interval::point(0.0));
        for &j in included.iter().chain(excluded) {
            if j >= g {
                return Err(Error::Index { index: j, len: g });
            }
        }
        for &j in included {
            b.mask_lb[j] = true;
        }
        for &j in excluded {
            if b.mask_lb[j] {
                return Err(Error::Precondition(format!("feature {j} both included and excluded")));
            }
            b.mask_ub[j] = false;
        }
        b.r = b.mask_lb.iter().filter(|&&x| x).count();
        b.s = b.r + b.mask_ub.iter().filter(|&&x| !x).count();
        b.lambda = sum_coalition_weights(b.r, b.s)?;
        Ok(b)
    }

    pub fn num_features(&self) -> usize {
        self.mask_lb.len()
    }

    pub fn mask_lb(&self) -> &[bool] {
        &self.mask_lb
    }

    pub fn mask_ub(&self) -> &[bool] {
        &self.mask_ub
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Overrides the stored weight. Only useful for negative-control fixtures.
    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn category(&self, i: usize) -> Category {
        if self.mask_lb[i] {
            Category::Included
        } else if !self.mask_ub[i] {
            Category::Excluded
        } else {
            Category::Free
        }
    }

    pub fn is_free(&self, j: usize) -> bool {
        !self.mask_lb[j] && self.mask_ub[j]
    }

    pub fn free_features(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_features()).filter(|&j| self.is_free(j))
    }

    pub fn num_free(&self) -> usize {
        self.num_features() - self.s
    }

    /// `d_B = Λ_B · (ub − lb)` of the value bounds.
    pub fn diameter(&self) -> f64 {
        self.lambda * self.value_bounds.width()
    }

    /// The relaxed mask box `[mask_lb, mask_ub]`.
    pub fn mask_box(&self) -> IntervalBox {
        IntervalBox(
            self.mask_lb
                .iter()
                .zip(&self.mask_ub)
                .map(|(&l, &u)| Interval::new(f64::from(u8::from(l)), f64::from(u8::from(u))))
                .collect(),
        )
    }

    pub fn contains(&self, mask: &Mask) -> Result<bool> {
        if mask.len() != self.num_features() {
            return Err(Error::Dimension(format!(
                "mask has length {}, branch has {} features",
                mask.len(),
                self.num_features()
            )));
        }
        Ok(mask
            .bits()
            .iter()
            .zip(self.mask_lb.iter().zip(&self.mask_ub))
            .all(|(&m, (&l, &u))| (!l || m) && (!m || u)))
    }

    /// Splits on free feature `j` into (`j ∈ In`, `j ∈ Ex`). Children inherit
    /// the parent's value bounds until they are propagated.
    pub fn split(&self, j: usize) -> Result<(Branch, Branch)> {
        if j >= self.num_features() {
            return Err(Error::Index {
                index: j,
                len: self.num_features(),
            });
        }
        if !self.is_free(j) {
            return Err(Error::Precondition(format!("feature {j} is not free in this branch")));
        }
        let (lambda_in, lambda_out) = child_lambdas(self.lambda, self.r, self.s)?;
        let mut child_in = self.clone();
        child_in.mask_lb[j] = true;
        child_in.lambda = lambda_in;
        child_in.r += 1;
        child_in.s += 1;
        let mut child_out = self.clone();
        child_out.mask_ub[j] = false;
        child_out.lambda = lambda_out;
        child_out.s += 1;
        Ok((child_in, child_out))
    }
}

/// Split a branch on feature `j`.
pub fn split_branch(branch: &Branch, j: usize) -> Result<(Branch, Branch)> {
    branch.split(j)
}

/// Which end of the `d_B` order a batch is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectStrategy {
    MaxDiam,
    MinDiam,
}

impl SelectStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectStrategy::MaxDiam => "max_diam",
            SelectStrategy::MinDiam => "min_diam",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Priority(f64);

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Active branches ordered by `d_B`, plus totals for branches already pruned.
#[derive(Debug, Clone, Default)]
pub struct PartitionQueue {
    active: BTreeMap<(Priority, u64), Branch>,
    next_seq: u64,
    pruned_count: u64,
    pruned_lambda_total: f64,
}

impl PartitionQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Stamps the branch with the next creation sequence number and enqueues it.
    pub fn push(&mut self, mut branch: Branch) {
        branch.seq = self.next_seq;
        self.next_seq += 1;
        self.active.insert((Priority(branch.diameter()), branch.seq), branch);
    }

    /// Removes up to `b` branches from the requested end; ties go to the
    /// earliest-created branch.
    pub fn pop_batch(&mut self, b: usize, strategy: SelectStrategy) -> Result<Vec<Branch>> {
        if b == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.active.is_empty() {
            return Err(Error::EmptyQueue);
        }
        let mut out = Vec::with_capacity(b.min(self.active.len()));
        while out.len() < b {
            let key = match strategy {
                SelectStrategy::MinDiam => self.active.keys().next().copied(),
                SelectStrategy::MaxDiam => self
                    .active
                    .keys()
                    .next_back()
                    .map(|&(top, _)| *self.active.range((top, 0)..).next().expect("top key present").0),
            };
            match key {
                Some(k) => out.push(self.active.remove(&k).expect("key present")),
                None => break,
            }
        }
        Ok(out)
    }

    pub fn branches(&self) -> impl Iterator<Item = &Branch> {
        self.active.values()
    }

    pub fn record_pruned(&mut self, branch: &Branch) {
        self.pruned_count += 1;
        self.pruned_lambda_total += branch.lambda;
    }

    pub fn pruned_count(&self) -> u64 {
        self.pruned_count
    }

    pub fn pruned_lambda_total(&self) -> f64 {
        self.pruned_lambda_total
    }

    pub fn active_lambda_total(&self) -> f64 {
        self.active.values().map(|b| b.lambda).sum()
    }
}

/// Summed per-feature bound terms of every pruned branch.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedAccumulator {
    pub lb_phi_acc: Vec<f64>,
    pub ub_phi_acc: Vec<f64>,
}

impl PrunedAccumulator {
    pub fn new(g: usize) -> Self {
        Self {
            lb_phi_acc: vec![0.0; g],
            ub_phi_acc: vec![0.0; g],
        }
    }

    pub fn add(&mut self, terms: &[Interval]) {
        for ((lo, hi), t) in self.lb_phi_acc.iter_mut().zip(&mut self.ub_phi_acc).zip(terms) {
            *lo += t.lb;
            *hi += t.ub;
        }
    }
}
