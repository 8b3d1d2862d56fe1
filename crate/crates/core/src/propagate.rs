//! Interval and linear bound propagation of the masked value function.
//!
//! A mask box `[lb, ub] ⊆ [0,1]^g` is lifted, per background row `z`, into the
//! input box of `μ ↦ z + (x − z) ⊙ Pμ` where `P` is the 0/1 group lift. Bounds
//! are computed row by row and averaged endpoint-wise.

use crate::error::{Error, Result};
use crate::network::{Activation, Layer};
use crate::valuefn::{blend, AttributionProblem};

/// A closed real interval `[lb, ub]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lb: f64,
    pub ub: f64,
}

impl Interval {
    pub fn new(lb: f64, ub: f64) -> Self {
        debug_assert!(lb <= ub, "inverted interval [{lb}, {ub}]");
        Self { lb, ub }
    }

    /// Checked constructor for externally supplied bounds.
    pub fn try_new(lb: f64, ub: f64) -> Result<Self> {
        if !lb.is_finite() || !ub.is_finite() {
            return Err(Error::Value(format!("non-finite interval [{lb}, {ub}]")));
        }
        if lb > ub {
            return Err(Error::Value(format!("inverted interval [{lb}, {ub}]")));
        }
        Ok(Self { lb, ub })
    }

    pub fn point(v: f64) -> Self {
        Self { lb: v, ub: v }
    }

    pub fn width(&self) -> f64 {
        self.ub - self.lb
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lb + self.ub)
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lb - tol && v <= self.ub + tol
    }

    /// `self ⊆ other` with slack `tol` on both ends.
    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.lb >= other.lb - tol && self.ub <= other.ub + tol
    }

    /// Intersection of two intervals known to overlap. When rounding leaves them
    /// disjoint the result collapses onto the nearer endpoint.
    pub fn intersect(&self, other: &Interval) -> Interval {
        let lb = self.lb.max(other.lb);
        let ub = self.ub.min(other.ub);
        if lb <= ub {
            Interval { lb, ub }
        } else {
            Interval { lb: ub, ub: lb }
        }
    }

    pub fn scale(&self, k: f64) -> Interval {
        if k >= 0.0 {
            Interval {
                lb: k * self.lb,
                ub: k * self.ub,
            }
        } else {
            Interval {
                lb: k * self.ub,
                ub: k * self.lb,
            }
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lb: self.lb + other.lb,
            ub: self.ub + other.ub,
        }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let p = [
            self.lb * other.lb,
            self.lb * other.ub,
            self.ub * other.lb,
            self.ub * other.ub,
        ];
        Interval {
            lb: p.iter().copied().fold(f64::INFINITY, f64::min),
            ub: p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn abs_max(&self) -> f64 {
        self.lb.abs().max(self.ub.abs())
    }
}

/// A hyper-box as one interval per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox(pub Vec<Interval>);

impl IntervalBox {
    pub fn new(lb: &[f64], ub: &[f64]) -> Result<Self> {
        if lb.len() != ub.len() {
            return Err(Error::Dimension("box bounds differ in length".into()));
        }
        lb.iter()
            .zip(ub)
            .map(|(&l, &u)| Interval::try_new(l, u))
            .collect::<Result<Vec<_>>>()
            .map(IntervalBox)
    }

    pub fn point(x: &[f64]) -> Self {
        IntervalBox(x.iter().map(|&v| Interval::point(v)).collect())
    }

    /// The full mask box `[0,1]^g`.
    pub fn unit(g: usize) -> Self {
        IntervalBox(vec![Interval::new(0.0, 1.0); g])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.len() && self.0.iter().zip(x).all(|(iv, &v)| iv.contains(v, 0.0))
    }

    pub fn is_subset_of(&self, other: &IntervalBox, tol: f64) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.is_subset_of(b, tol))
    }
}

/// An affine function `slope · μ + offset` of the mask variable.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFn {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl LinearFn {
    fn zero(g: usize) -> Self {
        Self {
            slope: vec![0.0; g],
            offset: 0.0,
        }
    }

    pub fn eval(&self, mu: &[f64]) -> f64 {
        self.offset + self.slope.iter().zip(mu).map(|(a, m)| a * m).sum::<f64>()
    }

    pub fn min_over(&self, b: &IntervalBox) -> f64 {
        self.offset
            + self
                .slope
                .iter()
                .zip(b.intervals())
                .map(|(&a, iv)| (a * iv.lb).min(a * iv.ub))
                .sum::<f64>()
    }

    pub fn max_over(&self, b: &IntervalBox) -> f64 {
        self.offset
            + self
                .slope
                .iter()
                .zip(b.intervals())
                .map(|(&a, iv)| (a * iv.lb).max(a * iv.ub))
                .sum::<f64>()
    }

    fn accumulate(&mut self, other: &LinearFn) {
        self.offset += other.offset;
        for (a, b) in self.slope.iter_mut().zip(&other.slope) {
            *a += b;
        }
    }

    fn scale(&mut self, k: f64) {
        self.offset *= k;
        for a in &mut self.slope {
            *a *= k;
        }
    }
}

/// Paired affine bounds `lower(μ) ≤ v(μ) ≤ upper(μ)` valid on a mask box.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBounds {
    pub lower: LinearFn,
    pub upper: LinearFn,
}

impl LinearBounds {
    /// `max_{μ ∈ box} upper(μ) − lower(μ)`.
    pub fn max_gap(&self, b: &IntervalBox) -> f64 {
        let diff = LinearFn {
            slope: self
                .upper
                .slope
                .iter()
                .zip(&self.lower.slope)
                .map(|(u, l)| u - l)
                .collect(),
            offset: self.upper.offset - self.lower.offset,
        };
        diff.max_over(b)
    }
}

/// Bound propagation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    Ibp,
    Lbp,
}

impl Propagation {
    pub fn as_str(self) -> &'static str {
        match self {
            Propagation::Ibp => "ibp",
            Propagation::Lbp => "lbp",
        }
    }
}

/// Value bounds over a mask box; `linear` is only produced by LBP.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueBounds {
    pub interval: Interval,
    pub linear: Option<LinearBounds>,
}

/// Interval image of `W x + b` over `input`.
pub fn ibp_affine(weight: &[Vec<f64>], bias: &[f64], input: &IntervalBox) -> Result<IntervalBox> {
    if weight.len() != bias.len() {
        return Err(Error::Dimension("weight rows and bias length differ".into()));
    }
    if let Some(row) = weight.iter().find(|row| row.len() != input.len()) {
        return Err(Error::Dimension(format!(
            "weight has {} columns but the box has {} coordinates",
            row.len(),
            input.len()
        )));
    }
    Ok(ibp_affine_unchecked(weight, bias, input.intervals()))
}

fn ibp_affine_unchecked(weight: &[Vec<f64>], bias: &[f64], input: &[Interval]) -> IntervalBox {
    IntervalBox(
        weight
            .iter()
            .zip(bias)
            .map(|(row, &b)| {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for (&w, iv) in row.iter().zip(input) {
                    if w >= 0.0 {
                        lo += w * iv.lb;
                        hi += w * iv.ub;
                    } else {
                        lo += w * iv.ub;
                        hi += w * iv.lb;
                    }
                }
                Interval { lb: lo + b, ub: hi + b }
            })
            .collect(),
    )
}

/// Componentwise monotone image `[σ(lb), σ(ub)]`.
pub fn ibp_activation(kind: Activation, input: &IntervalBox) -> IntervalBox {
    IntervalBox(
        input
            .intervals()
            .iter()
            .map(|iv| Interval {
                lb: kind.apply(iv.lb),
                ub: kind.apply(iv.ub),
            })
            .collect(),
    )
}

fn check_mask_box(problem: &AttributionProblem, mask_box: &IntervalBox) -> Result<()> {
    let g = problem.num_features();
    if mask_box.len() != g {
        return Err(Error::Dimension(format!(
            "mask box has {} coordinates, expected {g}",
            mask_box.len()
        )));
    }
    if mask_box
        .intervals()
        .iter()
        .any(|iv| iv.lb < 0.0 || iv.ub > 1.0 || iv.lb > iv.ub)
    {
        return Err(Error::Domain("mask box must lie within [0,1]^g".into()));
    }
    Ok(())
}

/// IBP boxes for one background row: the input of every layer, then the output.
struct RowBoxes {
    layer_inputs: Vec<Vec<Interval>>,
    output: Vec<Interval>,
}

fn lifted_input_box(problem: &AttributionProblem, mask_box: &IntervalBox, z: &[f64]) -> Vec<Interval> {
    let m = mask_box.intervals();
    problem
        .explicand()
        .iter()
        .zip(z)
        .enumerate()
        .map(|(j, (&xj, &zj))| {
            let iv = m[problem.feature_of_input(j)];
            let a = blend(xj, zj, iv.lb);
            let b = blend(xj, zj, iv.ub);
            Interval {
                lb: a.min(b),
                ub: a.max(b),
            }
        })
        .collect()
}

fn ibp_row(problem: &AttributionProblem, mask_box: &IntervalBox, z: &[f64]) -> RowBoxes {
    let mut current = lifted_input_box(problem, mask_box, z);
    let layers = problem.network().layers();
    let mut layer_inputs = Vec::with_capacity(layers.len());
    for layer in layers {
        let next = match layer {
            Layer::Affine { weight, bias } => ibp_affine_unchecked(weight, bias, &current).0,
            Layer::Relu | Layer::Tanh => {
                let kind = layer.activation().expect("activation layer");
                current
                    .iter()
                    .map(|iv| Interval {
                        lb: kind.apply(iv.lb),
                        ub: kind.apply(iv.ub),
                    })
                    .collect()
            }
        };
        layer_inputs.push(std::mem::replace(&mut current, next));
    }
    RowBoxes {
        layer_inputs,
        output: current,
    }
}

fn mean_interval(intervals: impl Iterator<Item = Interval>, count: usize) -> Interval {
    let (lo, hi) = intervals.fold((0.0, 0.0), |(lo, hi), iv| (lo + iv.lb, hi + iv.ub));
    let k = count as f64;
    Interval { lb: lo / k, ub: hi / k }
}

/// Sound interval containing `v(μ)` for every `μ` in `mask_box`, by IBP.
pub fn ibp_value_bounds(problem: &AttributionProblem, mask_box: &IntervalBox) -> Result<Interval> {
    check_mask_box(problem, mask_box)?;
    let k = problem.target();
    let bg = problem.background();
    Ok(mean_interval(
        bg.iter().map(|z| ibp_row(problem, mask_box, z).output[k]),
        bg.len(),
    ))
}

/// Linear relaxation `αl z + βl ≤ σ(z) ≤ αu z + βu` on `[l, u]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub lower_slope: f64,
    pub lower_offset: f64,
    pub upper_slope: f64,
    pub upper_offset: f64,
}

impl Relaxation {
    fn exact(slope: f64, offset: f64) -> Self {
        Self {
            lower_slope: slope,
            lower_offset: offset,
            upper_slope: slope,
            upper_offset: offset,
        }
    }
}

/// Triangle relaxation for unstable units; exact for stable ones.
pub fn relax_relu(l: f64, u: f64) -> Relaxation {
    if u <= 0.0 {
        Relaxation::exact(0.0, 0.0)
    } else if l >= 0.0 {
        Relaxation::exact(1.0, 0.0)
    } else {
        let slope = u / (u - l);
        Relaxation {
            lower_slope: if u >= -l { 1.0 } else { 0.0 },
            lower_offset: 0.0,
            upper_slope: slope,
            upper_offset: -slope * l,
        }
    }
}

const TANH_THIN: f64 = 1e-9;

/// Secant/tangent relaxation of tanh, or parallel secant-slope lines when the
/// interval straddles zero.
pub fn relax_tanh(l: f64, u: f64) -> Relaxation {
    let (tl, tu) = (l.tanh(), u.tanh());
    if u - l < TANH_THIN {
        return Relaxation {
            lower_slope: 0.0,
            lower_offset: tl,
            upper_slope: 0.0,
            upper_offset: tu,
        };
    }
    let k = (tu - tl) / (u - l);
    let secant_offset = tl - k * l;
    let m = 0.5 * (l + u);
    let tm = m.tanh();
    let tangent_slope = 1.0 - tm * tm;
    let tangent_offset = tm - tangent_slope * m;
    if u <= 0.0 {
        // convex part
        Relaxation {
            lower_slope: tangent_slope,
            lower_offset: tangent_offset,
            upper_slope: k,
            upper_offset: secant_offset,
        }
    } else if l >= 0.0 {
        // concave part
        Relaxation {
            lower_slope: k,
            lower_offset: secant_offset,
            upper_slope: tangent_slope,
            upper_offset: tangent_offset,
        }
    } else {
        // tanh(z) − kz is extremal at the endpoints or where tanh'(z) = k.
        let h = |z: f64| z.tanh() - k * z;
        let mut lo = h(l).min(h(u));
        let mut hi = h(l).max(h(u));
        if k < 1.0 {
            let root = (1.0 - k).sqrt().atanh();
            for p in [-root, root] {
                if p > l && p < u {
                    lo = lo.min(h(p));
                    hi = hi.max(h(p));
                }
            }
        }
        Relaxation {
            lower_slope: k,
            lower_offset: lo,
            upper_slope: k,
            upper_offset: hi,
        }
    }
}

fn relax(kind: Activation, iv: Interval) -> Relaxation {
    match kind {
        Activation::Relu => relax_relu(iv.lb, iv.ub),
        Activation::Tanh => relax_tanh(iv.lb, iv.ub),
    }
}

/// One backward pass for a single row. `upper` selects which bound is built.
fn backward_row(problem: &AttributionProblem, boxes: &RowBoxes, z: &[f64], upper: bool) -> LinearFn {
    let layers = problem.network().layers();
    let mut coeff = vec![0.0; problem.network().output_dim()];
    coeff[problem.target()] = 1.0;
    let mut offset = 0.0;
    for (layer, pre) in layers.iter().zip(&boxes.layer_inputs).rev() {
        match layer {
            Layer::Affine { weight, bias } => {
                offset += coeff.iter().zip(bias).map(|(a, b)| a * b).sum::<f64>();
                let mut next = vec![0.0; pre.len()];
                for (a, row) in coeff.iter().zip(weight) {
                    if *a != 0.0 {
                        for (nj, w) in next.iter_mut().zip(row) {
                            *nj += a * w;
                        }
                    }
                }
                coeff = next;
            }
            Layer::Relu | Layer::Tanh => {
                let kind = layer.activation().expect("activation layer");
                for (a, iv) in coeff.iter_mut().zip(pre) {
                    if *a == 0.0 {
                        continue;
                    }
                    let r = relax(kind, *iv);
                    let use_upper_line = (*a >= 0.0) == upper;
                    let (slope, off) = if use_upper_line {
                        (r.upper_slope, r.upper_offset)
                    } else {
                        (r.lower_slope, r.lower_offset)
                    };
                    offset += *a * off;
                    *a *= slope;
                }
            }
        }
    }
    // Input lift: u_j = z_j + (x_j − z_j) μ_{group(j)}.
    let mut out = LinearFn::zero(problem.num_features());
    out.offset = offset;
    for (j, ((&a, &xj), &zj)) in coeff.iter().zip(problem.explicand()).zip(z).enumerate() {
        out.offset += a * zj;
        out.slope[problem.feature_of_input(j)] += a * (xj - zj);
    }
    out
}

/// Bounds from one propagation method. LBP also returns the averaged planes.
pub fn propagate(problem: &AttributionProblem, mask_box: &IntervalBox, method: Propagation) -> Result<ValueBounds> {
    match method {
        Propagation::Ibp => Ok(ValueBounds {
            interval: ibp_value_bounds(problem, mask_box)?,
            linear: None,
        }),
        Propagation::Lbp => lbp_value_linear(problem, mask_box),
    }
}

/// CROWN-IBP bounds with the averaged linear planes. The interval is
/// intersected, row by row, with the IBP output interval.
pub fn lbp_value_linear(problem: &AttributionProblem, mask_box: &IntervalBox) -> Result<ValueBounds> {
    check_mask_box(problem, mask_box)?;
    let g = problem.num_features();
    let k = problem.target();
    let bg = problem.background();
    let mut lower = LinearFn::zero(g);
    let mut upper = LinearFn::zero(g);
    let mut rows = Vec::with_capacity(bg.len());
    for z in bg {
        let boxes = ibp_row(problem, mask_box, z);
        let lo = backward_row(problem, &boxes, z, false);
        let hi = backward_row(problem, &boxes, z, true);
        let crown = Interval {
            lb: lo.min_over(mask_box),
            ub: hi.max_over(mask_box),
        };
        rows.push(crown.intersect(&boxes.output[k]));
        lower.accumulate(&lo);
        upper.accumulate(&hi);
    }
    let inv = 1.0 / bg.len() as f64;
    lower.scale(inv);
    upper.scale(inv);
    Ok(ValueBounds {
        interval: mean_interval(rows.into_iter(), bg.len()),
        linear: Some(LinearBounds { lower, upper }),
    })
}

/// Sound interval containing `v(μ)` for every `μ` in `mask_box`, by CROWN-IBP.
pub fn lbp_value_bounds(problem: &AttributionProblem, mask_box: &IntervalBox) -> Result<Interval> {
    Ok(lbp_value_linear(problem, mask_box)?.interval)
}

fn derivative_interval(kind: Activation, iv: Interval) -> Interval {
    match kind {
        Activation::Relu => {
            if iv.ub < 0.0 {
                Interval::point(0.0)
            } else if iv.lb > 0.0 {
                Interval::point(1.0)
            } else {
                Interval::new(0.0, 1.0)
            }
        }
        Activation::Tanh => {
            let d = |z: f64| {
                let t = z.tanh();
                1.0 - t * t
            };
            let nearest = 0.0_f64.clamp(iv.lb, iv.ub);
            let farthest = if iv.lb.abs() > iv.ub.abs() { iv.lb } else { iv.ub };
            Interval::new(d(farthest), d(nearest))
        }
    }
}

/// Per-feature interval containing `∂v/∂μ_j` over the whole mask box.
pub fn gradient_interval(problem: &AttributionProblem, mask_box: &IntervalBox) -> Result<IntervalBox> {
    check_mask_box(problem, mask_box)?;
    let g = problem.num_features();
    let bg = problem.background();
    let layers = problem.network().layers();
    let mut acc = vec![Interval::point(0.0); g];
    for z in bg {
        let boxes = ibp_row(problem, mask_box, z);
        let mut grad = vec![Interval::point(0.0); problem.network().output_dim()];
        grad[problem.target()] = Interval::point(1.0);
        for (layer, pre) in layers.iter().zip(&boxes.layer_inputs).rev() {
            match layer {
                Layer::Affine { weight, .. } => {
                    let mut next = vec![Interval::point(0.0); pre.len()];
                    for (gi, row) in grad.iter().zip(weight) {
                        if gi.lb == 0.0 && gi.ub == 0.0 {
                            continue;
                        }
                        for (nj, &w) in next.iter_mut().zip(row) {
                            *nj = nj.add(&gi.scale(w));
                        }
                    }
                    grad = next;
                }
                Layer::Relu | Layer::Tanh => {
                    let kind = layer.activation().expect("activation layer");
                    for (gi, iv) in grad.iter_mut().zip(pre) {
                        *gi = gi.mul(&derivative_interval(kind, *iv));
                    }
                }
            }
        }
        for (j, ((gj, &xj), &zj)) in grad.iter().zip(problem.explicand()).zip(z).enumerate() {
            let f = problem.feature_of_input(j);
            acc[f] = acc[f].add(&gj.scale(xj - zj));
        }
    }
    let inv = 1.0 / bg.len() as f64;
    Ok(IntervalBox(acc.into_iter().map(|iv| iv.scale(inv)).collect()))
}
