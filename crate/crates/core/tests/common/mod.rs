// Shared fixtures and independent reference implementations for the
// integration tests. Nothing here calls into the library's own evaluation
// code, so agreement with it means something.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use shapley_bounds::{AttributionProblem, Branch, Engine, Groups, Layer, Mask, Network, ValueKind};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Relu,
    Tanh,
}

fn dense(rng: &mut StdRng, fan_in: usize, fan_out: usize) -> Layer {
    let scale = 2.0 / (fan_in as f64).sqrt();
    let weight = (0..fan_out)
        .map(|_| (0..fan_in).map(|_| rng.random_range(-scale..scale)).collect())
        .collect();
    let bias = (0..fan_out).map(|_| rng.random_range(-0.5..0.5)).collect();
    Layer::affine(weight, bias)
}

/// Dense network with the given hidden widths and one activation kind.
pub fn random_net(rng: &mut StdRng, n_in: usize, hidden: &[usize], n_out: usize, act: Act) -> Network {
    let mut layers = Vec::new();
    let mut fan_in = n_in;
    for &h in hidden {
        layers.push(dense(rng, fan_in, h));
        layers.push(match act {
            Act::Relu => Layer::Relu,
            Act::Tanh => Layer::Tanh,
        });
        fan_in = h;
    }
    layers.push(dense(rng, fan_in, n_out));
    Network::new(layers, n_in, n_out).expect("valid random network")
}

/// One or two hidden layers of width at most 16.
pub fn random_hidden(rng: &mut StdRng) -> Vec<usize> {
    let depth = rng.random_range(1..=2);
    (0..depth).map(|_| rng.random_range(2..=16)).collect()
}

/// Stack of affine layers. Also returns the row of the composed weight
/// matrix for output `target`.
pub fn random_affine(rng: &mut StdRng, n_in: usize, depth: usize, n_out: usize, target: usize) -> (Network, Vec<f64>) {
    let mut layers = Vec::new();
    let mut fan_in = n_in;
    for d in 0..depth {
        let out = if d + 1 == depth { n_out } else { rng.random_range(2..=8) };
        layers.push(dense(rng, fan_in, out));
        fan_in = out;
    }
    // compose backwards from the target row
    let mut row: Vec<f64> = Vec::new();
    for (d, layer) in layers.iter().enumerate().rev() {
        let Layer::Affine { weight, .. } = layer else {
            unreachable!()
        };
        if d + 1 == layers.len() {
            row = weight[target].clone();
        } else {
            let cols = weight[0].len();
            row = (0..cols)
                .map(|c| row.iter().zip(weight).map(|(r, w)| r * w[c]).sum())
                .collect();
        }
    }
    (Network::new(layers, n_in, n_out).expect("valid affine network"), row)
}

pub fn random_rows(rng: &mut StdRng, rows: usize, n: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..n).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect()
}

pub fn marginal(net: Network, x: Vec<f64>, bg: Vec<Vec<f64>>, target: usize) -> AttributionProblem {
    AttributionProblem::new(net, x, bg, ValueKind::Marginal, target, None).expect("valid problem")
}

/// Random ReLU marginal problem with `g` features and `rows` background rows.
pub fn random_problem(rng: &mut StdRng, g: usize, rows: usize, act: Act) -> AttributionProblem {
    let hidden = random_hidden(rng);
    let net = random_net(rng, g, &hidden, 1, act);
    let x = random_rows(rng, 1, g).remove(0);
    let bg = random_rows(rng, rows, g);
    marginal(net, x, bg, 0)
}

/// Plain forward pass written against the layer list.
pub fn forward(net: &Network, input: &[f64]) -> Vec<f64> {
    let mut h = input.to_vec();
    for layer in net.layers() {
        h = match layer {
            Layer::Affine { weight, bias } => weight
                .iter()
                .zip(bias)
                .map(|(row, b)| row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect(),
            Layer::Relu => h.iter().map(|v| v.max(0.0)).collect(),
            Layer::Tanh => h.iter().map(|v| v.tanh()).collect(),
        };
    }
    h
}

/// Output `k` and its gradient with respect to the input, by backprop.
pub fn forward_grad(net: &Network, input: &[f64], k: usize) -> (f64, Vec<f64>) {
    let mut acts = vec![input.to_vec()];
    for layer in net.layers() {
        let h = acts.last().unwrap();
        let next = match layer {
            Layer::Affine { weight, bias } => weight
                .iter()
                .zip(bias)
                .map(|(row, b)| row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + b)
                .collect(),
            Layer::Relu => h.iter().map(|v| v.max(0.0)).collect(),
            Layer::Tanh => h.iter().map(|v| v.tanh()).collect(),
        };
        acts.push(next);
    }
    let out = acts.last().unwrap()[k];
    let mut grad = vec![0.0; acts.last().unwrap().len()];
    grad[k] = 1.0;
    for (layer, pre) in net.layers().iter().zip(&acts).rev() {
        grad = match layer {
            Layer::Affine { weight, .. } => {
                let mut g = vec![0.0; pre.len()];
                for (gi, row) in grad.iter().zip(weight) {
                    for (gj, w) in g.iter_mut().zip(row) {
                        *gj += gi * w;
                    }
                }
                g
            }
            Layer::Relu => grad
                .iter()
                .zip(pre)
                .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
                .collect(),
            Layer::Tanh => grad
                .iter()
                .zip(pre)
                .map(|(g, z)| g * (1.0 - z.tanh().powi(2)))
                .collect(),
        };
    }
    (out, grad)
}

/// Owner feature of every input, from the problem's groups or the identity.
pub fn owners(problem: &AttributionProblem) -> Vec<usize> {
    let n = problem.network().input_dim();
    match problem.groups() {
        Some(g) => (0..n).map(|j| g.owner(j)).collect(),
        None => (0..n).collect(),
    }
}

fn lift(problem: &AttributionProblem, owner: &[usize], mu: &[f64], z: &[f64]) -> Vec<f64> {
    let x = problem.explicand();
    (0..x.len())
        .map(|j| mu[owner[j]] * x[j] + (1.0 - mu[owner[j]]) * z[j])
        .collect()
}

/// Relaxed value function, averaged over the background.
pub fn value(problem: &AttributionProblem, mu: &[f64]) -> f64 {
    let owner = owners(problem);
    let bg = problem.background();
    let k = problem.target();
    bg.iter()
        .map(|z| forward(problem.network(), &lift(problem, &owner, mu, z))[k])
        .sum::<f64>()
        / bg.len() as f64
}

/// Gradient of the relaxed value function with respect to the mask.
pub fn value_grad(problem: &AttributionProblem, mu: &[f64]) -> Vec<f64> {
    let owner = owners(problem);
    let bg = problem.background();
    let x = problem.explicand();
    let mut out = vec![0.0; problem.num_features()];
    for z in bg {
        let (_, g) = forward_grad(problem.network(), &lift(problem, &owner, mu, z), problem.target());
        for j in 0..x.len() {
            out[owner[j]] += g[j] * (x[j] - z[j]);
        }
    }
    out.iter().map(|v| v / bg.len() as f64).collect()
}

pub fn bits_to_reals(code: usize, g: usize) -> Vec<f64> {
    (0..g).map(|i| ((code >> i) & 1) as f64).collect()
}

/// Subset-form Shapley values from a full table of coalition values.
pub fn reference_shap(problem: &AttributionProblem) -> Vec<f64> {
    let g = problem.num_features();
    let table: Vec<f64> = (0..1usize << g).map(|c| value(problem, &bits_to_reals(c, g))).collect();
    // w(k) = k! (g - k - 1)! / g!
    let fact = |n: usize| (1..=n).fold(1.0_f64, |a, t| a * t as f64);
    let w: Vec<f64> = (0..g).map(|k| fact(k) * fact(g - k - 1) / fact(g)).collect();
    let mut phi = vec![0.0; g];
    for (i, p) in phi.iter_mut().enumerate() {
        for c in 0..1usize << g {
            if c >> i & 1 == 0 {
                *p += w[c.count_ones() as usize] * (table[c | 1 << i] - table[c]);
            }
        }
    }
    phi
}

/// Average marginal contribution over every ordering of the features.
pub fn permutation_shap(problem: &AttributionProblem) -> Vec<f64> {
    let g = problem.num_features();
    let mut perm: Vec<usize> = (0..g).collect();
    let mut phi = vec![0.0; g];
    let mut count = 0.0;
    loop {
        let mut mu = vec![0.0; g];
        let mut prev = value(problem, &mu);
        for &i in &perm {
            mu[i] = 1.0;
            let cur = value(problem, &mu);
            phi[i] += cur - prev;
            prev = cur;
        }
        count += 1.0;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    phi.iter().map(|p| p / count).collect()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Uniform Boolean mask inside a branch.
pub fn sample_mask(rng: &mut StdRng, branch: &Branch) -> Mask {
    let bits = branch
        .mask_lb()
        .iter()
        .zip(branch.mask_ub())
        .map(|(&l, &u)| if l == u { l } else { rng.random_bool(0.5) })
        .collect();
    Mask::new(bits)
}

pub fn groups_of(sets: Vec<Vec<usize>>, n: usize) -> Groups {
    Groups::new(sets, n).expect("valid groups")
}

/// Tracks per-feature gaps across iterations and counts any that widen.
#[derive(Debug, Default)]
pub struct GapTracker {
    prev: Option<Vec<f64>>,
    pub checks: usize,
    pub widened: usize,
}

impl GapTracker {
    /// Forgets the previous iterate; call before tracking a new run.
    pub fn restart(&mut self) {
        self.prev = None;
    }

    pub fn observe(&mut self, engine: &Engine<'_>) {
        let gaps = engine.state().gaps();
        if let Some(prev) = &self.prev {
            for (now, before) in gaps.iter().zip(prev) {
                self.checks += 1;
                if now > before {
                    self.widened += 1;
                }
            }
        }
        self.prev = Some(gaps);
    }
}
