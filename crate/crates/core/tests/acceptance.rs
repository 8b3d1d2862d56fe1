//! Acceptance suite. Run with `cargo test --test acceptance`; it prints one
//! PASS/FAIL line per criterion and exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;

use common::{Act, GapTracker};
use shapley_bounds::coalition::{child_lambdas, sum_coalition_weights};
use shapley_bounds::propagate::{gradient_interval, ibp_value_bounds, lbp_value_bounds};
use shapley_bounds::{
    AttributionProblem, Branch, Engine, EngineConfig, Interval, IntervalBox, Layer, Network, Propagation,
    SelectStrategy, SplitStrategy, Status, StopCriteria, ValueKind,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

const SPLITS: [SplitStrategy; 4] = [
    SplitStrategy::Smears,
    SplitStrategy::InOrder,
    SplitStrategy::StrongBranching,
    SplitStrategy::SmartBranchingIbp,
];

fn exhaustive(split: SplitStrategy, select: SelectStrategy, batch: usize) -> EngineConfig {
    EngineConfig {
        batch_size: batch,
        select,
        split,
        stop: StopCriteria::exhaustive(),
        ..EngineConfig::default()
    }
}

/// Steps the engine to its stop criterion, feeding every iterate to `gaps`.
fn drive(engine: &mut Engine<'_>, gaps: &mut GapTracker) -> Status {
    gaps.restart();
    gaps.observe(engine);
    loop {
        if let Some(status) = engine.stop_status() {
            return status;
        }
        engine.step().expect("engine step");
        gaps.observe(engine);
    }
}

fn midpoints(engine: &Engine<'_>) -> Vec<f64> {
    let s = engine.state();
    s.lb_phi.iter().zip(&s.ub_phi).map(|(l, u)| 0.5 * (l + u)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Converged {
    phi: Vec<f64>,
    problem: AttributionProblem,
}

fn oracle_equivalence(gaps: &mut GapTracker, converged: &mut Vec<Converged>) -> Outcome {
    let started = Instant::now();
    let mut worst_err = 0.0_f64;
    let mut worst_width = 0.0_f64;
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        let mut rng = common::rng(1000 + seed);
        let g = 4 + (seed as usize % 9);
        let problem = common::random_problem(&mut rng, g, 10, Act::Relu);
        let select = if seed % 2 == 0 {
            SelectStrategy::MaxDiam
        } else {
            SelectStrategy::MinDiam
        };
        let config = exhaustive(SPLITS[seed as usize % 4], select, [1, 8, 64][seed as usize % 3]);
        let mut engine = Engine::new(&problem, config).expect("engine");
        let status = drive(&mut engine, gaps);
        let exact = common::reference_shap(&problem);
        let st = engine.state();
        let err = max_abs_diff(&st.lb_phi, &exact).max(max_abs_diff(&st.ub_phi, &exact));
        let width = st.max_gap();
        worst_err = worst_err.max(err);
        worst_width = worst_width.max(width);
        if status != Status::ConvergedExact || err > 1e-6 || width > 1e-9 {
            failures.push(format!(
                "seed {seed}: status {} err {err:.2e} width {width:.2e}",
                status.as_str()
            ));
        }
        let phi = midpoints(&engine);
        converged.push(Converged {
            phi,
            problem: problem.clone(),
        });
    }
    let elapsed = started.elapsed();
    let in_time = elapsed < Duration::from_secs(300);
    Outcome::new(
        failures.is_empty() && in_time,
        format!(
            "50 nets, max |phi - oracle| {worst_err:.2e}, max width {worst_width:.2e}, {:.1}s{}",
            elapsed.as_secs_f64(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join("; "))
            }
        ),
    )
}

fn linear_exactness(gaps: &mut GapTracker) -> Outcome {
    let mut worst_err = 0.0_f64;
    let mut worst_width = 0.0_f64;
    let mut most_steps = 0.0_f64;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let mut rng = common::rng(2000 + seed);
        let g = rng.random_range(2..=16);
        let depth = rng.random_range(1..=3);
        let n_out = rng.random_range(1..=3);
        let target = rng.random_range(0..n_out);
        let (net, w) = common::random_affine(&mut rng, g, depth, n_out, target);
        let x = common::random_rows(&mut rng, 1, g).remove(0);
        let rows = rng.random_range(1..=10);
        let bg = common::random_rows(&mut rng, rows, g);
        let mean: Vec<f64> = (0..g)
            .map(|i| bg.iter().map(|z| z[i]).sum::<f64>() / bg.len() as f64)
            .collect();
        let expected: Vec<f64> = (0..g).map(|i| w[i] * (x[i] - mean[i])).collect();
        let problem = AttributionProblem::new(net, x, bg, ValueKind::Marginal, target, None).unwrap();
        let config = EngineConfig {
            propagation: Propagation::Lbp,
            ..exhaustive(SPLITS[seed as usize % 4], SelectStrategy::MaxDiam, 1)
        };
        let mut engine = Engine::new(&problem, config).expect("engine");
        let status = drive(&mut engine, gaps);
        let st = engine.state();
        let steps = st.iteration - 1;
        let err = max_abs_diff(&st.lb_phi, &expected).max(max_abs_diff(&st.ub_phi, &expected));
        worst_err = worst_err.max(err);
        worst_width = worst_width.max(st.max_gap());
        most_steps = most_steps.max(steps as f64 / g as f64);
        if status != Status::ConvergedExact || st.max_gap() > 1e-9 || err > 1e-9 || steps > g as u64 {
            failures.push(format!(
                "seed {seed}: status {} steps {steps} err {err:.2e}",
                status.as_str()
            ));
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "20 affine nets, max width {worst_width:.2e}, max error {worst_err:.2e}, max steps/g {most_steps:.2}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; {}", failures.join("; "))
            }
        ),
    )
}

fn binom(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |a, t| a * (n - t) as u128 / (t + 1) as u128)
}

fn lambda_identities() -> Outcome {
    // closed form against enumeration; the ground set excludes the attributed
    // feature, so n features leave n - 1 to place in In, Ex or free
    let mut worst_rel = 0.0_f64;
    let mut cases = 0usize;
    for n in 1..=15usize {
        let w: Vec<f64> = (0..n).map(|k| 1.0 / (n as f64 * binom(n - 1, k) as f64)).collect();
        for s in 0..n {
            let free = n - 1 - s;
            for r in 0..=s {
                let brute: f64 = (0..1usize << free).map(|c| w[r + c.count_ones() as usize]).sum();
                let closed = sum_coalition_weights(r, s).unwrap();
                worst_rel = worst_rel.max((closed - brute).abs() / brute);
                cases += 1;
            }
        }
    }
    let mut worst_child = 0.0_f64;
    for s in 0..=60usize {
        for r in 0..=s {
            let lambda = sum_coalition_weights(r, s).unwrap();
            let (a, b) = child_lambdas(lambda, r, s).unwrap();
            worst_child = worst_child.max(((a + b) - lambda).abs() / lambda);
        }
    }
    // random splitting at g = 30
    let mut rng = common::rng(3000);
    let g = 30;
    let mut active = vec![Branch::root(g, Interval::point(0.0))];
    let mut leaves = Vec::new();
    let mut worst_closed = 0.0_f64;
    for _ in 0..10_000 {
        let idx = rng.random_range(0..active.len());
        let branch = active.swap_remove(idx);
        let free: Vec<usize> = branch.free_features().collect();
        let j = free[rng.random_range(0..free.len())];
        let (a, b) = branch.split(j).unwrap();
        for child in [a, b] {
            let closed = sum_coalition_weights(child.r(), child.s()).unwrap();
            worst_closed = worst_closed.max((child.lambda() - closed).abs() / closed);
            if child.num_free() == 0 {
                leaves.push(child);
            } else {
                active.push(child);
            }
        }
    }
    let total: f64 = active.iter().chain(&leaves).map(|b| b.lambda()).sum();
    let conservation = (total - 1.0).abs();
    Outcome::new(
        worst_rel <= 1e-12 && worst_child <= 1e-15 && conservation <= 1e-9 && worst_closed <= 1e-9,
        format!(
            "{cases} (r, s, n) cases, max rel err {worst_rel:.2e}; child sum rel err {worst_child:.2e}; \
             |sum lambda - 1| after 1e4 splits {conservation:.2e}; recursion vs closed form {worst_closed:.2e}"
        ),
    )
}

fn soundness_sampling(gaps: &mut GapTracker) -> Outcome {
    let mut value_violations = 0usize;
    let mut samples = 0usize;
    let mut oracle_misses = 0usize;
    let mut oracle_checks = 0usize;
    let mut largest_g = 0;
    for idx in 0..20usize {
        let mut rng = common::rng(4000 + idx as u64);
        let g = if idx < 10 { 4 + idx % 9 } else { 13 + (idx * 7) % 18 };
        largest_g = largest_g.max(g);
        let act = if idx % 3 == 2 { Act::Tanh } else { Act::Relu };
        let problem = common::random_problem(&mut rng, g, 4, act);
        let exact = (g <= 12).then(|| common::reference_shap(&problem));
        let config = EngineConfig {
            batch_size: 2,
            split: SPLITS[idx % 4],
            propagation: if idx % 2 == 0 {
                Propagation::Lbp
            } else {
                Propagation::Ibp
            },
            stop: StopCriteria {
                max_iterations: Some(40),
                ..StopCriteria::default()
            },
            ..EngineConfig::default()
        };
        let mut engine = Engine::new(&problem, config).expect("engine");
        gaps.restart();
        gaps.observe(&engine);
        loop {
            let st = engine.state();
            if let Some(phi) = &exact {
                for (i, &exact_i) in phi.iter().enumerate() {
                    oracle_checks += 1;
                    if !st.interval(i).contains(exact_i, 1e-9) {
                        oracle_misses += 1;
                    }
                }
            }
            if st.iteration % 10 == 0 {
                for branch in engine.queue().branches() {
                    for _ in 0..1000 {
                        let mask = common::sample_mask(&mut rng, branch);
                        let v = common::value(&problem, &mask.as_reals());
                        samples += 1;
                        if !branch.value_bounds.contains(v, 1e-9) {
                            value_violations += 1;
                        }
                    }
                }
            }
            if engine.stop_status().is_some() {
                break;
            }
            engine.step().expect("engine step");
            gaps.observe(&engine);
        }
    }
    Outcome::new(
        value_violations == 0 && oracle_misses == 0 && samples > 0,
        format!(
            "20 nets up to g = {largest_g}: {value_violations} violations in {samples} sampled coalitions; \
             oracle outside interval {oracle_misses} of {oracle_checks} checks"
        ),
    )
}

fn random_sub_box(rng: &mut rand::rngs::StdRng, outer: &IntervalBox) -> IntervalBox {
    let mut lb = Vec::with_capacity(outer.len());
    let mut ub = Vec::with_capacity(outer.len());
    for iv in outer.intervals() {
        let (a, b) = match rng.random_range(0..4) {
            0 => (iv.lb, iv.lb),
            1 => (iv.ub, iv.ub),
            _ => {
                let a = rng.random_range(iv.lb..=iv.ub);
                let b = rng.random_range(iv.lb..=iv.ub);
                (a.min(b), a.max(b))
            }
        };
        lb.push(a);
        ub.push(b);
    }
    IntervalBox::new(&lb, &ub).unwrap()
}

fn dominance_and_isotonicity() -> Outcome {
    let mut lbp_escapes = 0usize;
    let mut iso_escapes = 0usize;
    let mut lbp_tighter = 0usize;
    let mut pairs = 0usize;
    for seed in 0..50u64 {
        let mut rng = common::rng(6000 + seed);
        let g = rng.random_range(3..=12);
        let problem = common::random_problem(&mut rng, g, 5, Act::Relu);
        for _ in 0..100 {
            let outer = random_sub_box(&mut rng, &IntervalBox::unit(g));
            let inner = random_sub_box(&mut rng, &outer);
            let ibp_outer = ibp_value_bounds(&problem, &outer).unwrap();
            let ibp_inner = ibp_value_bounds(&problem, &inner).unwrap();
            for (b, ibp) in [(&outer, ibp_outer), (&inner, ibp_inner)] {
                let lbp = lbp_value_bounds(&problem, b).unwrap();
                if !lbp.is_subset_of(&ibp, 1e-9) {
                    lbp_escapes += 1;
                }
                if lbp.width() < ibp.width() - 1e-12 {
                    lbp_tighter += 1;
                }
            }
            if !ibp_inner.is_subset_of(&ibp_outer, 1e-12) {
                iso_escapes += 1;
            }
            pairs += 1;
        }
    }
    Outcome::new(
        lbp_escapes == 0 && iso_escapes == 0,
        format!(
            "{pairs} nested box pairs: lbp outside ibp {lbp_escapes}, ibp(inner) outside ibp(outer) {iso_escapes}; \
             lbp strictly tighter on {lbp_tighter} of {} boxes",
            2 * pairs
        ),
    )
}

fn gradient_containment() -> Outcome {
    let mut misses = 0usize;
    let mut points = 0usize;
    for seed in 0..20u64 {
        let mut rng = common::rng(7000 + seed);
        let g = rng.random_range(3..=10);
        let problem = common::random_problem(&mut rng, g, 5, Act::Relu);
        let mut branches = vec![Branch::root(g, Interval::point(0.0))];
        for _ in 0..4 {
            let (mut inc, mut exc) = (Vec::new(), Vec::new());
            for i in 0..g {
                match rng.random_range(0..3) {
                    0 => inc.push(i),
                    1 => exc.push(i),
                    _ => {}
                }
            }
            branches.push(Branch::from_sets(g, &inc, &exc).unwrap());
        }
        for branch in &branches {
            let mbox = branch.mask_box();
            let grad = gradient_interval(&problem, &mbox).unwrap();
            for _ in 0..100 {
                let mu: Vec<f64> = mbox
                    .intervals()
                    .iter()
                    .map(|iv| {
                        if iv.lb == iv.ub {
                            iv.lb
                        } else {
                            rng.random_range(0.001..0.999)
                        }
                    })
                    .collect();
                let analytic = common::value_grad(&problem, &mu);
                points += 1;
                if analytic
                    .iter()
                    .zip(grad.intervals())
                    .any(|(d, iv)| !iv.contains(*d, 1e-9))
                {
                    misses += 1;
                }
            }
        }
    }
    Outcome::new(
        misses == 0,
        format!("{points} interior points over 100 branches: {misses} outside"),
    )
}

/// Two inputs through a ReLU each, summed. Feature 0 stays on the linear side
/// of its ReLU for every mask; feature 1 crosses its kink.
fn kink_fixture() -> AttributionProblem {
    let net = Network::new(
        vec![
            Layer::affine(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]),
            Layer::Relu,
            Layer::affine(vec![vec![1.0, 1.0]], vec![0.0]),
        ],
        2,
        1,
    )
    .unwrap();
    AttributionProblem::baseline(net, vec![1.0, 1.0], vec![0.0, -1.0], 0).unwrap()
}

fn single_split_scenario() -> Outcome {
    let problem = kink_fixture();
    let exact = common::reference_shap(&problem);
    let run_one = |split| {
        let config = exhaustive(split, SelectStrategy::MaxDiam, 1);
        let mut engine = Engine::new(&problem, config).unwrap();
        let root_gap = engine.state().max_gap();
        engine.step().unwrap();
        let st = engine.state().clone();
        let err = max_abs_diff(&st.lb_phi, &exact).max(max_abs_diff(&st.ub_phi, &exact));
        (root_gap, engine.is_exhausted(), st.max_gap(), err)
    };
    let (root_gap, strong_done, strong_gap, strong_err) = run_one(SplitStrategy::StrongBranching);
    let (_, order_done, order_gap, _) = run_one(SplitStrategy::InOrder);
    Outcome::new(
        root_gap > 1e-6 && strong_done && strong_gap <= 1e-9 && strong_err <= 1e-9 && !order_done && order_gap > 1e-6,
        format!(
            "root gap {root_gap:.3}; one split: strong gap {strong_gap:.2e} (error {strong_err:.2e}, exhausted {strong_done}), \
             in_order gap {order_gap:.3} (exhausted {order_done})"
        ),
    )
}

/// Synthetic credit-style table: a few standardized numeric columns and many
/// small ordinal codes, labelled by a noisy logistic rule.
fn credit_like(rng: &mut rand::rngs::StdRng, rows: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let coef: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut xs = Vec::with_capacity(rows);
    let mut ys = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x: Vec<f64> = (0..20)
            .map(|i| {
                if i < 7 {
                    let u: f64 = (0..6).map(|_| rng.random_range(-1.0..1.0)).sum();
                    u / 1.4
                } else {
                    let levels = 2 + i % 4;
                    rng.random_range(0..levels) as f64 / (levels - 1) as f64
                }
            })
            .collect();
        let logit: f64 = x.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5);
        ys.push(if logit > 0.0 { 1.0 } else { 0.0 });
        xs.push(x);
    }
    (xs, ys)
}

/// 20-8-1 ReLU classifier fitted by plain SGD on the logistic loss.
fn fit_classifier(rng: &mut rand::rngs::StdRng, xs: &[Vec<f64>], ys: &[f64]) -> Network {
    let mut w1: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..20).map(|_| rng.random_range(-0.4..0.4)).collect())
        .collect();
    let mut b1 = vec![0.0; 8];
    let mut w2: Vec<f64> = (0..8).map(|_| rng.random_range(-0.4..0.4)).collect();
    let mut b2 = 0.0;
    let lr = 0.02;
    for _ in 0..30 {
        for (x, &y) in xs.iter().zip(ys) {
            let pre: Vec<f64> = w1
                .iter()
                .zip(&b1)
                .map(|(r, b)| r.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b)
                .collect();
            let h: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
            let out = h.iter().zip(&w2).map(|(a, b)| a * b).sum::<f64>() + b2;
            let d = 1.0 / (1.0 + (-out).exp()) - y;
            for u in 0..8 {
                let dh = if pre[u] > 0.0 { d * w2[u] } else { 0.0 };
                w2[u] -= lr * d * h[u];
                b1[u] -= lr * dh;
                for (wv, xv) in w1[u].iter_mut().zip(x) {
                    *wv -= lr * dh * xv;
                }
            }
            b2 -= lr * d;
        }
    }
    Network::new(
        vec![Layer::affine(w1, b1), Layer::Relu, Layer::affine(vec![w2], vec![b2])],
        20,
        1,
    )
    .unwrap()
}

fn scale_check() -> Outcome {
    let mut rng = common::rng(9000);
    let (xs, ys) = credit_like(&mut rng, 1000);
    let net = fit_classifier(&mut rng, &xs, &ys);
    let accuracy = xs
        .iter()
        .zip(&ys)
        .filter(|(x, y)| (common::forward(&net, x)[0] > 0.0) == (**y > 0.5))
        .count() as f64
        / xs.len() as f64;
    let background: Vec<Vec<f64>> = xs[..10].to_vec();
    let mut lines = Vec::new();
    let mut pass = true;
    for explicand in xs[900..905].iter() {
        let problem = AttributionProblem::new(
            net.clone(),
            explicand.clone(),
            background.clone(),
            ValueKind::Marginal,
            0,
            None,
        )
        .unwrap();
        let config = EngineConfig {
            stop: StopCriteria {
                hr_fraction: Some(0.10),
                ..StopCriteria::default()
            },
            ..EngineConfig::default()
        };
        let started = Instant::now();
        let mut engine = Engine::new(&problem, config).unwrap();
        let status = loop {
            if let Some(status) = engine.stop_status() {
                break Some(status);
            }
            if engine.state().branches_explored >= 100_000 {
                break None;
            }
            engine.step().unwrap();
        };
        let st = engine.state();
        let hr = 0.5 * st.max_gap();
        let fx = problem.output_at_explicand().abs();
        let ok = matches!(status, Some(Status::ReachedHr | Status::ConvergedExact)) && st.branches_explored <= 100_000;
        pass &= ok;
        lines.push(format!(
            "|f(x)| {fx:.3} max HR {:.1}% after {} expansions, {:.2}s",
            100.0 * hr / fx,
            st.branches_explored,
            started.elapsed().as_secs_f64()
        ));
    }
    Outcome::new(pass, format!("train accuracy {:.2}; {}", accuracy, lines.join("; ")))
}

fn efficiency(converged: &[Converged]) -> Outcome {
    let mut worst = 0.0_f64;
    for c in converged {
        let g = c.problem.num_features();
        let total: f64 = c.phi.iter().sum();
        let target = common::value(&c.problem, &vec![1.0; g]) - common::value(&c.problem, &vec![0.0; g]);
        worst = worst.max((total - target).abs());
    }
    Outcome::new(
        worst <= 1e-6 && !converged.is_empty(),
        format!(
            "{} converged runs, max |sum phi - (v(1) - v(0))| {worst:.2e}",
            converged.len()
        ),
    )
}

fn main() {
    let mut gaps = GapTracker::default();
    let mut converged = Vec::new();
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    results.push(("1 oracle equivalence", oracle_equivalence(&mut gaps, &mut converged)));
    results.push(("2 linear exactness", linear_exactness(&mut gaps)));
    results.push(("3 lambda identities", lambda_identities()));
    results.push(("4 soundness sampling", soundness_sampling(&mut gaps)));
    results.push((
        "5 anytime monotonicity",
        Outcome::new(
            gaps.widened == 0 && gaps.checks > 0,
            format!(
                "{} gap comparisons across suites 1, 2 and 4, {} widened",
                gaps.checks, gaps.widened
            ),
        ),
    ));
    results.push(("6 lbp dominance, ibp isotonicity", dominance_and_isotonicity()));
    results.push(("7 gradient containment", gradient_containment()));
    results.push(("8 single-split exactness", single_split_scenario()));
    results.push(("9 scale check, 20 features", scale_check()));
    results.push(("10 efficiency", efficiency(&converged)));

    let mut failed = 0;
    for (name, outcome) in &results {
        println!(
            "{} {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
