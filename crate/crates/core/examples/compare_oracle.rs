//! Run the search to exhaustion and compare with brute-force enumeration.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use shapley_bounds::oracle::check_engine;
use shapley_bounds::{AttributionProblem, EngineConfig, Layer, Network, StopCriteria, ValueKind};

fn main() -> shapley_bounds::Result<()> {
    let mut rng = StdRng::seed_from_u64(3);
    let g = 10;
    let mut dense = |rows: usize, cols: usize| {
        Layer::affine(
            (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(-0.6..0.6)).collect())
                .collect(),
            (0..rows).map(|_| rng.random_range(-0.2..0.2)).collect(),
        )
    };
    let layers = vec![dense(8, g), Layer::Tanh, dense(8, 8), Layer::Relu, dense(1, 8)];
    let net = Network::new(layers, g, 1)?;
    let x: Vec<f64> = (0..g).map(|i| (i as f64 * 0.7).sin()).collect();
    let background: Vec<Vec<f64>> = (0..5)
        .map(|r| (0..g).map(|i| ((r * g + i) as f64).cos()).collect())
        .collect();
    let problem = AttributionProblem::new(net, x, background, ValueKind::Marginal, 0, None)?;

    let config = EngineConfig {
        stop: StopCriteria::exhaustive(),
        ..EngineConfig::default()
    };
    let (report, bounds, status) = check_engine(&problem, config)?;
    println!("engine: {} after {} iterations", status.as_str(), bounds.iteration);
    for (i, exact) in report.exact.iter().enumerate() {
        println!(
            "phi_{:<2} exact {:+.10}  bounds [{:+.10}, {:+.10}]",
            i + 1,
            exact,
            bounds.lb_phi[i],
            bounds.ub_phi[i]
        );
    }
    println!(
        "contained: {}, max |error| {:.2e}",
        report.contained, report.max_abs_error
    );
    Ok(())
}
