//! Compare split heuristics and branch selection on one problem: branches
//! explored before every feature's gap drops below 1e-2.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use shapley_bounds::{
    engine, AttributionProblem, EngineConfig, Layer, Network, SelectStrategy, SplitStrategy, StopCriteria, ValueKind,
};

fn main() -> shapley_bounds::Result<()> {
    let mut rng = StdRng::seed_from_u64(11);
    let g = 14;
    let w1 = (0..10)
        .map(|_| (0..g).map(|_| rng.random_range(-0.8..0.8)).collect())
        .collect();
    let b1 = (0..10).map(|_| rng.random_range(-0.3..0.3)).collect();
    let w2 = vec![(0..10).map(|_| rng.random_range(-1.0..1.0)).collect()];
    let net = Network::new(
        vec![Layer::affine(w1, b1), Layer::Relu, Layer::affine(w2, vec![0.0])],
        g,
        1,
    )?;
    let x: Vec<f64> = (0..g).map(|_| rng.random_range(-1.0..1.0)).collect();
    let background: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..g).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let problem = AttributionProblem::new(net, x, background, ValueKind::Marginal, 0, None)?;

    for split in [
        SplitStrategy::InOrder,
        SplitStrategy::Smears,
        SplitStrategy::StrongBranching,
        SplitStrategy::SmartBranchingIbp,
    ] {
        for select in [SelectStrategy::MaxDiam, SelectStrategy::MinDiam] {
            let config = EngineConfig {
                batch_size: 8,
                split,
                select,
                stop: StopCriteria {
                    delta: Some(1e-2),
                    max_iterations: Some(5_000),
                    ..StopCriteria::default()
                },
                ..EngineConfig::default()
            };
            let out = engine::run(&problem, config)?;
            println!(
                "{:<20} {:<9} {:>8} branches  {:>6} iterations  max gap {:.2e}  ({})",
                split.as_str(),
                select.as_str(),
                out.bounds.branches_explored,
                out.bounds.iteration,
                out.bounds.max_gap(),
                out.status.as_str()
            );
        }
    }
    Ok(())
}
