//! On an affine model the linear bounds are exact, so the search finishes at
//! the root and every feature gets `w_i (x_i - mean z_i)`.

use shapley_bounds::{engine, AttributionProblem, EngineConfig, Layer, Network, StopCriteria, ValueKind};

fn main() -> shapley_bounds::Result<()> {
    let w = vec![0.8, -1.2, 0.5, 2.0];
    let net = Network::new(vec![Layer::affine(vec![w.clone()], vec![0.3])], 4, 1)?;
    let x = vec![1.0, 0.5, -2.0, 1.0];
    let background = vec![vec![0.0, 0.0, 0.0, 0.0], vec![1.0, 1.0, -1.0, 0.5]];
    let problem = AttributionProblem::new(net, x.clone(), background.clone(), ValueKind::Marginal, 0, None)?;

    let config = EngineConfig {
        stop: StopCriteria::exhaustive(),
        ..EngineConfig::default()
    };
    let out = engine::run(&problem, config)?;
    println!(
        "status {} after {} iteration(s)",
        out.status.as_str(),
        out.bounds.iteration
    );
    for i in 0..4 {
        let mean = (background[0][i] + background[1][i]) / 2.0;
        println!(
            "phi_{} in [{:+.6}, {:+.6}]   w_i (x_i - mean z_i) = {:+.6}",
            i + 1,
            out.bounds.lb_phi[i],
            out.bounds.ub_phi[i],
            w[i] * (x[i] - mean)
        );
    }
    Ok(())
}
