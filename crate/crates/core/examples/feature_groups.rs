//! Attribute to groups of inputs (for example superpixels) instead of single
//! inputs. Each group is one player; its members are masked together.

use shapley_bounds::{
    engine, oracle, AttributionProblem, EngineConfig, Groups, Layer, Network, StopCriteria, ValueKind,
};

fn main() -> shapley_bounds::Result<()> {
    // 3x3 "image" fed to a tiny ReLU net
    let n = 9;
    let w1: Vec<Vec<f64>> = (0..4)
        .map(|u| (0..n).map(|j| (((u * 5 + j * 3) % 7) as f64 - 3.0) / 4.0).collect())
        .collect();
    let net = Network::new(
        vec![
            Layer::affine(w1, vec![0.1, -0.2, 0.0, 0.3]),
            Layer::Relu,
            Layer::affine(vec![vec![1.0, -0.5, 0.8, 0.4]], vec![0.0]),
        ],
        n,
        1,
    )?;
    let image: Vec<f64> = (0..n).map(|j| j as f64 / 8.0).collect();
    let blank = vec![0.0; n];

    // rows of the image as groups (0-based input indices)
    let groups = Groups::new(vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]], n)?;
    let problem = AttributionProblem::new(net, image, vec![blank], ValueKind::Baseline, 0, Some(groups))?;

    let config = EngineConfig {
        stop: StopCriteria::exhaustive(),
        ..EngineConfig::default()
    };
    let out = engine::run(&problem, config)?;
    let exact = oracle::exact_shap(&problem)?;
    for g in 0..problem.num_features() {
        println!(
            "row {}: [{:+.6}, {:+.6}]  exact {:+.6}",
            g + 1,
            out.bounds.lb_phi[g],
            out.bounds.ub_phi[g],
            exact.phi[g]
        );
    }
    Ok(())
}
