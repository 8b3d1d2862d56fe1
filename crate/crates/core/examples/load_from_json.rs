//! Load a network from its JSON document and write a result the way the CLI
//! does.

use std::time::Instant;

use shapley_bounds::formats::{to_json_string, ConfigEcho, RunResult};
use shapley_bounds::{engine, AttributionProblem, EngineConfig, Network, StopCriteria};

const NETWORK: &str = r#"{
  "input_dim": 3,
  "output_dim": 2,
  "layers": [
    {"type": "affine", "weight": [[0.5, -1.0, 0.3], [1.2, 0.4, -0.7]], "bias": [0.0, 0.1]},
    {"type": "tanh"},
    {"type": "affine", "weight": [[1.0, 0.5], [-0.5, 1.0]], "bias": [0.0, 0.0]}
  ]
}"#;

fn main() -> shapley_bounds::Result<()> {
    let net = Network::from_json(NETWORK)?;
    let problem = AttributionProblem::baseline(net, vec![1.0, -0.5, 2.0], vec![0.0, 0.0, 0.0], 1)?;
    let config = EngineConfig {
        stop: StopCriteria {
            hr_fraction: Some(0.01),
            ..StopCriteria::default()
        },
        ..EngineConfig::default()
    };
    let started = Instant::now();
    let out = engine::run(&problem, config.clone())?;
    let echo = ConfigEcho::new(&config, problem.kind().as_str(), problem.target() + 1);
    let result = RunResult::new(&out.bounds, out.status, started.elapsed().as_secs_f64(), echo);
    println!("{}", to_json_string(&result));
    Ok(())
}
