//! Drive the engine one batch at a time and watch the bounds tighten.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use shapley_bounds::{AttributionProblem, Engine, EngineConfig, Layer, Network, StopCriteria, ValueKind};

fn random_layer(rng: &mut StdRng, rows: usize, cols: usize) -> Layer {
    let s = 1.5 / (cols as f64).sqrt();
    Layer::affine(
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.random_range(-s..s)).collect())
            .collect(),
        (0..rows).map(|_| rng.random_range(-0.3..0.3)).collect(),
    )
}

fn main() -> shapley_bounds::Result<()> {
    let mut rng = StdRng::seed_from_u64(7);
    let g = 16;
    let net = Network::new(
        vec![
            random_layer(&mut rng, 12, g),
            Layer::Relu,
            random_layer(&mut rng, 1, 12),
        ],
        g,
        1,
    )?;
    let x: Vec<f64> = (0..g).map(|_| rng.random_range(-1.0..1.0)).collect();
    let background: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..g).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let problem = AttributionProblem::new(net, x, background, ValueKind::Marginal, 0, None)?;

    let config = EngineConfig {
        batch_size: 16,
        stop: StopCriteria {
            delta: Some(1e-2),
            ..StopCriteria::default()
        },
        ..EngineConfig::default()
    };
    let mut engine = Engine::new(&problem, config)?;
    println!("{:>9} {:>8} {:>8} {:>12}", "iteration", "active", "pruned", "max gap");
    let status = loop {
        let st = engine.state();
        if st.iteration == 1 || st.iteration % 50 == 0 {
            println!(
                "{:>9} {:>8} {:>8} {:>12.3e}",
                st.iteration,
                engine.queue().len(),
                st.branches_pruned,
                st.max_gap()
            );
        }
        if let Some(status) = engine.stop_status() {
            break status;
        }
        engine.step()?;
    };
    let st = engine.state();
    println!(
        "stopped: {} at iteration {}, max gap {:.3e}",
        status.as_str(),
        st.iteration,
        st.max_gap()
    );
    Ok(())
}
