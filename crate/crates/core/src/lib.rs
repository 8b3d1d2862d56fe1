//! Provably sound, anytime-tightening bounds on exact Shapley values of
//! feedforward ReLU/tanh networks.
//!
//! The search partitions the power set of features into branches of
//! coalitions, bounds the value function on each branch with interval or
//! linear bound propagation over a relaxed mask box, and turns those value
//! bounds into bounds on every feature's Shapley value at once. Splitting
//! branches tightens the bounds until every branch is resolved, at which
//! point the bounds meet at the exact values.
//!
//! ```
//! use shapley_bounds::{engine, AttributionProblem, EngineConfig, Layer, Network, StopCriteria};
//!
//! let net = Network::new(
//!     vec![
//!         Layer::affine(vec![vec![1.0, -1.0], vec![0.5, 1.0]], vec![0.0, -0.25]),
//!         Layer::Relu,
//!         Layer::affine(vec![vec![1.0, 2.0]], vec![0.0]),
//!     ],
//!     2,
//!     1,
//! )?;
//! let problem = AttributionProblem::baseline(net, vec![1.0, 1.0], vec![0.0, 0.0], 0)?;
//! let config = EngineConfig { stop: StopCriteria::exhaustive(), ..EngineConfig::default() };
//! let out = engine::run(&problem, config)?;
//! assert!((out.bounds.ub_phi[0] - out.bounds.lb_phi[0]).abs() < 1e-9);
//! # Ok::<(), shapley_bounds::Error>(())
//! ```

pub mod cli;
pub mod coalition;
pub mod engine;
pub mod error;
pub mod formats;
pub mod network;
pub mod oracle;
pub mod propagate;
pub mod valuefn;

pub use coalition::{Branch, PartitionQueue, PrunedAccumulator, SelectStrategy};
pub use engine::{BoundsState, Engine, EngineConfig, RunOutput, SplitStrategy, Status, StopCriteria};
pub use error::{Error, Result};
pub use network::{Activation, Layer, Network};
pub use oracle::{exact_shap, ExactShapResult};
pub use propagate::{Interval, IntervalBox, LinearBounds, Propagation};
pub use valuefn::{AttributionProblem, Groups, Mask, ValueKind};
