//! Deterministic simulator for grid-clustered wireless sensor networks with
//! mobile sinks and ant-colony multi-hop routing.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). Battery
//! accounting is done in integer femtojoules so energy ledgers balance
//! exactly.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aco;
pub mod clustering;
pub mod config;
pub mod energy;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod mobility;
pub mod radio;
pub mod scalar;
pub mod sim;
pub mod topology;

pub use config::{load_config, Protocol, ScenarioConfig};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use scalar::Scalar;

/// Double precision instantiations.
pub type Simulation = sim::Simulation<f64>;
pub type RoutingGraph = aco::RoutingGraph<f64>;
pub type RoutePath = aco::RoutePath<f64>;
pub type AcoParams = aco::AcoParams<f64>;
pub type RadioParams = energy::RadioParams<f64>;
pub type PropagationParams = radio::PropagationParams<f64>;
pub type RadioModel = radio::RadioModel<f64>;
pub type NodeState = topology::NodeState<f64>;
pub type Position = topology::Position<f64>;

/// Single precision instantiations.
pub mod f32 {
    pub type Simulation = crate::sim::Simulation<f32>;
    pub type RoutingGraph = crate::aco::RoutingGraph<f32>;
    pub type RoutePath = crate::aco::RoutePath<f32>;
    pub type AcoParams = crate::aco::AcoParams<f32>;
    pub type RadioParams = crate::energy::RadioParams<f32>;
    pub type PropagationParams = crate::radio::PropagationParams<f32>;
    pub type Position = crate::topology::Position<f32>;
}

/// Runs one scenario in double precision.
pub fn run_simulation(config: &ScenarioConfig, seed: u64) -> Result<MetricsReport> {
    sim::run_simulation::<f64>(config, seed)
}
