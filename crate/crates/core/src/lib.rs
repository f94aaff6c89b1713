//! Full-duplex cell-free massive MIMO with capacity-limited, quantized
//! fronthaul: network drops, closed-form SE lower bounds, Monte-Carlo
//! oracles, the power-consumption model and SCA-based WSEE maximization.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod channel;
pub mod config;
pub mod experiment;
pub mod fronthaul;
pub mod montecarlo;
pub mod power;
pub mod quantizer;
pub mod rng;
pub mod sca;
pub mod scenario;
pub mod se;

pub use alloc::{baseline_alloc, Baseline, PowerAllocation};
pub use config::SystemConfig;
pub use fronthaul::ServiceMap;
pub use quantizer::QuantizerParams;
pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unsupported quantizer resolution: {0} bits (supported 1..=8)")]
    UnsupportedBits(u32),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("scenario invariant violated: {0}")]
    Scenario(String),
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
    #[error("{side} UE {ue} consumes zero power")]
    ZeroPower { side: &'static str, ue: usize },
    #[error("QoS targets unattainable: best minimum SINR margin {margin:.3e}")]
    QosInfeasible { margin: f64 },
    #[error("invalid moment request: {0}")]
    Moment(String),
    #[error("solver error: {0}")]
    Solver(#[from] fdcf_solver::SolverError),
}
