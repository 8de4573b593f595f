//! Energy-efficiency guaranteed joint congestion control and resource
//! optimization for a slotted downlink H-CRAN.
//!
//! The crate is generic over the floating-point type; the `*F64` / `*F32`
//! aliases below pin the common instantiations.

pub mod controller;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod queues;
pub mod scalar;
pub mod stochastic;

pub use harness::{run, sweep, RunMetrics, RunOutput, RunSpec, Scheme, SweepAxis};
pub use model::{ChannelState, ControlDecision, EeQueueTimebase, ModelError, NetworkConfig, Ue, UtilityKind};
pub use queues::QueueState;
pub use scalar::Scalar;
pub use stochastic::{ArrivalKind, ArrivalSpec, ChannelModel, ChannelSpec, SimStreams, Topology};

pub type NetworkConfigF64 = NetworkConfig<f64>;
pub type NetworkConfigF32 = NetworkConfig<f32>;
pub type ChannelStateF64 = ChannelState<f64>;
pub type ChannelStateF32 = ChannelState<f32>;
pub type ControlDecisionF64 = ControlDecision<f64>;
pub type ControlDecisionF32 = ControlDecision<f32>;
pub type QueueStateF64 = QueueState<f64>;
pub type QueueStateF32 = QueueState<f32>;
