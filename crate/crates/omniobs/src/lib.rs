//! Distributed omniscient observers for linear multi-agent systems.
//!
//! Every agent in a network runs a local estimator that reconstructs the
//! *entire* stacked state of the multi-agent system from whatever output and
//! input information is locally available, exchanging estimates with graph
//! neighbours through an adaptively weighted consensus coupling plus a
//! sliding-style injection that rejects the inputs the node cannot measure.
//!
//! The crate is organized bottom-up:
//!
//! * [`graph`]: weighted undirected graphs, Laplacians, connectivity, and the
//!   row-selection matrices used by the homogeneous design.
//! * [`numerics`]: fixed-step RK4 integration, observer pole placement,
//!   a continuous algebraic Riccati solver, orthonormal complements and
//!   column-space comparisons.
//! * [`observer`]: per-node gain assembly and the node dynamics (estimate
//!   reconstruction, consensus residuals, adaptive coupling injection,
//!   auxiliary local observers).
//! * [`synthesis`]: turns agent models plus a graph into a full observer
//!   design, for heterogeneous agents, homogeneous agents with relative
//!   measurements, and the two-layer reduced-information variant; verifies
//!   the structural constraints the designs must satisfy.
//! * [`sim`]: couples the plant and all observer nodes into one ODE and
//!   integrates it.
//! * [`nash`]: gradient-play Nash equilibrium seeking where each player
//!   descends its own cost using its omniscient estimate of the joint action.
//! * [`scenarios`]: the two swarm case studies (leader herding with identity
//!   broadcast, honeybee-style recruitment by circling speed).
//!
//! All numeric code is generic over the scalar type via [`scalar::Scalar`]
//! (`f64` and `f32` both qualify); `*64` aliases for the common types are
//! exported from the crate root.

pub mod graph;
pub mod nash;
pub mod numerics;
pub mod observer;
pub mod scalar;
pub mod scenarios;
pub mod sim;
pub mod synthesis;

pub use scalar::Scalar;

/// Double-precision graph.
pub type Graph64 = graph::Graph<f64>;
/// Single-precision graph.
pub type Graph32 = graph::Graph<f32>;
/// Double-precision trajectory.
pub type Trajectory64 = numerics::Trajectory<f64>;
/// Single-precision trajectory.
pub type Trajectory32 = numerics::Trajectory<f32>;
/// Double-precision agent model.
pub type AgentModel64 = synthesis::AgentModel<f64>;
/// Single-precision agent model.
pub type AgentModel32 = synthesis::AgentModel<f32>;
/// Double-precision observer design.
pub type ObserverDesign64 = synthesis::ObserverDesign<f64>;
/// Single-precision observer design.
pub type ObserverDesign32 = synthesis::ObserverDesign<f32>;
/// Double-precision adaptive coupling parameters.
pub type AdaptiveParams64 = observer::AdaptiveParams<f64>;
/// Single-precision adaptive coupling parameters.
pub type AdaptiveParams32 = observer::AdaptiveParams<f32>;
/// Double-precision coupled plant/observer simulation.
pub type CoupledObserver64 = sim::CoupledObserver<f64>;
/// Single-precision coupled plant/observer simulation.
pub type CoupledObserver32 = sim::CoupledObserver<f32>;
/// Double-precision gradient game.
pub type Game64 = nash::Game<f64>;
/// Single-precision gradient game.
pub type Game32 = nash::Game<f32>;
/// Double-precision affine-pseudogradient game.
pub type QuadraticGame64 = nash::QuadraticGame<f64>;
/// Single-precision affine-pseudogradient game.
pub type QuadraticGame32 = nash::QuadraticGame<f32>;
