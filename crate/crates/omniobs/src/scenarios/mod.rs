//! Closed-loop swarm case studies built on the observer network.
//!
//! Two scenarios: [`herding`], where identity-broadcasting leaders gather
//! single-integrator followers into their convex hull, and [`bee`], where
//! circling leaders recruit double-integrator followers in proportion to
//! their circling speeds.
//!
//! Both follow the same discipline: every behavioral decision (who counts as
//! a leader, which leader to follow) is recomputed from each agent's *own
//! estimate* of the joint state at a fixed decision cadence and held constant
//! in between, while the continuous control laws consume live estimates.
//! No agent ever reads another agent's true state.

mod bee;
mod herding;
mod hull;

pub use bee::{
    bee_assign, bee_classify, bee_follower_accel, circling_leader_accel, largest_remainder_quotas,
    run_bee, BeeConfig, BeeGains, BeeLeader, BeeOutcome,
};
pub use herding::{
    herding_follower_decision, herding_follower_velocity, run_herding, HerdingConfig,
    HerdingOutcome, PiecewiseVelocity,
};
pub use hull::{convex_hull_2d, dist_to_hull, point_in_convex_hull};

use nalgebra::DVector;
use thiserror::Error;

use crate::numerics::IntegrateError;
use crate::scalar::{cv, to_f64, Scalar};
use crate::sim::{CoupledObserver, SimError};
use crate::synthesis::SynthesisError;

/// How often decision logic reruns, in simulated seconds.
pub const DECISION_INTERVAL: f64 = 0.1;

/// Trace files keep every `TRACE_STRIDE`-th integrator step (plus the last).
pub const TRACE_STRIDE: usize = 10;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("bad scenario config: {0}")]
    BadConfig(String),
    #[error("no candidate leader to assign followers to")]
    NoLeaders,
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Downsampled closed-loop history shared by both scenarios.
pub struct Trace<T: Scalar> {
    pub times: Vec<T>,
    /// True plant state at each kept time.
    pub states: Vec<DVector<T>>,
    /// Per-node estimation error norms at each kept time.
    pub est_errors: Vec<Vec<T>>,
    /// Per-node adaptive gains `(gamma, gamma_s)` at each kept time.
    pub gains: Vec<Vec<(T, T)>>,
}

impl<T: Scalar> Trace<T> {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            est_errors: Vec::new(),
            gains: Vec::new(),
        }
    }

    fn push(&mut self, sys: &CoupledObserver<T>, t: T, s: &DVector<T>) {
        let x = sys.plant_state(s);
        let n_nodes = sys.design().n_agents();
        self.times.push(t);
        self.est_errors
            .push((0..n_nodes).map(|i| (sys.estimate(s, i) - &x).norm()).collect());
        self.gains.push((0..n_nodes).map(|i| sys.gains(s, i)).collect());
        self.states.push(x);
    }
}

/// Validates and converts a decision cadence into a whole number of steps.
fn decision_steps<T: Scalar>(dt: T, decision_dt: T) -> Result<usize, ScenarioError> {
    if !(dt > T::zero()) || !(decision_dt >= dt) {
        return Err(ScenarioError::BadConfig(
            "need 0 < dt <= decision_dt".into(),
        ));
    }
    let ratio = to_f64(decision_dt) / to_f64(dt);
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-6 {
        return Err(ScenarioError::BadConfig(
            "decision_dt must be a whole number of integrator steps".into(),
        ));
    }
    Ok(steps as usize)
}

fn step_count<T: Scalar>(t_end: T, dt: T) -> Result<usize, ScenarioError> {
    if !(t_end > dt) {
        return Err(ScenarioError::BadConfig("t_end must exceed dt".into()));
    }
    Ok(to_f64((t_end / dt).round()) as usize)
}

fn finite_guard<T: Scalar>(s: &DVector<T>, t: T) -> Result<(), ScenarioError> {
    if s.iter().any(|v| !v.is_finite()) {
        return Err(ScenarioError::Integrate(IntegrateError::NonFinite {
            t: to_f64(t),
        }));
    }
    Ok(())
}

/// 2D anticlockwise quarter-turn.
fn rot90<T: Scalar>(v: [T; 2]) -> [T; 2] {
    [-v[1], v[0]]
}

fn norm2<T: Scalar>(v: [T; 2]) -> T {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Unit vector along `v`, or `(1, 0)` when `v` is numerically zero.
fn unit_or_default<T: Scalar>(v: [T; 2]) -> [T; 2] {
    let n = norm2(v);
    if n < cv(1e-9) {
        [T::one(), T::zero()]
    } else {
        [v[0] / n, v[1] / n]
    }
}
