//! Coupled plant/observer-network simulation.
//!
//! [`CoupledObserver`] packs the plant state, every node's internal state,
//! the adaptive gains, and (for the two-layer design) the auxiliary
//! estimates into one flat vector:
//!
//! ```text
//! [ x | z_1 .. z_N | g_1 gs_1 .. g_N gs_N | aux_1 .. aux_N ]
//! ```
//!
//! [`CoupledObserver::derivative`] evaluates the joint vector field given
//! the stacked plant input; [`field`] adapts it to the integrator's
//! signature by sourcing the input from a closure, which keeps open-loop
//! inputs exact at the intermediate integration stages and lets closed
//! loops feed estimates back.

use nalgebra::DVector;
use thiserror::Error;

use crate::observer::{
    aux_derivative, consensus_residual, estimate, node_derivative, AdaptiveParams, AuxNeighbor,
};
use crate::scalar::Scalar;
use crate::synthesis::{ObserverDesign, OutputSource};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("expected 1 or {expected} adaptive parameter sets, got {got}")]
    ParamCount { expected: usize, got: usize },
}

/// How the node internals start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Internal states and auxiliary estimates start at zero.
    ZeroInternal,
    /// Internal states are chosen so every estimate starts exactly on the
    /// true state (auxiliary estimates included).
    ExactEstimates,
}

pub struct CoupledObserver<T: Scalar> {
    design: ObserverDesign<T>,
    params: Vec<AdaptiveParams<T>>,
    n: usize,
    n_nodes: usize,
    aux_dim: usize,
}

impl<T: Scalar> CoupledObserver<T> {
    /// `params` holds one set per node, or a single set shared by all.
    pub fn new(
        design: ObserverDesign<T>,
        params: Vec<AdaptiveParams<T>>,
    ) -> Result<Self, SimError> {
        let n_nodes = design.n_agents();
        let params = match params.len() {
            1 => vec![params[0]; n_nodes],
            l if l == n_nodes => params,
            got => {
                return Err(SimError::ParamCount {
                    expected: n_nodes,
                    got,
                })
            }
        };
        let aux_dim = design.aux.as_ref().map_or(0, |aux| aux.a.nrows());
        Ok(Self {
            n: design.plant.state_dim(),
            n_nodes,
            aux_dim,
            design,
            params,
        })
    }

    pub fn design(&self) -> &ObserverDesign<T> {
        &self.design
    }

    pub fn params(&self) -> &[AdaptiveParams<T>] {
        &self.params
    }

    pub fn state_dim(&self) -> usize {
        self.n + self.n_nodes * self.n + 2 * self.n_nodes + self.n_nodes * self.aux_dim
    }

    fn z_off(&self, i: usize) -> usize {
        self.n + i * self.n
    }

    fn gain_off(&self, i: usize) -> usize {
        self.n + self.n_nodes * self.n + 2 * i
    }

    fn aux_off(&self, i: usize) -> usize {
        self.n + self.n_nodes * self.n + 2 * self.n_nodes + i * self.aux_dim
    }

    pub fn plant_state(&self, s: &DVector<T>) -> DVector<T> {
        s.rows(0, self.n).into_owned()
    }

    /// Adaptive gains `(gamma, gamma_s)` of node `i`.
    pub fn gains(&self, s: &DVector<T>, i: usize) -> (T, T) {
        (s[self.gain_off(i)], s[self.gain_off(i) + 1])
    }

    /// Auxiliary estimate of node `i`'s own state (two-layer design only).
    pub fn aux_estimate(&self, s: &DVector<T>, i: usize) -> Option<DVector<T>> {
        (self.aux_dim > 0).then(|| s.rows(self.aux_off(i), self.aux_dim).into_owned())
    }

    /// What node `i` feeds its observer as `y_i`.
    pub fn node_output(&self, s: &DVector<T>, i: usize) -> DVector<T> {
        match self.design.output_source {
            OutputSource::Plant => &self.design.nodes[i].c * s.rows(0, self.n),
            OutputSource::AuxEstimate => s.rows(self.aux_off(i), self.aux_dim).into_owned(),
        }
    }

    /// Node `i`'s estimate of the full stacked state.
    pub fn estimate(&self, s: &DVector<T>, i: usize) -> DVector<T> {
        let z = s.rows(self.z_off(i), self.n).into_owned();
        let y = self.node_output(s, i);
        estimate(&self.design.bar[i], &z, &y)
    }

    pub fn estimates(&self, s: &DVector<T>) -> Vec<DVector<T>> {
        (0..self.n_nodes).map(|i| self.estimate(s, i)).collect()
    }

    /// Composite initial state for plant state `x0`.
    pub fn init_state(&self, x0: &DVector<T>, mode: InitMode) -> Result<DVector<T>, SimError> {
        if x0.len() != self.n {
            return Err(SimError::Dimension(format!(
                "initial plant state has length {}, expected {}",
                x0.len(),
                self.n
            )));
        }
        let mut s = DVector::zeros(self.state_dim());
        s.rows_mut(0, self.n).copy_from(x0);
        for i in 0..self.n_nodes {
            let off = self.gain_off(i);
            s[off] = self.params[i].gamma0;
            s[off + 1] = self.params[i].gamma_s0;
        }
        if mode == InitMode::ExactEstimates {
            if self.aux_dim > 0 {
                for i in 0..self.n_nodes {
                    let (bo, bl) = self.design.plant.state_block(i);
                    let block = x0.rows(bo, bl).into_owned();
                    s.rows_mut(self.aux_off(i), self.aux_dim).copy_from(&block);
                }
            }
            for i in 0..self.n_nodes {
                // With exact auxiliary blocks, y_i(0) is C_i x0 under either
                // output source.
                let y0 = &self.design.nodes[i].c * x0;
                let z0 = x0 - &self.design.bar[i].g_bar * y0;
                s.rows_mut(self.z_off(i), self.n).copy_from(&z0);
            }
        }
        Ok(s)
    }

    /// Joint vector field at `(t, s)` under stacked plant input `u`.
    pub fn derivative(&self, _t: T, s: &DVector<T>, u: &DVector<T>) -> DVector<T> {
        let n = self.n;
        let x = s.rows(0, n);
        let mut ds = DVector::zeros(self.state_dim());

        ds.rows_mut(0, n)
            .copy_from(&(&self.design.plant.a * x + &self.design.plant.b * u));

        let estimates = self.estimates(s);
        for i in 0..self.n_nodes {
            let z = s.rows(self.z_off(i), n).into_owned();
            let y = self.node_output(s, i);
            let eps = consensus_residual(
                &self.design.graph,
                i,
                &self.design.bar[i].t_iu,
                &estimates,
            );
            let u_i = &self.design.input_maps[i] * u;
            let (gamma, gamma_s) = self.gains(s, i);
            let (dz, dg, dgs) = node_derivative(
                &self.design.bar[i],
                &self.params[i],
                &z,
                &y,
                &u_i,
                &eps,
                gamma,
                gamma_s,
            );
            ds.rows_mut(self.z_off(i), n).copy_from(&dz);
            ds[self.gain_off(i)] = dg;
            ds[self.gain_off(i) + 1] = dgs;
        }

        if let Some(aux) = &self.design.aux {
            let nb = self.aux_dim;
            let y_breves: Vec<DVector<T>> = (0..self.n_nodes)
                .map(|i| {
                    let (bo, bl) = self.design.plant.state_block(i);
                    &aux.c * x.rows(bo, bl)
                })
                .collect();
            let aux_states: Vec<DVector<T>> = (0..self.n_nodes)
                .map(|i| s.rows(self.aux_off(i), nb).into_owned())
                .collect();
            for i in 0..self.n_nodes {
                let (io, il) = self.design.plant.input_block(i);
                let u_own = u.rows(io, il).into_owned();
                let neighbors: Vec<AuxNeighbor<'_, T>> = self
                    .design
                    .graph
                    .neighbors(i)
                    .map(|(j, w)| AuxNeighbor {
                        weight: w,
                        y: &y_breves[j],
                        xhat: &aux_states[j],
                    })
                    .collect();
                let da = aux_derivative(
                    &aux.a,
                    &aux.b,
                    &aux.c,
                    &aux.m,
                    aux.c_gain,
                    aux.weights[i],
                    &y_breves[i],
                    &aux_states[i],
                    &u_own,
                    &neighbors,
                );
                ds.rows_mut(self.aux_off(i), nb).copy_from(&da);
            }
        }
        ds
    }
}

/// Adapts a [`CoupledObserver`] plus an input law to the integrator
/// signature. The law receives `(t, s)` with the full composite state, so
/// open-loop signals and estimate feedback both fit.
pub fn field<'a, T, F>(
    sys: &'a CoupledObserver<T>,
    mut input: F,
) -> impl FnMut(T, &DVector<T>) -> DVector<T> + 'a
where
    T: Scalar,
    F: FnMut(T, &DVector<T>) -> DVector<T> + 'a,
{
    move |t, s| {
        let u = input(t, s);
        sys.derivative(t, s, &u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::numerics::integrate;
    use crate::synthesis::{synth_extension, synth_hetero, AgentModel};
    use nalgebra::{dmatrix, dvector};

    fn two_agent_system() -> CoupledObserver<f64> {
        let models = vec![
            AgentModel::new(dmatrix![0.0], dmatrix![1.0], dmatrix![1.0]).unwrap(),
            AgentModel::new(
                dmatrix![0.0, 1.0; 0.0, 0.0],
                dmatrix![0.0; 1.0],
                dmatrix![1.0, 0.0],
            )
            .unwrap(),
        ];
        let graph = Graph::<f64>::path(2).unwrap();
        let design = synth_hetero(&models, &graph).unwrap();
        CoupledObserver::new(design, vec![AdaptiveParams::default()]).unwrap()
    }

    #[test]
    fn layout_dimensions() {
        let sys = two_agent_system();
        // n = 3, two nodes: 3 + 6 + 4 = 13.
        assert_eq!(sys.state_dim(), 13);
        let s = sys
            .init_state(&dvector![1.0, 2.0, 3.0], InitMode::ZeroInternal)
            .unwrap();
        assert_eq!(sys.plant_state(&s), dvector![1.0, 2.0, 3.0]);
        assert_eq!(sys.gains(&s, 0), (1.0, 1.0));
        assert!(sys.aux_estimate(&s, 0).is_none());
    }

    #[test]
    fn param_count_is_validated() {
        let sys = two_agent_system();
        let design = sys.design.clone();
        assert!(matches!(
            CoupledObserver::new(design, vec![AdaptiveParams::default(); 3]),
            Err(SimError::ParamCount {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn exact_initialization_is_invariant_without_inputs() {
        // With no inputs anywhere there is no unavailable-input
        // disturbance, so estimates started on the true state must ride
        // along with the drifting plant; any gain-wiring mistake breaks
        // this within a few steps.
        let sys = two_agent_system();
        let x0 = dvector![0.5, -1.0, 2.0];
        let s0 = sys.init_state(&x0, InitMode::ExactEstimates).unwrap();
        let mut f = field(&sys, |_t: f64, _s: &DVector<f64>| dvector![0.0, 0.0]);
        let traj = integrate(&mut f, &s0, 1.0, 1e-3).unwrap();
        let sf = traj.last_state();
        let x = sys.plant_state(sf);
        for i in 0..2 {
            let err = (sys.estimate(sf, i) - &x).norm();
            assert!(err < 1e-8, "node {i} drifted by {err}");
        }
        // The double integrator actually moved.
        assert!((x - x0).norm() > 0.1);
    }

    #[test]
    fn single_node_exact_initialization_rides_through_inputs() {
        // A one-agent network has no unavailable inputs, so the invariant
        // holds with the input active; this pins the input-gain wiring.
        let models = vec![AgentModel::new(
            dmatrix![0.0, 1.0; 0.0, 0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0],
        )
        .unwrap()];
        let graph = Graph::<f64>::path(1).unwrap();
        let design = synth_hetero(&models, &graph).unwrap();
        let sys = CoupledObserver::new(design, vec![AdaptiveParams::default()]).unwrap();
        let x0 = dvector![1.0, -0.5];
        let s0 = sys.init_state(&x0, InitMode::ExactEstimates).unwrap();
        let mut f = field(&sys, |t: f64, _s: &DVector<f64>| dvector![(2.0 * t).sin()]);
        let traj = integrate(&mut f, &s0, 1.0, 1e-3).unwrap();
        let sf = traj.last_state();
        let x = sys.plant_state(sf);
        let err = (sys.estimate(sf, 0) - &x).norm();
        assert!(err < 1e-8, "drifted by {err}");
        assert!((x - x0).norm() > 0.1);
    }

    #[test]
    fn unavailable_inputs_stay_rejected_from_exact_start() {
        // With foreign inputs active the estimate cannot stay exactly on
        // the plant, but the sliding coupling keeps the excursion small
        // from the first instant.
        let sys = two_agent_system();
        let x0 = dvector![0.5, -1.0, 2.0];
        let s0 = sys.init_state(&x0, InitMode::ExactEstimates).unwrap();
        let mut f = field(&sys, |t: f64, _s: &DVector<f64>| {
            dvector![(2.0 * t).sin(), (3.0 * t).cos()]
        });
        let traj = integrate(&mut f, &s0, 1.0, 1e-3).unwrap();
        let sf = traj.last_state();
        let x = sys.plant_state(sf);
        for i in 0..2 {
            let err = (sys.estimate(sf, i) - &x).norm();
            assert!(err < 0.1, "node {i} excursion {err}");
        }
    }

    #[test]
    fn zero_init_estimates_converge() {
        let sys = two_agent_system();
        let x0 = dvector![1.0, -0.5, 0.5];
        let s0 = sys.init_state(&x0, InitMode::ZeroInternal).unwrap();
        let mut f = field(&sys, |t: f64, _s: &DVector<f64>| {
            dvector![(0.5 * t).sin(), t.cos()]
        });
        let traj = integrate(&mut f, &s0, 30.0, 1e-3).unwrap();
        let sf = traj.last_state();
        let x = sys.plant_state(sf);
        for i in 0..2 {
            let err = (sys.estimate(sf, i) - &x).norm();
            assert!(err < 1e-3, "node {i} error {err}");
        }
        // Adaptive gains only ever grow.
        let (g, gs) = sys.gains(sf, 0);
        assert!(g >= 1.0 && gs >= 1.0);
    }

    #[test]
    fn extension_exact_initialization_is_invariant_without_inputs() {
        // The static layer carries no input information at all, so the
        // invariant only holds with inputs off; nonzero velocities keep
        // the plant moving regardless.
        let model = AgentModel::new(
            dmatrix![0.0, 1.0; 0.0, 0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0],
        )
        .unwrap();
        let graph = Graph::<f64>::path(3).unwrap();
        let design = synth_extension(&model, &graph, &[1.0, 0.0, 0.0], 1.1).unwrap();
        let sys = CoupledObserver::new(design, vec![AdaptiveParams::default()]).unwrap();
        let x0 = dvector![1.0, 0.3, -1.0, 0.5, 0.0, -0.5];
        let s0 = sys.init_state(&x0, InitMode::ExactEstimates).unwrap();
        let mut f = field(&sys, |_t: f64, _s: &DVector<f64>| {
            dvector![0.0, 0.0, 0.0]
        });
        let traj = integrate(&mut f, &s0, 1.0, 1e-3).unwrap();
        let sf = traj.last_state();
        let x = sys.plant_state(sf);
        for i in 0..3 {
            let aux_err = (sys.aux_estimate(sf, i).unwrap()
                - x.rows(2 * i, 2).into_owned())
            .norm();
            assert!(aux_err < 1e-8, "aux {i} drifted by {aux_err}");
            let err = (sys.estimate(sf, i) - &x).norm();
            assert!(err < 1e-8, "node {i} drifted by {err}");
        }
        assert!((x - x0).norm() > 0.1);
    }

    #[test]
    fn extension_zero_init_converges_in_both_layers() {
        let model = AgentModel::new(dmatrix![0.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let graph = Graph::<f64>::path(3).unwrap();
        let design = synth_extension(&model, &graph, &[1.0, 0.0, 0.0], 1.1).unwrap();
        let sys = CoupledObserver::new(design, vec![AdaptiveParams::default()]).unwrap();
        let x0 = dvector![1.0, -1.0, 0.5];
        let s0 = sys.init_state(&x0, InitMode::ZeroInternal).unwrap();
        let mut f = field(&sys, |t: f64, _s: &DVector<f64>| {
            dvector![(0.7 * t).sin(), (1.3 * t).cos(), (0.4 * t).sin()]
        });
        let traj = integrate(&mut f, &s0, 40.0, 1e-3).unwrap();
        let sf = traj.last_state();
        let x = sys.plant_state(sf);
        for i in 0..3 {
            let aux_err = (sys.aux_estimate(sf, i).unwrap()
                - x.rows(i, 1).into_owned())
            .norm();
            assert!(aux_err < 1e-3, "aux {i} error {aux_err}");
            let err = (sys.estimate(sf, i) - &x).norm();
            assert!(err < 1e-2, "node {i} error {err}");
        }
    }
}
