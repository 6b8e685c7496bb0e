//! Leader herding: single-integrator agents on the plane carry an extra
//! identity state. Leaders drive their identity toward a positive target
//! and follow a preset velocity schedule; followers hold still until some
//! estimated identity crosses a threshold, then steer toward the centroid
//! of the estimated positions of everyone they currently believe to be a
//! leader. The point of the exercise: every follower ends up inside the
//! convex hull of the leaders' true positions.
//!
//! Per-agent state is `(px, py, z)` with dynamics `x' = u`, so all agents
//! are fully actuated and the observer sees a 3x3 zero drift matrix.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::{decision_steps, finite_guard, norm2, step_count, ScenarioError, Trace, TRACE_STRIDE};
use crate::graph::{Graph, NodeSet};
use crate::numerics::rk4_step;
use crate::observer::AdaptiveParams;
use crate::scalar::{cv, Scalar};
use crate::sim::{field, CoupledObserver, InitMode};
use crate::synthesis::{synth_homo, AgentModel};

/// Piecewise-constant planar velocity: `(from_time, velocity)` segments,
/// strictly increasing in time; zero before the first segment.
#[derive(Debug, Clone)]
pub struct PiecewiseVelocity<T: Scalar> {
    segments: Vec<(T, [T; 2])>,
}

impl<T: Scalar> PiecewiseVelocity<T> {
    pub fn new(segments: Vec<(T, [T; 2])>) -> Result<Self, ScenarioError> {
        for w in segments.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(ScenarioError::BadConfig(
                    "velocity segments must have strictly increasing start times".into(),
                ));
            }
        }
        if segments
            .iter()
            .any(|(t, v)| !t.is_finite() || !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(ScenarioError::BadConfig(
                "velocity segments must be finite".into(),
            ));
        }
        Ok(Self { segments })
    }

    /// Constant velocity from t = 0 on.
    pub fn constant(v: [T; 2]) -> Self {
        Self {
            segments: vec![(T::zero(), v)],
        }
    }

    pub fn at(&self, t: T) -> [T; 2] {
        self.segments
            .iter()
            .rev()
            .find(|(t0, _)| t >= *t0)
            .map(|(_, v)| *v)
            .unwrap_or([T::zero(), T::zero()])
    }
}

pub struct HerdingConfig<T: Scalar> {
    pub graph: Graph<T>,
    /// Agents with access to their own absolute output.
    pub roots: NodeSet,
    pub leaders: Vec<usize>,
    /// One velocity schedule per leader, in `leaders` order.
    pub schedules: Vec<PiecewiseVelocity<T>>,
    pub initial_positions: Vec<[T; 2]>,
    /// Identity value leaders drive toward.
    pub z_star: T,
    /// Identity threshold for follower recognition, below `z_star`.
    pub z_star_t: T,
    /// Follower position feedback gain.
    pub k_f: T,
    pub params: Vec<AdaptiveParams<T>>,
    pub dt: T,
    pub t_end: T,
    pub decision_dt: T,
}

/// Candidate leaders in one agent's eyes: every other agent whose estimated
/// identity exceeds the threshold.
pub fn herding_follower_decision<T: Scalar>(
    xhat: &DVector<T>,
    z_star_t: T,
    self_id: usize,
) -> Vec<usize> {
    assert_eq!(xhat.len() % 3, 0, "estimate length must be 3N");
    let n_agents = xhat.len() / 3;
    (0..n_agents)
        .filter(|&j| j != self_id && xhat[3 * j + 2] > z_star_t)
        .collect()
}

/// Velocity command toward the centroid of the candidates' estimated
/// positions; zero while the candidate set is empty.
pub fn herding_follower_velocity<T: Scalar>(
    xhat: &DVector<T>,
    candidates: &[usize],
    k_f: T,
    self_id: usize,
) -> [T; 2] {
    if candidates.is_empty() {
        return [T::zero(), T::zero()];
    }
    let mut cx = T::zero();
    let mut cy = T::zero();
    for &j in candidates {
        cx += xhat[3 * j];
        cy += xhat[3 * j + 1];
    }
    let m = cv::<T>(candidates.len() as f64);
    [
        k_f * (cx / m - xhat[3 * self_id]),
        k_f * (cy / m - xhat[3 * self_id + 1]),
    ]
}

pub struct HerdingOutcome<T: Scalar> {
    pub trace: Trace<T>,
    pub final_state: DVector<T>,
    /// Per-node estimation error norm at the end.
    pub final_est_errors: Vec<T>,
    /// Earliest decision epoch at which any follower saw a candidate.
    pub first_decision_time: Option<T>,
    /// Largest commanded follower speed before that follower's own first
    /// nonempty candidate set. Exactly zero when the logic is honest.
    pub max_pre_decision_speed: T,
    /// Largest follower displacement from its start before its own first
    /// nonempty candidate set.
    pub max_pre_decision_displacement: T,
    /// Follower id paired with its final distance to the leaders' true
    /// convex hull (zero inside).
    pub hull_distances: Vec<(usize, T)>,
}

pub fn run_herding<T: Scalar>(cfg: &HerdingConfig<T>) -> Result<HerdingOutcome<T>, ScenarioError> {
    let n_agents = cfg.graph.node_count();
    let leader_set: BTreeSet<usize> = cfg.leaders.iter().copied().collect();
    if cfg.leaders.is_empty()
        || leader_set.len() != cfg.leaders.len()
        || cfg.leaders.iter().any(|&l| l >= n_agents)
    {
        return Err(ScenarioError::BadConfig(
            "leaders must be distinct valid agent ids".into(),
        ));
    }
    if leader_set.len() == n_agents {
        return Err(ScenarioError::BadConfig("no followers left".into()));
    }
    if cfg.schedules.len() != cfg.leaders.len() {
        return Err(ScenarioError::BadConfig(
            "need exactly one velocity schedule per leader".into(),
        ));
    }
    if cfg.initial_positions.len() != n_agents {
        return Err(ScenarioError::BadConfig(
            "need one initial position per agent".into(),
        ));
    }
    if !(cfg.z_star > T::zero()) || !(cfg.z_star_t > T::zero()) || !(cfg.z_star_t < cfg.z_star) {
        return Err(ScenarioError::BadConfig(
            "identity levels need 0 < z_star_t < z_star".into(),
        ));
    }
    if !(cfg.k_f > T::zero()) {
        return Err(ScenarioError::BadConfig("k_f must be positive".into()));
    }
    let epoch = decision_steps(cfg.dt, cfg.decision_dt)?;
    let steps = step_count(cfg.t_end, cfg.dt)?;

    let three = DMatrix::<T>::identity(3, 3);
    let model = AgentModel::new(DMatrix::zeros(3, 3), three.clone(), three)?;
    let design = synth_homo(&model, &cfg.graph, &cfg.roots)?;
    let sys = CoupledObserver::new(design, cfg.params.clone())?;

    let mut x0 = DVector::<T>::zeros(3 * n_agents);
    for (i, p) in cfg.initial_positions.iter().enumerate() {
        x0[3 * i] = p[0];
        x0[3 * i + 1] = p[1];
    }
    let mut s = sys.init_state(&x0, InitMode::ZeroInternal)?;

    let followers: Vec<usize> = (0..n_agents).filter(|i| !leader_set.contains(i)).collect();
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); followers.len()];
    let mut first_decision: Vec<Option<T>> = vec![None; followers.len()];
    let mut max_speed = T::zero();
    let mut max_disp = T::zero();
    let mut trace = Trace::new();

    for k in 0..=steps {
        let t = cfg.dt * cv::<T>(k as f64);
        if k % epoch == 0 {
            for (fi, &fid) in followers.iter().enumerate() {
                let xhat = sys.estimate(&s, fid);
                let cand = herding_follower_decision(&xhat, cfg.z_star_t, fid);
                if !cand.is_empty() && first_decision[fi].is_none() {
                    first_decision[fi] = Some(t);
                }
                held[fi] = cand;
            }
        }
        let x = sys.plant_state(&s);
        for (fi, &fid) in followers.iter().enumerate() {
            if first_decision[fi].is_none() {
                let d = [x[3 * fid] - x0[3 * fid], x[3 * fid + 1] - x0[3 * fid + 1]];
                max_disp = max_disp.max(norm2(d));
                let xhat = sys.estimate(&s, fid);
                let v = herding_follower_velocity(&xhat, &held[fi], cfg.k_f, fid);
                max_speed = max_speed.max(norm2(v));
            }
        }
        if k % TRACE_STRIDE == 0 || k == steps {
            trace.push(&sys, t, &s);
        }
        if k == steps {
            break;
        }

        let mut f = field(&sys, |tt: T, state: &DVector<T>| {
            let mut u = DVector::<T>::zeros(3 * n_agents);
            for (li, &lid) in cfg.leaders.iter().enumerate() {
                let xhat = sys.estimate(state, lid);
                let v = cfg.schedules[li].at(tt);
                u[3 * lid] = v[0];
                u[3 * lid + 1] = v[1];
                u[3 * lid + 2] = cfg.z_star - xhat[3 * lid + 2];
            }
            for (fi, &fid) in followers.iter().enumerate() {
                let xhat = sys.estimate(state, fid);
                let v = herding_follower_velocity(&xhat, &held[fi], cfg.k_f, fid);
                u[3 * fid] = v[0];
                u[3 * fid + 1] = v[1];
                u[3 * fid + 2] = -xhat[3 * fid + 2];
            }
            u
        });
        s = rk4_step(&mut f, t, &s, cfg.dt);
        finite_guard(&s, t)?;
    }

    let x = sys.plant_state(&s);
    let leader_pts: Vec<[T; 2]> = cfg
        .leaders
        .iter()
        .map(|&l| [x[3 * l], x[3 * l + 1]])
        .collect();
    let hull = super::convex_hull_2d(&leader_pts);
    let hull_distances = followers
        .iter()
        .map(|&fid| (fid, super::dist_to_hull(&hull, [x[3 * fid], x[3 * fid + 1]])))
        .collect();
    let final_est_errors = (0..n_agents)
        .map(|i| (sys.estimate(&s, i) - &x).norm())
        .collect();
    let first_decision_time = first_decision
        .iter()
        .flatten()
        .fold(None, |acc: Option<T>, &t| {
            Some(acc.map_or(t, |a| if t < a { t } else { a }))
        });

    Ok(HerdingOutcome {
        trace,
        final_state: x,
        final_est_errors,
        first_decision_time,
        max_pre_decision_speed: max_speed,
        max_pre_decision_displacement: max_disp,
        hull_distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn decision_thresholds_estimated_identities() {
        // Agent 2 looking at agents 0 and 1 with identities 0.9 and 0.1.
        let xhat = dvector![
            0.0, 0.0, 0.9, //
            1.0, 1.0, 0.1, //
            2.0, 2.0, 0.0
        ];
        assert_eq!(herding_follower_decision(&xhat, 0.8, 2), vec![0]);
        assert_eq!(herding_follower_decision(&xhat, 0.95, 2), Vec::<usize>::new());
        // Own identity never makes an agent its own candidate.
        assert_eq!(herding_follower_decision(&xhat, 0.5, 0), Vec::<usize>::new());
    }

    #[test]
    fn velocity_points_at_the_candidate_centroid() {
        let xhat = dvector![
            0.0, 0.0, 1.0, //
            2.0, 0.0, 1.0, //
            1.0, -1.0, 0.0
        ];
        let v = herding_follower_velocity(&xhat, &[0, 1], 1.0f64, 2);
        assert!((v[0] - 0.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
        assert_eq!(
            herding_follower_velocity(&xhat, &[], 1.0, 2),
            [0.0, 0.0]
        );
        // At the centroid the command vanishes.
        let centered = dvector![
            0.0, 0.0, 1.0, //
            2.0, 0.0, 1.0, //
            1.0, 0.0, 0.0
        ];
        let v = herding_follower_velocity(&centered, &[0, 1], 3.0, 2);
        assert!(norm2(v) < 1e-12);
    }

    #[test]
    fn schedules_are_right_continuous_and_ordered() {
        let sched =
            PiecewiseVelocity::new(vec![(0.0, [1.0, 0.0]), (10.0, [0.0, 0.0])]).unwrap();
        assert_eq!(sched.at(0.0), [1.0, 0.0]);
        assert_eq!(sched.at(9.999), [1.0, 0.0]);
        assert_eq!(sched.at(10.0), [0.0, 0.0]);
        let late = PiecewiseVelocity::new(vec![(5.0, [1.0, 0.0])]).unwrap();
        assert_eq!(late.at(0.0), [0.0, 0.0]);
        assert!(PiecewiseVelocity::new(vec![(1.0, [0.0, 0.0]), (1.0, [0.0, 0.0])]).is_err());
    }

    fn small_config() -> HerdingConfig<f64> {
        let mut roots = NodeSet::new();
        roots.insert(0);
        HerdingConfig {
            graph: Graph::ring(4).unwrap(),
            roots,
            leaders: vec![1],
            schedules: vec![
                PiecewiseVelocity::new(vec![(0.0, [0.1, 0.05]), (10.0, [0.0, 0.0])]).unwrap(),
            ],
            initial_positions: vec![[3.0, 0.0], [0.0, 0.0], [-2.0, 2.0], [1.0, -3.0]],
            z_star: 1.0,
            z_star_t: 0.5,
            k_f: 1.0,
            params: vec![AdaptiveParams::new(5.0, 2.0, 5.0, 0.5).unwrap()],
            dt: 1e-3,
            t_end: 30.0,
            decision_dt: 0.1,
        }
    }

    #[test]
    fn config_validation_rejects_bad_setups() {
        let mut c = small_config();
        c.leaders = vec![1, 1];
        assert!(matches!(
            run_herding(&c),
            Err(ScenarioError::BadConfig(_))
        ));
        let mut c = small_config();
        c.z_star_t = 2.0;
        assert!(run_herding(&c).is_err());
        let mut c = small_config();
        c.initial_positions.pop();
        assert!(run_herding(&c).is_err());
    }

    #[test]
    fn followers_gather_at_a_single_leader() {
        let out = run_herding(&small_config()).unwrap();
        // Honest stationarity: no follower moved before its own decision.
        assert!(out.max_pre_decision_displacement < 1e-9);
        assert!(out.max_pre_decision_speed < 1e-9);
        let t_first = out.first_decision_time.expect("followers must decide");
        assert!(t_first > 0.0 && t_first < 20.0, "first decision at {t_first}");
        // Single leader: the hull is its position; everyone converges there.
        for (fid, d) in &out.hull_distances {
            assert!(*d < 0.05, "follower {fid} ended {d} from the leader");
        }
        for (i, e) in out.final_est_errors.iter().enumerate() {
            assert!(*e < 0.05, "node {i} estimation error {e}");
        }
        assert_eq!(out.trace.times.len(), 3001);
    }
}
