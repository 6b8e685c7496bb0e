//! Honeybee-style recruitment: planar double-integrator agents. Leaders
//! circle unit-radius circles anticlockwise at configured speeds; followers
//! classify agents by estimated speed, apportion themselves to the active
//! leaders in proportion to those estimated speeds (largest remainder), and
//! steer to the point one unit left of their leader's estimated heading,
//! which for an anticlockwise orbit is the circle center.
//!
//! A leader may stop circling mid-run (`stop_at`); it then brakes to a halt,
//! its estimated speed falls below the threshold, and followers reassign to
//! the remaining leaders at the next decision epoch. Configured roles never
//! change: a stopped leader does not join the follower pool, so quotas are
//! apportioned over the configured followers only.
//!
//! Per-agent state is `(px, py, vx, vy)` with force inputs and measured
//! position.

use std::collections::BTreeSet;

use nalgebra::{dmatrix, DVector};

use super::{
    decision_steps, finite_guard, norm2, rot90, step_count, unit_or_default, ScenarioError,
    Trace, TRACE_STRIDE,
};
use crate::graph::{Graph, NodeSet};
use crate::numerics::rk4_step;
use crate::observer::AdaptiveParams;
use crate::scalar::{cv, to_f64, Scalar};
use crate::sim::{field, CoupledObserver, InitMode};
use crate::synthesis::{synth_homo, AgentModel};

#[derive(Debug, Clone)]
pub struct BeeLeader<T: Scalar> {
    pub id: usize,
    pub center: [T; 2],
    /// Target circling speed, strictly positive.
    pub speed: T,
    /// When set, the leader stops circling at this time and brakes.
    pub stop_at: Option<T>,
}

#[derive(Debug, Clone)]
pub struct BeeGains<T: Scalar> {
    /// Radial correction weight in the desired-velocity field.
    pub k_r: T,
    /// Leader velocity tracking gain.
    pub k_a: T,
    /// Follower position gain.
    pub k_p: T,
    /// Follower damping gain.
    pub k_d: T,
    /// Braking gain for stopped leaders.
    pub k_b: T,
    /// Norm clamp on every commanded acceleration.
    pub a_max: T,
}

impl<T: Scalar> Default for BeeGains<T> {
    fn default() -> Self {
        Self {
            k_r: T::one(),
            k_a: cv(4.0),
            k_p: T::one(),
            k_d: cv(2.0),
            k_b: cv(2.0),
            a_max: cv(50.0),
        }
    }
}

pub struct BeeConfig<T: Scalar> {
    pub graph: Graph<T>,
    /// Agents with access to their own absolute output.
    pub roots: NodeSet,
    pub leaders: Vec<BeeLeader<T>>,
    /// Speed threshold separating circling leaders from everyone else,
    /// strictly between zero and the slowest configured speed.
    pub v_star_t: T,
    pub gains: BeeGains<T>,
    pub initial_positions: Vec<[T; 2]>,
    pub params: Vec<AdaptiveParams<T>>,
    pub dt: T,
    pub t_end: T,
    pub decision_dt: T,
}

/// Splits all agents by estimated speed: strictly above the threshold makes
/// a candidate leader, everything else (self included) a candidate follower.
pub fn bee_classify<T: Scalar>(xhat: &DVector<T>, v_star_t: T) -> (Vec<usize>, Vec<usize>) {
    assert_eq!(xhat.len() % 4, 0, "estimate length must be 4N");
    let n = xhat.len() / 4;
    let mut leaders = Vec::new();
    let mut followers = Vec::new();
    for j in 0..n {
        if norm2([xhat[4 * j + 2], xhat[4 * j + 3]]) > v_star_t {
            leaders.push(j);
        } else {
            followers.push(j);
        }
    }
    (leaders, followers)
}

/// Largest-remainder apportionment of `total` seats proportional to
/// positive `weights`; leftover seats go to the largest fractional parts,
/// ties to the lowest index.
pub fn largest_remainder_quotas<T: Scalar>(weights: &[T], total: usize) -> Vec<usize> {
    assert!(!weights.is_empty());
    let w: Vec<f64> = weights.iter().map(|x| to_f64(*x)).collect();
    let sum: f64 = w.iter().sum();
    assert!(sum > 0.0, "weights must be positive");
    let shares: Vec<f64> = w.iter().map(|x| total as f64 * x / sum).collect();
    let mut quotas: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        quotas[i] += 1;
    }
    quotas
}

/// Assigns every follower to a leader. Seats per leader come from
/// largest-remainder quotas over the estimated speeds; pairs are then
/// granted greedily in order of estimated distance, ties broken by lower
/// follower id then lower leader id. Returns `(follower, leader)` pairs in
/// follower order.
pub fn bee_assign<T: Scalar>(
    leaders: &[(usize, [T; 2], T)],
    followers: &[(usize, [T; 2])],
) -> Result<Vec<(usize, usize)>, ScenarioError> {
    if leaders.is_empty() {
        return Err(ScenarioError::NoLeaders);
    }
    let speeds: Vec<T> = leaders.iter().map(|l| l.2).collect();
    let mut quota = largest_remainder_quotas(&speeds, followers.len());
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(leaders.len() * followers.len());
    for (fi, f) in followers.iter().enumerate() {
        for (li, l) in leaders.iter().enumerate() {
            let d = to_f64(norm2([f.1[0] - l.1[0], f.1[1] - l.1[1]]));
            pairs.push((d, fi, li));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(followers[a.1].0.cmp(&followers[b.1].0))
            .then(leaders[a.2].0.cmp(&leaders[b.2].0))
    });
    let mut chosen: Vec<Option<usize>> = vec![None; followers.len()];
    let mut left = followers.len();
    for &(_, fi, li) in &pairs {
        if left == 0 {
            break;
        }
        if chosen[fi].is_none() && quota[li] > 0 {
            chosen[fi] = Some(li);
            quota[li] -= 1;
            left -= 1;
        }
    }
    Ok(chosen
        .into_iter()
        .enumerate()
        .map(|(fi, li)| (followers[fi].0, leaders[li.expect("quotas cover all")].0))
        .collect())
}

/// Acceleration command that makes a leader orbit the unit circle around
/// `center` anticlockwise at speed `v_star`, computed from its own
/// estimates. Velocity-error feedback tracks a desired field that tilts
/// inward off-radius; the explicit curvature term supplies the centripetal
/// acceleration that pure velocity feedback cannot, which would otherwise
/// inflate the orbit radius by roughly `v_star / (k_a k_r)`.
pub fn circling_leader_accel<T: Scalar>(
    p_hat: [T; 2],
    v_hat: [T; 2],
    center: [T; 2],
    v_star: T,
    k_r: T,
    k_a: T,
) -> [T; 2] {
    let rel = [p_hat[0] - center[0], p_hat[1] - center[1]];
    let rho = norm2(rel);
    let e_r = unit_or_default(rel);
    let e_t = rot90(e_r);
    let off = k_r * (rho - T::one());
    let raw = [e_t[0] - off * e_r[0], e_t[1] - off * e_r[1]];
    // |raw| = sqrt(1 + off^2) >= 1, no guard needed.
    let n = norm2(raw);
    let v_d = [v_star * raw[0] / n, v_star * raw[1] / n];
    let curvature = (v_hat[0] * v_hat[0] + v_hat[1] * v_hat[1]) / rho.max(cv(0.25));
    [
        k_a * (v_d[0] - v_hat[0]) - curvature * e_r[0],
        k_a * (v_d[1] - v_hat[1]) - curvature * e_r[1],
    ]
}

/// Follower acceleration: PD toward the point one unit to the left of the
/// assigned leader's estimated heading (for an anticlockwise orbit, the
/// circle center). A stationary leader gets a fixed `(1, 0)` offset.
pub fn bee_follower_accel<T: Scalar>(
    p_self: [T; 2],
    v_self: [T; 2],
    p_leader: [T; 2],
    v_leader: [T; 2],
    k_p: T,
    k_d: T,
) -> [T; 2] {
    let n = norm2(v_leader);
    let offset = if n < cv(1e-9) {
        [T::one(), T::zero()]
    } else {
        rot90([v_leader[0] / n, v_leader[1] / n])
    };
    let q = [p_leader[0] + offset[0], p_leader[1] + offset[1]];
    [
        k_p * (q[0] - p_self[0]) - k_d * v_self[0],
        k_p * (q[1] - p_self[1]) - k_d * v_self[1],
    ]
}

pub struct BeeOutcome<T: Scalar> {
    pub trace: Trace<T>,
    pub final_state: DVector<T>,
    /// Per-node estimation error norm at the end.
    pub final_est_errors: Vec<T>,
    /// Configured leader id paired with how many followers' final held
    /// assignment targets it.
    pub counts: Vec<(usize, usize)>,
    /// Follower id paired with the final distance to its target point,
    /// computed from the assigned leader's true state.
    pub target_distances: Vec<(usize, T)>,
    /// Still-circling leader id paired with | radius - 1 | at the end.
    pub radius_errors: Vec<(usize, T)>,
    /// Still-circling leader id paired with relative speed error at the end.
    pub speed_errors: Vec<(usize, T)>,
    /// Followers holding no assignment at the end.
    pub unassigned: Vec<usize>,
    /// Integration-stage acceleration commands that hit the norm clamp.
    pub clamp_events: usize,
}

pub fn run_bee<T: Scalar>(cfg: &BeeConfig<T>) -> Result<BeeOutcome<T>, ScenarioError> {
    let n_agents = cfg.graph.node_count();
    let leader_ids: BTreeSet<usize> = cfg.leaders.iter().map(|l| l.id).collect();
    if cfg.leaders.is_empty()
        || leader_ids.len() != cfg.leaders.len()
        || cfg.leaders.iter().any(|l| l.id >= n_agents)
    {
        return Err(ScenarioError::BadConfig(
            "leaders must be distinct valid agent ids".into(),
        ));
    }
    if leader_ids.len() == n_agents {
        return Err(ScenarioError::BadConfig("no followers left".into()));
    }
    let min_speed = cfg
        .leaders
        .iter()
        .map(|l| l.speed)
        .fold(T::max_value().unwrap(), |a, b| a.min(b));
    if !(min_speed > T::zero()) {
        return Err(ScenarioError::BadConfig(
            "circling speeds must be positive".into(),
        ));
    }
    if !(cfg.v_star_t > T::zero()) || !(cfg.v_star_t < min_speed) {
        return Err(ScenarioError::BadConfig(
            "need 0 < v_star_t < min circling speed".into(),
        ));
    }
    if cfg.initial_positions.len() != n_agents {
        return Err(ScenarioError::BadConfig(
            "need one initial position per agent".into(),
        ));
    }
    let g = &cfg.gains;
    for (name, v) in [
        ("k_r", g.k_r),
        ("k_a", g.k_a),
        ("k_p", g.k_p),
        ("k_d", g.k_d),
        ("k_b", g.k_b),
        ("a_max", g.a_max),
    ] {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(ScenarioError::BadConfig(format!(
                "gain {name} must be positive and finite"
            )));
        }
    }
    let epoch = decision_steps(cfg.dt, cfg.decision_dt)?;
    let steps = step_count(cfg.t_end, cfg.dt)?;

    let a = dmatrix![
        0.0, 0.0, 1.0, 0.0;
        0.0, 0.0, 0.0, 1.0;
        0.0, 0.0, 0.0, 0.0;
        0.0, 0.0, 0.0, 0.0
    ]
    .map(cv::<T>);
    let b = dmatrix![
        0.0, 0.0;
        0.0, 0.0;
        1.0, 0.0;
        0.0, 1.0
    ]
    .map(cv::<T>);
    let c = dmatrix![
        1.0, 0.0, 0.0, 0.0;
        0.0, 1.0, 0.0, 0.0
    ]
    .map(cv::<T>);
    let model = AgentModel::new(a, b, c)?;
    let design = synth_homo(&model, &cfg.graph, &cfg.roots)?;
    let sys = CoupledObserver::new(design, cfg.params.clone())?;

    let mut x0 = DVector::<T>::zeros(4 * n_agents);
    for (i, p) in cfg.initial_positions.iter().enumerate() {
        x0[4 * i] = p[0];
        x0[4 * i + 1] = p[1];
    }
    let mut s = sys.init_state(&x0, InitMode::ZeroInternal)?;

    let followers: Vec<usize> = (0..n_agents).filter(|i| !leader_ids.contains(i)).collect();
    let mut held: Vec<Option<usize>> = vec![None; followers.len()];
    let mut clamps = 0usize;
    let mut trace = Trace::new();

    for k in 0..=steps {
        let t = cfg.dt * cv::<T>(k as f64);
        if k % epoch == 0 {
            for (fi, &fid) in followers.iter().enumerate() {
                let xhat = sys.estimate(&s, fid);
                // Active leaders in this follower's eyes: configured leaders
                // whose estimated speed clears the threshold. The follower
                // pool is the configured roster, so a stopped leader never
                // absorbs a quota seat.
                let active: Vec<(usize, [T; 2], T)> = cfg
                    .leaders
                    .iter()
                    .filter_map(|l| {
                        let sp = norm2([xhat[4 * l.id + 2], xhat[4 * l.id + 3]]);
                        (sp > cfg.v_star_t)
                            .then(|| (l.id, [xhat[4 * l.id], xhat[4 * l.id + 1]], sp))
                    })
                    .collect();
                let pool: Vec<(usize, [T; 2])> = followers
                    .iter()
                    .map(|&j| (j, [xhat[4 * j], xhat[4 * j + 1]]))
                    .collect();
                held[fi] = match bee_assign(&active, &pool) {
                    Ok(map) => map.iter().find(|(f, _)| *f == fid).map(|(_, l)| *l),
                    Err(ScenarioError::NoLeaders) => None,
                    Err(e) => return Err(e),
                };
            }
        }
        if k % TRACE_STRIDE == 0 || k == steps {
            trace.push(&sys, t, &s);
        }
        if k == steps {
            break;
        }

        let mut f = field(&sys, |tt: T, state: &DVector<T>| {
            let mut u = DVector::<T>::zeros(2 * n_agents);
            let mut apply = |u: &mut DVector<T>, id: usize, mut a: [T; 2]| {
                let n = norm2(a);
                if n > g.a_max {
                    a = [a[0] * g.a_max / n, a[1] * g.a_max / n];
                    clamps += 1;
                }
                u[2 * id] = a[0];
                u[2 * id + 1] = a[1];
            };
            for l in &cfg.leaders {
                let xhat = sys.estimate(state, l.id);
                let p = [xhat[4 * l.id], xhat[4 * l.id + 1]];
                let v = [xhat[4 * l.id + 2], xhat[4 * l.id + 3]];
                let a = if l.stop_at.is_some_and(|ts| tt >= ts) {
                    [-g.k_b * v[0], -g.k_b * v[1]]
                } else {
                    circling_leader_accel(p, v, l.center, l.speed, g.k_r, g.k_a)
                };
                apply(&mut u, l.id, a);
            }
            for (fi, &fid) in followers.iter().enumerate() {
                let xhat = sys.estimate(state, fid);
                let p = [xhat[4 * fid], xhat[4 * fid + 1]];
                let v = [xhat[4 * fid + 2], xhat[4 * fid + 3]];
                let a = match held[fi] {
                    Some(lid) => bee_follower_accel(
                        p,
                        v,
                        [xhat[4 * lid], xhat[4 * lid + 1]],
                        [xhat[4 * lid + 2], xhat[4 * lid + 3]],
                        g.k_p,
                        g.k_d,
                    ),
                    None => [-g.k_d * v[0], -g.k_d * v[1]],
                };
                apply(&mut u, fid, a);
            }
            u
        });
        s = rk4_step(&mut f, t, &s, cfg.dt);
        finite_guard(&s, t)?;
    }

    let x = sys.plant_state(&s);
    let counts = cfg
        .leaders
        .iter()
        .map(|l| {
            (
                l.id,
                held.iter().filter(|h| **h == Some(l.id)).count(),
            )
        })
        .collect();
    let target_distances = followers
        .iter()
        .enumerate()
        .filter_map(|(fi, &fid)| {
            held[fi].map(|lid| {
                let q_accel = bee_follower_accel(
                    [x[4 * fid], x[4 * fid + 1]],
                    [T::zero(), T::zero()],
                    [x[4 * lid], x[4 * lid + 1]],
                    [x[4 * lid + 2], x[4 * lid + 3]],
                    T::one(),
                    T::one(),
                );
                // With unit k_p and zero damping the command IS q - p.
                (fid, norm2(q_accel))
            })
        })
        .collect();
    let mut radius_errors = Vec::new();
    let mut speed_errors = Vec::new();
    for l in &cfg.leaders {
        if l.stop_at.is_some_and(|ts| ts <= cfg.t_end) {
            continue;
        }
        let p = [x[4 * l.id] - l.center[0], x[4 * l.id + 1] - l.center[1]];
        let v = [x[4 * l.id + 2], x[4 * l.id + 3]];
        radius_errors.push((l.id, (norm2(p) - T::one()).abs()));
        speed_errors.push((l.id, (norm2(v) - l.speed).abs() / l.speed));
    }
    let unassigned = followers
        .iter()
        .enumerate()
        .filter(|(fi, _)| held[*fi].is_none())
        .map(|(_, &fid)| fid)
        .collect();
    let final_est_errors = (0..n_agents)
        .map(|i| (sys.estimate(&s, i) - &x).norm())
        .collect();

    Ok(BeeOutcome {
        trace,
        final_state: x,
        final_est_errors,
        counts,
        target_distances,
        radius_errors,
        speed_errors,
        unassigned,
        clamp_events: clamps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn classification_thresholds_estimated_speed() {
        // Speeds 2, 3, 4, 0.1 against threshold 1.
        let xhat = dvector![
            0.0, 0.0, 2.0, 0.0, //
            1.0, 0.0, 0.0, 3.0, //
            2.0, 0.0, 4.0, 0.0, //
            3.0, 0.0, 0.1, 0.0
        ];
        let (l, f) = bee_classify(&xhat, 1.0);
        assert_eq!(l, vec![0, 1, 2]);
        assert_eq!(f, vec![3]);
        // Exactly at the threshold counts as follower.
        let edge = dvector![0.0, 0.0, 1.0, 0.0];
        let (l, f) = bee_classify(&edge, 1.0);
        assert!(l.is_empty() && f == vec![0]);
    }

    #[test]
    fn quotas_follow_largest_remainder() {
        assert_eq!(largest_remainder_quotas(&[2.0, 3.0, 4.0], 9), vec![2, 3, 4]);
        assert_eq!(largest_remainder_quotas(&[2.0, 3.0], 9), vec![4, 5]);
        // Ties go to the lowest index.
        assert_eq!(largest_remainder_quotas(&[1.0, 1.0], 3), vec![2, 1]);
        assert_eq!(largest_remainder_quotas(&[1.0, 2.0], 4), vec![1, 3]);
        assert_eq!(largest_remainder_quotas(&[5.0], 7), vec![7]);
    }

    #[test]
    fn assignment_is_greedy_by_distance_under_quotas() {
        // Two equal-speed leaders, each follower nearest a distinct one.
        let leaders = [(10usize, [0.0, 0.0], 2.0), (11, [10.0, 0.0], 2.0)];
        let followers = [(0usize, [1.0, 0.0]), (1, [9.0, 0.0])];
        let map = bee_assign(&leaders, &followers).unwrap();
        assert_eq!(map, vec![(0, 10), (1, 11)]);

        // Both nearest the first leader: quota forces the second choice.
        let crowded = [(0usize, [1.0, 0.0]), (1, [2.0, 0.0])];
        let map = bee_assign(&leaders, &crowded).unwrap();
        assert_eq!(map, vec![(0, 10), (1, 11)]);

        // One leader takes everyone.
        let solo = [(5usize, [0.0, 0.0], 3.0)];
        let map = bee_assign(&solo, &crowded).unwrap();
        assert_eq!(map, vec![(0, 5), (1, 5)]);

        assert!(matches!(
            bee_assign::<f64>(&[], &crowded),
            Err(ScenarioError::NoLeaders)
        ));
    }

    #[test]
    fn on_orbit_command_is_pure_centripetal() {
        // On the circle at target speed the velocity error vanishes and the
        // command reduces to v_star^2 toward the center.
        let a = circling_leader_accel([1.0f64, 0.0], [0.0, 2.0], [0.0, 0.0], 2.0, 1.0, 4.0);
        assert!((a[0] + 4.0).abs() < 1e-12, "radial {}", a[0]);
        assert!(a[1].abs() < 1e-12);
        // At the center the direction guard keeps the command finite.
        let a = circling_leader_accel([0.0f64, 0.0], [0.0, 0.0], [0.0, 0.0], 2.0, 1.0, 4.0);
        assert!(a.iter().all(|v| v.is_finite()));
        // At rest off-orbit: desired velocity tilts inward at 45 degrees.
        let a = circling_leader_accel([2.0f64, 0.0], [0.0, 0.0], [0.0, 0.0], 2.0, 1.0, 4.0);
        let expect = 8.0 / 2.0f64.sqrt();
        assert!((a[0] + expect).abs() < 1e-12 && (a[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn follower_targets_the_point_left_of_the_leader_heading() {
        // Leader at the origin heading +x: the target is (0, 1).
        let a = bee_follower_accel([0.0f64, 0.0], [0.0, 0.0], [0.0, 0.0], [2.0, 0.0], 1.0, 2.0);
        assert!((a[0] - 0.0).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
        // Sitting at the target with no velocity: no command.
        let a = bee_follower_accel([0.0f64, 1.0], [0.0, 0.0], [0.0, 0.0], [2.0, 0.0], 1.0, 2.0);
        assert!(norm2(a) < 1e-12);
        // Stationary leader: fixed (1, 0) offset.
        let a = bee_follower_accel([0.0f64, 0.0], [0.0, 0.0], [3.0, 0.0], [0.0, 0.0], 1.0, 2.0);
        assert!((a[0] - 4.0).abs() < 1e-12 && a[1].abs() < 1e-12);
        // Damping acts against own velocity.
        let a = bee_follower_accel([0.0f64, 1.0], [1.0, 0.0], [0.0, 0.0], [2.0, 0.0], 1.0, 2.0);
        assert!((a[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn true_state_circling_converges_to_the_orbit() {
        // The law driven by true states, no observer in the loop: from rest
        // three units out, the orbit and speed settle well inside 20 s.
        let v_star = 4.0;
        let mut f = |_t: f64, s: &DVector<f64>| {
            let a = circling_leader_accel(
                [s[0], s[1]],
                [s[2], s[3]],
                [0.0, 0.0],
                v_star,
                1.0,
                4.0,
            );
            dvector![s[2], s[3], a[0], a[1]]
        };
        let mut s = dvector![3.0, 0.0, 0.0, 0.0];
        let dt = 1e-3;
        for k in 0..20_000 {
            s = rk4_step(&mut f, k as f64 * dt, &s, dt);
        }
        let rho = norm2([s[0], s[1]]);
        let speed = norm2([s[2], s[3]]);
        assert!((rho - 1.0).abs() < 0.05, "radius {rho}");
        assert!((speed - v_star).abs() < 0.05 * v_star, "speed {speed}");
        // Anticlockwise: angular momentum about the center is positive.
        assert!(s[0] * s[3] - s[1] * s[2] > 0.0);
    }

    fn small_config() -> BeeConfig<f64> {
        let mut roots = NodeSet::new();
        roots.insert(0);
        BeeConfig {
            graph: Graph::ring(4).unwrap(),
            roots,
            leaders: vec![BeeLeader {
                id: 1,
                center: [1.0, 1.0],
                speed: 2.0,
                stop_at: None,
            }],
            v_star_t: 1.0,
            gains: BeeGains::default(),
            initial_positions: vec![[4.0, 0.0], [2.0, 1.0], [-2.0, 3.0], [0.0, -3.0]],
            params: vec![AdaptiveParams::new(10.0, 4.0, 20.0, 2.0).unwrap()],
            dt: 5e-4,
            t_end: 40.0,
            decision_dt: 0.1,
        }
    }

    #[test]
    fn config_validation_rejects_bad_setups() {
        let mut c = small_config();
        c.v_star_t = 2.5;
        assert!(matches!(run_bee(&c), Err(ScenarioError::BadConfig(_))));
        let mut c = small_config();
        c.leaders[0].id = 9;
        assert!(run_bee(&c).is_err());
        let mut c = small_config();
        c.gains.k_p = 0.0;
        assert!(run_bee(&c).is_err());
    }

    #[test]
    fn followers_gather_at_the_single_circle_center() {
        let out = run_bee(&small_config()).unwrap();
        assert_eq!(out.counts, vec![(1, 3)]);
        assert!(out.unassigned.is_empty());
        for (fid, d) in &out.target_distances {
            assert!(*d < 0.1, "follower {fid} ended {d} from its target");
        }
        for (lid, e) in &out.radius_errors {
            assert!(*e < 0.05, "leader {lid} radius error {e}");
        }
        for (lid, e) in &out.speed_errors {
            assert!(*e < 0.05, "leader {lid} speed error {e}");
        }
        for (i, e) in out.final_est_errors.iter().enumerate() {
            assert!(*e < 0.05, "node {i} estimation error {e}");
        }
    }

    #[test]
    fn stopped_leader_loses_its_followers() {
        let mut roots = NodeSet::new();
        roots.insert(0);
        let cfg = BeeConfig {
            graph: Graph::ring(5).unwrap(),
            roots,
            leaders: vec![
                BeeLeader {
                    id: 1,
                    center: [0.0, 0.0],
                    speed: 2.0,
                    stop_at: None,
                },
                BeeLeader {
                    id: 3,
                    center: [6.0, 0.0],
                    speed: 3.0,
                    stop_at: Some(15.0),
                },
            ],
            v_star_t: 1.0,
            gains: BeeGains::default(),
            initial_positions: vec![
                [2.0, 2.0],
                [1.0, 0.0],
                [3.0, -2.0],
                [7.0, 0.0],
                [4.0, 3.0],
            ],
            params: vec![AdaptiveParams::new(5.0, 2.0, 5.0, 0.5).unwrap()],
            dt: 1e-3,
            t_end: 40.0,
            decision_dt: 0.1,
        };
        let out = run_bee(&cfg).unwrap();
        // Everyone reassigns to the surviving leader.
        assert_eq!(out.counts, vec![(1, 3), (3, 0)]);
        assert!(out.unassigned.is_empty());
        for (fid, d) in &out.target_distances {
            assert!(*d < 0.1, "follower {fid} ended {d} from its target");
        }
        // Only the surviving leader is graded on its orbit.
        assert_eq!(out.radius_errors.len(), 1);
        assert_eq!(out.radius_errors[0].0, 1);
        assert!(out.radius_errors[0].1 < 0.05);
        // The stopped leader braked to a standstill.
        let v9 = norm2([out.final_state[4 * 3 + 2], out.final_state[4 * 3 + 3]]);
        assert!(v9 < 0.1, "stopped leader still moving at {v9}");
    }
}
