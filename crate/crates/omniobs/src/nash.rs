//! Gradient-play Nash equilibrium seeking over an observer network.
//!
//! Each player's action is one agent's state; the player steers its action
//! down its own cost gradient, but evaluates that gradient at its local
//! omniscient *estimate* of the joint action instead of the (unavailable)
//! true joint action. [`distributed_seek`] couples the game to a
//! [`CoupledObserver`] over single-integrator agents; [`centralized_seek`]
//! integrates the idealized pseudogradient flow for comparison.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::numerics::{rk4_step, IntegrateError, Trajectory};
use crate::scalar::{cv, to_f64, Scalar};
use crate::sim::{field, CoupledObserver, InitMode, SimError};

#[derive(Debug, Error)]
pub enum NashError {
    #[error("invalid game: {0}")]
    BadGame(String),
    #[error("game map is not strongly monotone: min symmetric eigenvalue {lambda_min}")]
    NotMonotone { lambda_min: f64 },
    #[error("equilibrium system is singular")]
    Singular,
    #[error("game does not fit the observer network: {0}")]
    SetupMismatch(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

type Gradient<T> = Box<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>;

/// A game described by each player's own-cost gradient, as a function of
/// the joint action.
pub struct Game<T: Scalar> {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    grads: Vec<Gradient<T>>,
}

impl<T: Scalar> Game<T> {
    /// `grads[i]` must map a joint action of total dimension to a vector of
    /// length `dims[i]`.
    pub fn new(dims: Vec<usize>, grads: Vec<Gradient<T>>) -> Result<Self, NashError> {
        if dims.is_empty() || dims.iter().any(|d| *d == 0) {
            return Err(NashError::BadGame(
                "every player needs a nonempty action".into(),
            ));
        }
        if dims.len() != grads.len() {
            return Err(NashError::BadGame(format!(
                "{} action dims for {} gradients",
                dims.len(),
                grads.len()
            )));
        }
        let mut offsets = vec![0];
        for d in &dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        Ok(Self {
            dims,
            offsets,
            grads,
        })
    }

    pub fn n_players(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Player `i`'s gradient at the joint action `x`.
    pub fn player_gradient(&self, i: usize, x: &DVector<T>) -> DVector<T> {
        let g = (self.grads[i])(x);
        assert_eq!(
            g.len(),
            self.dims[i],
            "gradient of player {i} has the wrong length"
        );
        g
    }

    /// All players' gradients stacked in player order.
    pub fn pseudogradient(&self, x: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.total_dim());
        for i in 0..self.n_players() {
            out.rows_mut(self.offsets[i], self.dims[i])
                .copy_from(&self.player_gradient(i, x));
        }
        out
    }

    /// Samples pairs in `[-halfwidth, halfwidth]^n` and reports whether the
    /// pseudogradient looked monotone on every pair.
    pub fn spot_check_monotone<R: Rng>(
        &self,
        samples: usize,
        halfwidth: T,
        rng: &mut R,
    ) -> bool {
        let n = self.total_dim();
        let hw = to_f64(halfwidth);
        for _ in 0..samples {
            let x = DVector::from_fn(n, |_, _| cv::<T>(rng.random_range(-hw..hw)));
            let y = DVector::from_fn(n, |_, _| cv::<T>(rng.random_range(-hw..hw)));
            let gap = (self.pseudogradient(&x) - self.pseudogradient(&y)).dot(&(&x - &y));
            if gap < -cv::<T>(1e-9) * (T::one() + (&x - &y).norm_squared()) {
                return false;
            }
        }
        true
    }
}

/// Whether one pair satisfies the relaxed smoothness bound
/// `|F(x) - F(x')|^2 <= chi |x - x'|^2 + chi_s |x - x'|`.
pub fn relaxed_lipschitz_pair<T: Scalar>(
    game: &Game<T>,
    chi: T,
    chi_s: T,
    x: &DVector<T>,
    xp: &DVector<T>,
) -> bool {
    let lhs = (game.pseudogradient(x) - game.pseudogradient(xp)).norm_squared();
    let d = (x - xp).norm();
    let rhs = chi * d * d + chi_s * d;
    lhs <= rhs + cv::<T>(1e-9) * (T::one() + rhs)
}

/// Samples pairs in `[-halfwidth, halfwidth]^n` and reports whether the
/// relaxed smoothness bound held on all of them.
pub fn check_relaxed_lipschitz<T: Scalar, R: Rng>(
    game: &Game<T>,
    chi: T,
    chi_s: T,
    samples: usize,
    halfwidth: T,
    rng: &mut R,
) -> bool {
    let n = game.total_dim();
    let hw = to_f64(halfwidth);
    for _ in 0..samples {
        let x = DVector::from_fn(n, |_, _| cv::<T>(rng.random_range(-hw..hw)));
        let xp = DVector::from_fn(n, |_, _| cv::<T>(rng.random_range(-hw..hw)));
        if !relaxed_lipschitz_pair(game, chi, chi_s, &x, &xp) {
            return false;
        }
    }
    true
}

/// A game whose pseudogradient is affine, `F(x) = Q x + r`.
///
/// Requires the symmetric part of `Q` to be positive definite, which makes
/// the map strongly monotone and the equilibrium unique.
pub struct QuadraticGame<T: Scalar> {
    q: DMatrix<T>,
    r: DVector<T>,
    dims: Vec<usize>,
}

impl<T: Scalar> QuadraticGame<T> {
    pub fn new(q: DMatrix<T>, r: DVector<T>, dims: Vec<usize>) -> Result<Self, NashError> {
        let n: usize = dims.iter().sum();
        if dims.is_empty() || dims.iter().any(|d| *d == 0) {
            return Err(NashError::BadGame(
                "every player needs a nonempty action".into(),
            ));
        }
        if q.shape() != (n, n) || r.len() != n {
            return Err(NashError::BadGame(format!(
                "pseudogradient shapes {:?} and {} do not match total dimension {n}",
                q.shape(),
                r.len()
            )));
        }
        let sym = (&q + q.transpose()) * cv::<T>(0.5);
        let lambda_min = sym
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, l| acc.min(to_f64(*l)));
        if !(lambda_min > 0.0) {
            return Err(NashError::NotMonotone { lambda_min });
        }
        Ok(Self { q, r, dims })
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn r(&self) -> &DVector<T> {
        &self.r
    }

    /// The unique equilibrium, solved directly and residual-checked.
    pub fn ne_oracle(&self) -> Result<DVector<T>, NashError> {
        let x = self
            .q
            .clone()
            .lu()
            .solve(&(-&self.r))
            .ok_or(NashError::Singular)?;
        let residual = (&self.q * &x + &self.r).norm();
        if residual > cv::<T>(1e-10) * (T::one() + self.r.norm()) {
            return Err(NashError::Singular);
        }
        Ok(x)
    }

    /// Boxes the row blocks of the affine map into a [`Game`].
    pub fn to_game(&self) -> Game<T> {
        let mut grads: Vec<Gradient<T>> = Vec::with_capacity(self.dims.len());
        let mut off = 0;
        for d in &self.dims {
            let qi = self.q.rows(off, *d).into_owned();
            let ri = self.r.rows(off, *d).into_owned();
            grads.push(Box::new(move |x: &DVector<T>| &qi * x + &ri));
            off += d;
        }
        Game::new(self.dims.clone(), grads).expect("shapes were validated")
    }
}

/// Default norm bound on each player's action rate.
pub const DEFAULT_ACTION_CLAMP: f64 = 1e3;

/// Integrates the idealized pseudogradient flow `dx = -F(x)`.
pub fn centralized_seek<T: Scalar>(
    game: &Game<T>,
    x0: &DVector<T>,
    t_end: T,
    dt: T,
) -> Result<Trajectory<T>, NashError> {
    if x0.len() != game.total_dim() {
        return Err(NashError::SetupMismatch(format!(
            "start point has length {}, game has dimension {}",
            x0.len(),
            game.total_dim()
        )));
    }
    let mut f = |_t: T, x: &DVector<T>| -game.pseudogradient(x);
    Ok(crate::numerics::integrate(&mut f, x0, t_end, dt)?)
}

/// Result of a distributed seeking run.
pub struct SeekOutcome<T: Scalar> {
    /// Downsampled time grid for `actions` (every 10th step plus the last).
    pub times: Vec<T>,
    /// Joint action at the downsampled times.
    pub actions: Vec<DVector<T>>,
    /// Per-node estimation error norms at the downsampled times.
    pub est_errors: Vec<Vec<T>>,
    pub final_actions: DVector<T>,
    /// Each node's final estimate of the joint action.
    pub final_estimates: Vec<DVector<T>>,
    /// Full-rate time grid for `gains`.
    pub gain_times: Vec<T>,
    /// Adaptive gains `(gamma, gamma_s)` per step, indexed `[step][node]`.
    pub gains: Vec<Vec<(T, T)>>,
    /// Integration-stage gradient evaluations that hit the rate clamp.
    pub clamp_stage_events: usize,
}

/// Runs gradient play through the observer network.
///
/// The network's plant must be a stack of pure integrators (`A = 0`,
/// `B = I`) whose agent state blocks match the game's action dims; each
/// agent's input is its player's clamped gradient step evaluated at that
/// agent's own estimate of the joint action.
pub fn distributed_seek<T: Scalar>(
    sys: &CoupledObserver<T>,
    game: &Game<T>,
    x0: &DVector<T>,
    t_end: T,
    dt: T,
    u_max: T,
) -> Result<SeekOutcome<T>, NashError> {
    let design = sys.design();
    let n = design.plant.state_dim();
    if game.total_dim() != n {
        return Err(NashError::SetupMismatch(format!(
            "game dimension {} vs plant dimension {n}",
            game.total_dim()
        )));
    }
    let agent_dims: Vec<usize> = (0..design.n_agents())
        .map(|i| design.plant.state_block(i).1)
        .collect();
    if agent_dims != game.dims() {
        return Err(NashError::SetupMismatch(format!(
            "agent state blocks {agent_dims:?} vs action dims {:?}",
            game.dims()
        )));
    }
    let drift = design.plant.a.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if drift > cv::<T>(1e-12) {
        return Err(NashError::SetupMismatch(
            "agents must be pure integrators (A = 0)".into(),
        ));
    }
    let b_defect = (&design.plant.b - DMatrix::<T>::identity(n, n))
        .iter()
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    if b_defect > cv::<T>(1e-12) {
        return Err(NashError::SetupMismatch(
            "agents must be driven directly (B = I)".into(),
        ));
    }
    if !(dt > T::zero()) || !(t_end > dt) {
        return Err(NashError::SetupMismatch("bad time grid".into()));
    }

    let steps = to_f64((t_end / dt).round()) as usize;
    let mut clamps = 0usize;
    let mut s = sys.init_state(x0, InitMode::ZeroInternal)?;
    let n_nodes = design.n_agents();

    let mut times = Vec::new();
    let mut actions = Vec::new();
    let mut est_errors = Vec::new();
    let mut gain_times = Vec::with_capacity(steps + 1);
    let mut gains = Vec::with_capacity(steps + 1);

    for k in 0..=steps {
        let t = dt * cv::<T>(k as f64);
        gain_times.push(t);
        gains.push((0..n_nodes).map(|i| sys.gains(&s, i)).collect());
        if k % 10 == 0 || k == steps {
            times.push(t);
            let x = sys.plant_state(&s);
            est_errors.push((0..n_nodes).map(|i| (sys.estimate(&s, i) - &x).norm()).collect());
            actions.push(x);
        }
        if k == steps {
            break;
        }
        let mut f = field(sys, |_t: T, state: &DVector<T>| {
            let mut u = DVector::zeros(n);
            for i in 0..n_nodes {
                let xhat = sys.estimate(state, i);
                let mut g = -game.player_gradient(i, &xhat);
                let norm = g.norm();
                if norm > u_max {
                    g *= u_max / norm;
                    clamps += 1;
                }
                let (off, len) = design.plant.state_block(i);
                u.rows_mut(off, len).copy_from(&g);
            }
            u
        });
        s = rk4_step(&mut f, t, &s, dt);
        if s.iter().any(|v| !v.is_finite()) {
            return Err(NashError::Integrate(IntegrateError::NonFinite {
                t: to_f64(t),
            }));
        }
    }

    let final_actions = sys.plant_state(&s);
    let final_estimates = sys.estimates(&s);
    Ok(SeekOutcome {
        times,
        actions,
        est_errors,
        final_actions,
        final_estimates,
        gain_times,
        gains,
        clamp_stage_events: clamps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::observer::AdaptiveParams;
    use crate::synthesis::{synth_hetero, AgentModel};
    use nalgebra::{dmatrix, dvector};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_player_quadratic() -> QuadraticGame<f64> {
        QuadraticGame::new(
            dmatrix![2.0, 1.0; 1.0, 2.0],
            dvector![-3.0, -3.0],
            vec![1, 1],
        )
        .unwrap()
    }

    #[test]
    fn oracle_solves_the_affine_system() {
        let game = two_player_quadratic();
        let ne = game.ne_oracle().unwrap();
        assert!((ne - dvector![1.0, 1.0]).norm() < 1e-12);
    }

    #[test]
    fn monotonicity_is_enforced() {
        let res = QuadraticGame::new(
            dmatrix![1.0, 0.0; 0.0, -1.0],
            dvector![0.0, 0.0],
            vec![1, 1],
        );
        assert!(matches!(res, Err(NashError::NotMonotone { .. })));
    }

    #[test]
    fn centralized_flow_reaches_the_equilibrium() {
        let game = two_player_quadratic();
        let traj = centralized_seek(
            &game.to_game(),
            &dvector![5.0, -4.0],
            20.0,
            1e-3,
        )
        .unwrap();
        let ne = game.ne_oracle().unwrap();
        assert!((traj.last_state() - ne).norm() < 1e-6);
    }

    #[test]
    fn pseudogradient_stacks_player_blocks() {
        let game = two_player_quadratic().to_game();
        let f = game.pseudogradient(&dvector![1.0, 1.0]);
        assert!((f - dvector![0.0, 0.0]).norm() < 1e-12);
        assert_eq!(game.n_players(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(game.spot_check_monotone(200, 5.0, &mut rng));
    }

    fn sqrt_game() -> Game<f64> {
        // Scalar map x + sign(x) sqrt(|x|): monotone but not Lipschitz at
        // the origin, the motivating case for the relaxed bound.
        Game::new(
            vec![1],
            vec![Box::new(|x: &DVector<f64>| {
                let v = x[0];
                dvector![v + v.signum() * v.abs().sqrt()]
            })],
        )
        .unwrap()
    }

    #[test]
    fn relaxed_bound_constants_for_the_sqrt_map() {
        let game = sqrt_game();
        let x = dvector![1.0];
        let xp = dvector![-1.0];
        // (2, 2) fails at the witness pair: gap 16 > 2*4 + 2*2.
        assert!(!relaxed_lipschitz_pair(&game, 2.0, 2.0, &x, &xp));
        // (2, 4) holds there with equality, and across samples.
        assert!(relaxed_lipschitz_pair(&game, 2.0, 4.0, &x, &xp));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(check_relaxed_lipschitz(&game, 2.0, 4.0, 500, 2.0, &mut rng));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(!check_relaxed_lipschitz(&game, 0.1, 0.1, 500, 2.0, &mut rng));
        // No plain Lipschitz constant exists: the gap near zero scales like
        // sqrt of the argument gap.
        let gap = (game.pseudogradient(&dvector![1e-8]) - game.pseudogradient(&dvector![0.0]))
            .norm();
        assert!(gap > 1e3 * 1e-8);
    }

    #[test]
    fn affine_maps_satisfy_a_plain_lipschitz_bound() {
        let game = two_player_quadratic().to_game();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // |Q| <= 3, so chi = 9 with no sliding slack suffices.
        assert!(check_relaxed_lipschitz(&game, 9.0, 0.0, 500, 5.0, &mut rng));
    }

    fn integrator_network(n_players: usize) -> CoupledObserver<f64> {
        let model =
            AgentModel::new(dmatrix![0.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let models = vec![model; n_players];
        let graph = Graph::<f64>::ring(n_players).unwrap();
        let design = synth_hetero(&models, &graph).unwrap();
        CoupledObserver::new(
            design,
            vec![AdaptiveParams::new(1.0, 1.0, 1.0, 1.0).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn distributed_seek_validates_the_setup() {
        let sys = integrator_network(2);
        let game = QuadraticGame::new(dmatrix![1.0], dvector![0.0], vec![1])
            .unwrap()
            .to_game();
        assert!(matches!(
            distributed_seek(&sys, &game, &dvector![0.0, 0.0], 1.0, 1e-3, 1e3),
            Err(NashError::SetupMismatch(_))
        ));
    }

    #[test]
    fn distributed_seek_tracks_the_oracle() {
        let sys = integrator_network(2);
        let game = two_player_quadratic();
        let out = distributed_seek(
            &sys,
            &game.to_game(),
            &dvector![4.0, -3.0],
            30.0,
            1e-3,
            1e3,
        )
        .unwrap();
        let ne = game.ne_oracle().unwrap();
        let err = (&out.final_actions - &ne).norm();
        assert!(err < 1e-2, "reached {:?}, oracle {ne:?}", out.final_actions);
        // Every node's estimate agrees with the true joint action.
        for (i, est) in out.final_estimates.iter().enumerate() {
            assert!(
                (est - &out.final_actions).norm() < 1e-2,
                "node {i} estimate off"
            );
        }
        // Gains recorded at full rate and nondecreasing.
        assert_eq!(out.gains.len(), 30001);
        let g0 = out.gains[0][0].0;
        let gf = out.gains.last().unwrap()[0].0;
        assert!(gf >= g0);
    }
}
