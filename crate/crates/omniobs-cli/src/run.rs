//! Experiment execution: build from config, synthesize, verify, integrate,
//! write artifacts.
//!
//! Every run leaves the same five files in the output directory:
//! `trajectory.csv`, `estimation_errors.csv`, `adaptive_gains.csv` (each a
//! `t,...` table at every tenth integrator step), `constraint_report.json`
//! (the synthesis verification), and `metrics.json`. File contents depend
//! only on the config and the seed, so a rerun is byte-identical.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use omniobs::nash::{
    distributed_seek, NashError, QuadraticGame, SeekOutcome, DEFAULT_ACTION_CLAMP,
};
use omniobs::numerics::{rk4_step, IntegrateError};
use omniobs::scenarios::{
    largest_remainder_quotas, run_bee, run_herding, BeeConfig, HerdingConfig, ScenarioError, Trace,
    TRACE_STRIDE,
};
use omniobs::sim::{field, CoupledObserver, InitMode};
use omniobs::synthesis::{synth_extension, synth_hetero, synth_homo, AgentModel, ObserverDesign};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config::{
    build_bee_gains, build_bee_leaders, build_graph, build_matrix, build_model, build_params,
    build_roots, build_schedule, build_x0, zero_based, BeeSpec, ExperimentConfig, ExtensionSpec,
    HerdingSpec, HeteroSpec, HomoSpec, NashSpec, ObserverPathSpec, SinusoidSpec,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("constraint verification failed: {0}")]
    ConstraintViolation(String),
    #[error("state became non-finite near t = {t}")]
    NonFinite { t: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::ConfigInvalid(_) | RunError::Io(_) => 1,
            RunError::ConstraintViolation(_) => 2,
            RunError::NonFinite { .. } => 3,
        }
    }
}

fn invalid<E: std::fmt::Display>(e: E) -> RunError {
    RunError::ConfigInvalid(e.to_string())
}

fn scenario_err(e: ScenarioError) -> RunError {
    match e {
        ScenarioError::Integrate(IntegrateError::NonFinite { t }) => RunError::NonFinite { t },
        other => RunError::ConfigInvalid(other.to_string()),
    }
}

fn nash_err(e: NashError) -> RunError {
    match e {
        NashError::Integrate(IntegrateError::NonFinite { t }) => RunError::NonFinite { t },
        other => RunError::ConfigInvalid(other.to_string()),
    }
}

// Summary thresholds; the acceptance suite pins the same numbers.
pub const EST_ERROR_TOL: f64 = 1e-2;
pub const GAIN_TAIL_TOL: f64 = 1e-4;
pub const NE_DISTANCE_TOL: f64 = 1e-3;
pub const HULL_TOL: f64 = 5e-2;
pub const STATIONARY_TOL: f64 = 1e-6;
pub const TARGET_TOL: f64 = 1e-1;
pub const RADIUS_TOL: f64 = 5e-2;
pub const SPEED_REL_TOL: f64 = 5e-2;

#[derive(Debug, Serialize)]
pub struct NashMetrics {
    pub equilibrium: Vec<f64>,
    pub final_actions: Vec<f64>,
    pub distance_to_equilibrium: f64,
    pub clamp_stage_events: usize,
}

#[derive(Debug, Serialize)]
pub struct HerdingMetrics {
    pub first_decision_time: Option<f64>,
    pub max_pre_decision_speed: f64,
    pub max_pre_decision_displacement: f64,
    /// 1-based follower id with its final distance to the leaders' hull.
    pub hull_distances: Vec<(usize, f64)>,
    pub max_hull_distance: f64,
}

#[derive(Debug, Serialize)]
pub struct BeeMetrics {
    /// 1-based leader id with how many followers ended up assigned to it.
    pub counts: Vec<(usize, usize)>,
    /// Speed-proportional shares over the leaders still circling at the end.
    pub expected_counts: Vec<(usize, usize)>,
    pub target_distances: Vec<(usize, f64)>,
    pub max_target_distance: f64,
    pub radius_errors: Vec<(usize, f64)>,
    pub speed_errors: Vec<(usize, f64)>,
    pub unassigned: Vec<usize>,
    pub clamp_events: usize,
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub kind: String,
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub n_agents: usize,
    pub state_dim: usize,
    /// Per-node estimation error norm at the final time.
    pub final_est_errors: Vec<f64>,
    pub max_final_est_error: f64,
    /// Per-node `(gamma, gamma_s)` at the final time.
    pub final_gains: Vec<[f64; 2]>,
    /// Per-node gain growth over the last tenth of the run.
    pub gain_tail_increase: Vec<[f64; 2]>,
    pub max_gain_tail_increase: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux_final_errors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nash: Option<NashMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub herding: Option<HerdingMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bee: Option<BeeMetrics>,
}

/// Downsampled history every kind produces, ready for the CSV files.
struct RunData {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    est_errors: Vec<Vec<f64>>,
    /// Per row: `gamma_1, gamma_s1, ..., gamma_N, gamma_sN`.
    gains: Vec<Vec<f64>>,
    final_est_errors: Vec<f64>,
    aux_final_errors: Option<Vec<f64>>,
}

pub fn execute(
    cfg: &ExperimentConfig,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<Metrics, RunError> {
    let seed = seed_override.unwrap_or_else(|| cfg.seed());
    let (dt, t_end) = cfg.dt_t_end();
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(RunError::ConfigInvalid("dt must be positive and finite".into()));
    }
    if !(t_end > dt) || !t_end.is_finite() {
        return Err(RunError::ConfigInvalid("t_end must exceed dt and be finite".into()));
    }
    match cfg {
        ExperimentConfig::HeteroObserver(s) => run_hetero(s, out, seed),
        ExperimentConfig::HomoObserver(s) => run_homo(s, out, seed),
        ExperimentConfig::ExtensionObserver(s) => run_extension(s, out, seed),
        ExperimentConfig::Nash(s) => run_nash(s, out, seed),
        ExperimentConfig::Herding(s) => run_herding_kind(s, out, seed),
        ExperimentConfig::Bee(s) => run_bee_kind(s, out, seed),
    }
}

fn run_hetero(spec: &HeteroSpec, out: &Path, seed: u64) -> Result<Metrics, RunError> {
    let graph = build_graph(&spec.graph).map_err(RunError::ConfigInvalid)?;
    let n = graph.node_count();
    if spec.agents.len() != n {
        return Err(RunError::ConfigInvalid(format!(
            "{} agent models for a graph of {n} nodes",
            spec.agents.len()
        )));
    }
    let models: Vec<AgentModel<f64>> = spec
        .agents
        .iter()
        .enumerate()
        .map(|(i, m)| build_model(m, &format!("agent {}", i + 1)))
        .collect::<Result<_, _>>()
        .map_err(RunError::ConfigInvalid)?;
    let design = synth_hetero(&models, &graph).map_err(invalid)?;
    verify_and_report(&design, out)?;
    let sys = CoupledObserver::new(design, build_params(&spec.params, n).map_err(RunError::ConfigInvalid)?)
        .map_err(invalid)?;
    let x0 = build_x0(&spec.x0, sys.design().plant.state_dim()).map_err(RunError::ConfigInvalid)?;
    let sins = resolve_inputs(&spec.inputs, sys.design().plant.input_dim(), seed)?;
    let data = integrate_observer(&sys, &x0, &sins, spec.dt, spec.t_end)?;
    finish("hetero-observer", seed, spec.dt, spec.t_end, &sys, data, out, None, None, None)
}

fn run_homo(spec: &HomoSpec, out: &Path, seed: u64) -> Result<Metrics, RunError> {
    let graph = build_graph(&spec.graph).map_err(RunError::ConfigInvalid)?;
    let n = graph.node_count();
    let model = build_model(&spec.model, "agent").map_err(RunError::ConfigInvalid)?;
    let roots = build_roots(&spec.roots, n).map_err(RunError::ConfigInvalid)?;
    if roots.is_empty() {
        return Err(RunError::ConfigInvalid("at least one root is required".into()));
    }
    let design = synth_homo(&model, &graph, &roots).map_err(invalid)?;
    verify_and_report(&design, out)?;
    let sys = CoupledObserver::new(design, build_params(&spec.params, n).map_err(RunError::ConfigInvalid)?)
        .map_err(invalid)?;
    let x0 = build_x0(&spec.x0, sys.design().plant.state_dim()).map_err(RunError::ConfigInvalid)?;
    let sins = resolve_inputs(&spec.inputs, sys.design().plant.input_dim(), seed)?;
    let data = integrate_observer(&sys, &x0, &sins, spec.dt, spec.t_end)?;
    finish("homo-observer", seed, spec.dt, spec.t_end, &sys, data, out, None, None, None)
}

fn run_extension(spec: &ExtensionSpec, out: &Path, seed: u64) -> Result<Metrics, RunError> {
    let graph = build_graph(&spec.graph).map_err(RunError::ConfigInvalid)?;
    let n = graph.node_count();
    let model = build_model(&spec.model, "agent").map_err(RunError::ConfigInvalid)?;
    let design = synth_extension(&model, &graph, &spec.weights, spec.margin).map_err(invalid)?;
    verify_and_report(&design, out)?;
    let sys = CoupledObserver::new(design, build_params(&spec.params, n).map_err(RunError::ConfigInvalid)?)
        .map_err(invalid)?;
    let x0 = build_x0(&spec.x0, sys.design().plant.state_dim()).map_err(RunError::ConfigInvalid)?;
    let sins = resolve_inputs(&spec.inputs, sys.design().plant.input_dim(), seed)?;
    let data = integrate_observer(&sys, &x0, &sins, spec.dt, spec.t_end)?;
    finish("extension-observer", seed, spec.dt, spec.t_end, &sys, data, out, None, None, None)
}

fn run_nash(spec: &NashSpec, out: &Path, seed: u64) -> Result<Metrics, RunError> {
    let graph = build_graph(&spec.graph).map_err(RunError::ConfigInvalid)?;
    let n = graph.node_count();
    if spec.dims.len() != n {
        return Err(RunError::ConfigInvalid(format!(
            "{} player dimensions for a graph of {n} nodes",
            spec.dims.len()
        )));
    }
    let q = build_matrix(&spec.q, "q").map_err(RunError::ConfigInvalid)?;
    let r = DVector::from_column_slice(&spec.r);
    let game = QuadraticGame::new(q, r, spec.dims.clone()).map_err(nash_err)?;
    let ne = game.ne_oracle().map_err(nash_err)?;

    let models: Vec<AgentModel<f64>> = spec
        .dims
        .iter()
        .map(|&d| {
            AgentModel::new(
                DMatrix::zeros(d, d),
                DMatrix::identity(d, d),
                DMatrix::identity(d, d),
            )
            .map_err(invalid)
        })
        .collect::<Result<_, _>>()?;
    let design = match &spec.observer {
        ObserverPathSpec::Hetero => synth_hetero(&models, &graph).map_err(invalid)?,
        ObserverPathSpec::Homo { roots } => {
            if spec.dims.windows(2).any(|w| w[0] != w[1]) {
                return Err(RunError::ConfigInvalid(
                    "the homo observer path needs identical player dimensions".into(),
                ));
            }
            let roots = build_roots(roots, n).map_err(RunError::ConfigInvalid)?;
            synth_homo(&models[0], &graph, &roots).map_err(invalid)?
        }
    };
    verify_and_report(&design, out)?;
    let sys = CoupledObserver::new(design, build_params(&spec.params, n).map_err(RunError::ConfigInvalid)?)
        .map_err(invalid)?;
    let x0 = build_x0(&spec.x0, spec.dims.iter().sum()).map_err(RunError::ConfigInvalid)?;
    let u_max = spec.u_max.unwrap_or(DEFAULT_ACTION_CLAMP);
    if !(u_max > 0.0) || !u_max.is_finite() {
        return Err(RunError::ConfigInvalid("u_max must be positive and finite".into()));
    }
    let outcome = distributed_seek(&sys, &game.to_game(), &x0, spec.t_end, spec.dt, u_max)
        .map_err(nash_err)?;

    let nash_metrics = NashMetrics {
        equilibrium: ne.iter().copied().collect(),
        final_actions: outcome.final_actions.iter().copied().collect(),
        distance_to_equilibrium: (&outcome.final_actions - &ne).norm(),
        clamp_stage_events: outcome.clamp_stage_events,
    };
    let data = seek_data(&sys, &outcome);
    finish("nash", seed, spec.dt, spec.t_end, &sys, data, out, Some(nash_metrics), None, None)
}

fn run_herding_kind(spec: &HerdingSpec, out: &Path, seed: u64) -> Result<Metrics, RunError> {
    let graph = build_graph(&spec.graph).map_err(RunError::ConfigInvalid)?;
    let n = graph.node_count();
    let roots = build_roots(&spec.roots, n).map_err(RunError::ConfigInvalid)?;
    let leaders: Vec<usize> = spec
        .leaders
        .iter()
        .map(|&id| zero_based(id, n, "leader"))
        .collect::<Result<_, _>>()
        .map_err(RunError::ConfigInvalid)?;
    let schedules = spec
        .schedules
        .iter()
        .map(|s| build_schedule(s))
        .collect::<Result<_, _>>()
        .map_err(RunError::ConfigInvalid)?;
    let params = build_params(&spec.params, n).map_err(RunError::ConfigInvalid)?;

    // The same design the scenario builds internally, so the report
    // describes what actually runs.
    let eye3 = DMatrix::<f64>::identity(3, 3);
    let model = AgentModel::new(DMatrix::zeros(3, 3), eye3.clone(), eye3).map_err(invalid)?;
    let design = synth_homo(&model, &graph, &roots).map_err(invalid)?;
    verify_and_report(&design, out)?;
    let sys = CoupledObserver::new(design, params.clone()).map_err(invalid)?;

    let cfg = HerdingConfig {
        graph,
        roots,
        leaders,
        schedules,
        initial_positions: spec.initial_positions.clone(),
        z_star: spec.z_star,
        z_star_t: spec.z_star_t,
        k_f: spec.k_f,
        params,
        dt: spec.dt,
        t_end: spec.t_end,
        decision_dt: spec.decision_dt,
    };
    let outcome = run_herding(&cfg).map_err(scenario_err)?;

    let hull_distances: Vec<(usize, f64)> =
        outcome.hull_distances.iter().map(|&(i, d)| (i + 1, d)).collect();
    let herding_metrics = HerdingMetrics {
        first_decision_time: outcome.first_decision_time,
        max_pre_decision_speed: outcome.max_pre_decision_speed,
        max_pre_decision_displacement: outcome.max_pre_decision_displacement,
        max_hull_distance: hull_distances.iter().map(|&(_, d)| d).fold(0.0, f64::max),
        hull_distances,
    };
    let data = trace_data(&outcome.trace, outcome.final_est_errors.clone());
    finish("herding", seed, spec.dt, spec.t_end, &sys, data, out, None, Some(herding_metrics), None)
}

fn run_bee_kind(spec: &BeeSpec, out: &Path, seed: u64) -> Result<Metrics, RunError> {
    let graph = build_graph(&spec.graph).map_err(RunError::ConfigInvalid)?;
    let n = graph.node_count();
    let roots = build_roots(&spec.roots, n).map_err(RunError::ConfigInvalid)?;
    let leaders = build_bee_leaders(&spec.leaders, n).map_err(RunError::ConfigInvalid)?;
    let params = build_params(&spec.params, n).map_err(RunError::ConfigInvalid)?;

    let model = bee_agent_model().map_err(invalid)?;
    let design = synth_homo(&model, &graph, &roots).map_err(invalid)?;
    verify_and_report(&design, out)?;
    let sys = CoupledObserver::new(design, params.clone()).map_err(invalid)?;

    let cfg = BeeConfig {
        graph,
        roots,
        leaders,
        v_star_t: spec.v_star_t,
        gains: build_bee_gains(&spec.gains),
        initial_positions: spec.initial_positions.clone(),
        params,
        dt: spec.dt,
        t_end: spec.t_end,
        decision_dt: spec.decision_dt,
    };
    let outcome = run_bee(&cfg).map_err(scenario_err)?;

    // Shares a still-circling leader should end up with: quotas over the
    // active speeds, zero for leaders that stop before the end.
    let active: Vec<(usize, f64)> = cfg
        .leaders
        .iter()
        .filter(|l| l.stop_at.map_or(true, |ts| ts > spec.t_end))
        .map(|l| (l.id, l.speed))
        .collect();
    let n_followers = n - cfg.leaders.len();
    let mut expected: Vec<(usize, usize)> = cfg.leaders.iter().map(|l| (l.id + 1, 0)).collect();
    if !active.is_empty() {
        let speeds: Vec<f64> = active.iter().map(|&(_, s)| s).collect();
        for (&(id, _), q) in active.iter().zip(largest_remainder_quotas(&speeds, n_followers)) {
            if let Some(e) = expected.iter_mut().find(|e| e.0 == id + 1) {
                e.1 = q;
            }
        }
    }

    let counts: Vec<(usize, usize)> = outcome.counts.iter().map(|&(i, c)| (i + 1, c)).collect();
    let target_distances: Vec<(usize, f64)> =
        outcome.target_distances.iter().map(|&(i, d)| (i + 1, d)).collect();
    let bee_metrics = BeeMetrics {
        counts,
        expected_counts: expected,
        max_target_distance: target_distances.iter().map(|&(_, d)| d).fold(0.0, f64::max),
        target_distances,
        radius_errors: outcome.radius_errors.iter().map(|&(i, d)| (i + 1, d)).collect(),
        speed_errors: outcome.speed_errors.iter().map(|&(i, d)| (i + 1, d)).collect(),
        unassigned: outcome.unassigned.iter().map(|&i| i + 1).collect(),
        clamp_events: outcome.clamp_events,
    };
    let data = trace_data(&outcome.trace, outcome.final_est_errors.clone());
    finish("bee", seed, spec.dt, spec.t_end, &sys, data, out, None, None, Some(bee_metrics))
}

/// Planar double integrator measured in position, the model `run_bee` uses.
fn bee_agent_model() -> Result<AgentModel<f64>, omniobs::synthesis::SynthesisError> {
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    let mut b = DMatrix::zeros(4, 2);
    b[(2, 0)] = 1.0;
    b[(3, 1)] = 1.0;
    let mut c = DMatrix::zeros(2, 4);
    c[(0, 0)] = 1.0;
    c[(1, 1)] = 1.0;
    AgentModel::new(a, b, c)
}

fn verify_and_report(design: &ObserverDesign<f64>, out: &Path) -> Result<(), RunError> {
    let report = design.verify();
    let json = serde_json::to_string_pretty(&report).map_err(invalid)?;
    fs::write(out.join("constraint_report.json"), json + "\n")?;
    if !report.all_pass {
        let worst = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
            .expect("a failing report has a failing check");
        return Err(RunError::ConstraintViolation(format!(
            "{} residual {:.3e}",
            worst.name, worst.residual
        )));
    }
    Ok(())
}

fn resolve_inputs(
    explicit: &Option<Vec<SinusoidSpec>>,
    m: usize,
    seed: u64,
) -> Result<Vec<SinusoidSpec>, RunError> {
    match explicit {
        Some(v) => {
            if v.len() != m {
                return Err(RunError::ConfigInvalid(format!(
                    "{} input signals for {m} input channels",
                    v.len()
                )));
            }
            if v.iter().any(|s| {
                !s.amplitude.is_finite() || !s.frequency.is_finite() || !s.phase.is_finite()
            }) {
                return Err(RunError::ConfigInvalid("input signals must be finite".into()));
            }
            Ok(v.clone())
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..m)
                .map(|_| SinusoidSpec {
                    amplitude: rng.random_range(0.5..1.5),
                    frequency: rng.random_range(0.2..2.0),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                })
                .collect())
        }
    }
}

fn sample_inputs(sins: &[SinusoidSpec], t: f64) -> DVector<f64> {
    DVector::from_iterator(
        sins.len(),
        sins.iter().map(|s| s.amplitude * (s.frequency * t + s.phase).sin()),
    )
}

/// Open-loop integration of an observer network under sinusoidal inputs.
fn integrate_observer(
    sys: &CoupledObserver<f64>,
    x0: &DVector<f64>,
    sins: &[SinusoidSpec],
    dt: f64,
    t_end: f64,
) -> Result<RunData, RunError> {
    let steps = (t_end / dt).round() as usize;
    let n_nodes = sys.design().n_agents();
    let mut s = sys.init_state(x0, InitMode::ZeroInternal).map_err(invalid)?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut est_errors = Vec::new();
    let mut gains = Vec::new();
    for k in 0..=steps {
        let t = k as f64 * dt;
        if k % TRACE_STRIDE == 0 || k == steps {
            let x = sys.plant_state(&s);
            times.push(t);
            est_errors.push((0..n_nodes).map(|i| (sys.estimate(&s, i) - &x).norm()).collect());
            gains.push(gain_row(sys, &s));
            states.push(x.iter().copied().collect());
        }
        if k == steps {
            break;
        }
        let mut f = field(sys, |tt: f64, _s: &DVector<f64>| sample_inputs(sins, tt));
        s = rk4_step(&mut f, t, &s, dt);
        if s.iter().any(|v| !v.is_finite()) {
            return Err(RunError::NonFinite { t: t + dt });
        }
    }
    let x = sys.plant_state(&s);
    let final_est_errors: Vec<f64> =
        (0..n_nodes).map(|i| (sys.estimate(&s, i) - &x).norm()).collect();
    let aux_final_errors = sys.aux_estimate(&s, 0).map(|_| {
        (0..n_nodes)
            .map(|i| {
                let (off, len) = sys.design().plant.state_block(i);
                let own = x.rows(off, len).clone_owned();
                (sys.aux_estimate(&s, i).expect("aux layer present") - own).norm()
            })
            .collect()
    });
    Ok(RunData {
        times,
        states,
        est_errors,
        gains,
        final_est_errors,
        aux_final_errors,
    })
}

fn gain_row(sys: &CoupledObserver<f64>, s: &DVector<f64>) -> Vec<f64> {
    let n_nodes = sys.design().n_agents();
    let mut row = Vec::with_capacity(2 * n_nodes);
    for i in 0..n_nodes {
        let (g, gs) = sys.gains(s, i);
        row.push(g);
        row.push(gs);
    }
    row
}

fn trace_data(trace: &Trace<f64>, final_est_errors: Vec<f64>) -> RunData {
    RunData {
        times: trace.times.clone(),
        states: trace.states.iter().map(|s| s.iter().copied().collect()).collect(),
        est_errors: trace.est_errors.clone(),
        gains: trace
            .gains
            .iter()
            .map(|row| row.iter().flat_map(|&(g, gs)| [g, gs]).collect())
            .collect(),
        final_est_errors,
        aux_final_errors: None,
    }
}

fn seek_data(sys: &CoupledObserver<f64>, outcome: &SeekOutcome<f64>) -> RunData {
    let steps = outcome.gain_times.len() - 1;
    let gains = outcome
        .gains
        .iter()
        .enumerate()
        .filter(|&(k, _)| k % TRACE_STRIDE == 0 || k == steps)
        .map(|(_, row)| row.iter().flat_map(|&(g, gs)| [g, gs]).collect())
        .collect();
    let n_nodes = sys.design().n_agents();
    let final_est_errors = (0..n_nodes)
        .map(|i| (&outcome.final_estimates[i] - &outcome.final_actions).norm())
        .collect();
    RunData {
        times: outcome.times.clone(),
        states: outcome.actions.iter().map(|a| a.iter().copied().collect()).collect(),
        est_errors: outcome.est_errors.clone(),
        gains,
        final_est_errors,
        aux_final_errors: None,
    }
}

fn series_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn gain_names(n: usize) -> Vec<String> {
    (1..=n).flat_map(|i| [format!("gamma{i}"), format!("gamma_s{i}")]).collect()
}

fn write_csv(path: &Path, names: &[String], times: &[f64], rows: &[Vec<f64>]) -> Result<(), RunError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(out, "t")?;
    for name in names {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (t, row) in times.iter().zip(rows) {
        write!(out, "{t}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Gain growth per node over the last tenth of the run, from the recorded
/// grid. The cut time lands exactly on the grid for horizons that divide
/// into whole strides, which every bundled config satisfies.
fn tail_increase(times: &[f64], gains: &[Vec<f64>], t_end: f64) -> Vec<[f64; 2]> {
    let cut = 0.9 * t_end - 1e-9;
    let idx = times.iter().position(|&t| t >= cut).unwrap_or(0);
    let last = gains.last().expect("nonempty gain history");
    let base = &gains[idx];
    (0..last.len() / 2)
        .map(|i| [last[2 * i] - base[2 * i], last[2 * i + 1] - base[2 * i + 1]])
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    kind: &str,
    seed: u64,
    dt: f64,
    t_end: f64,
    sys: &CoupledObserver<f64>,
    data: RunData,
    out: &Path,
    nash: Option<NashMetrics>,
    herding: Option<HerdingMetrics>,
    bee: Option<BeeMetrics>,
) -> Result<Metrics, RunError> {
    let n_agents = sys.design().n_agents();
    let state_dim = sys.design().plant.state_dim();
    write_csv(&out.join("trajectory.csv"), &series_names("x", state_dim), &data.times, &data.states)?;
    write_csv(
        &out.join("estimation_errors.csv"),
        &series_names("e", n_agents),
        &data.times,
        &data.est_errors,
    )?;
    write_csv(&out.join("adaptive_gains.csv"), &gain_names(n_agents), &data.times, &data.gains)?;

    let gain_tail_increase = tail_increase(&data.times, &data.gains, t_end);
    let last_gains = data.gains.last().expect("nonempty gain history");
    let final_gains: Vec<[f64; 2]> =
        (0..n_agents).map(|i| [last_gains[2 * i], last_gains[2 * i + 1]]).collect();
    let metrics = Metrics {
        kind: kind.to_string(),
        seed,
        dt,
        t_end,
        n_agents,
        state_dim,
        max_final_est_error: data.final_est_errors.iter().copied().fold(0.0, f64::max),
        final_est_errors: data.final_est_errors,
        final_gains,
        max_gain_tail_increase: gain_tail_increase
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(0.0, f64::max),
        gain_tail_increase,
        aux_final_errors: data.aux_final_errors,
        nash,
        herding,
        bee,
    };
    let json = serde_json::to_string_pretty(&metrics).map_err(invalid)?;
    fs::write(out.join("metrics.json"), json + "\n")?;
    Ok(metrics)
}

fn verdict(name: &str, pass: bool, detail: String) -> String {
    format!("{name}: {} ({detail})", if pass { "PASS" } else { "FAIL" })
}

/// Human-readable pass/fail lines for `--summary`, one per graded quantity.
pub fn summary_lines(m: &Metrics) -> Vec<String> {
    let mut lines = Vec::new();
    match m.kind.as_str() {
        "hetero-observer" | "homo-observer" | "extension-observer" => {
            lines.push(verdict(
                "estimation error",
                m.max_final_est_error <= EST_ERROR_TOL,
                format!("max {:.3e}, tol {EST_ERROR_TOL:.0e}", m.max_final_est_error),
            ));
            lines.push(verdict(
                "gain plateau",
                m.max_gain_tail_increase <= GAIN_TAIL_TOL,
                format!("tail increase {:.3e}, tol {GAIN_TAIL_TOL:.0e}", m.max_gain_tail_increase),
            ));
            if let Some(aux) = &m.aux_final_errors {
                let worst = aux.iter().copied().fold(0.0, f64::max);
                lines.push(verdict(
                    "local layer error",
                    worst <= EST_ERROR_TOL,
                    format!("max {worst:.3e}, tol {EST_ERROR_TOL:.0e}"),
                ));
            }
        }
        "nash" => {
            let nm = m.nash.as_ref().expect("nash metrics");
            lines.push(verdict(
                "equilibrium reached",
                nm.distance_to_equilibrium <= NE_DISTANCE_TOL,
                format!("distance {:.3e}, tol {NE_DISTANCE_TOL:.0e}", nm.distance_to_equilibrium),
            ));
        }
        "herding" => {
            let hm = m.herding.as_ref().expect("herding metrics");
            lines.push(verdict(
                "followers inside leader hull",
                hm.max_hull_distance <= HULL_TOL,
                format!("max distance {:.3e}, tol {HULL_TOL:.0e}", hm.max_hull_distance),
            ));
            lines.push(verdict(
                "followers stationary before first decision",
                hm.max_pre_decision_speed < STATIONARY_TOL,
                format!(
                    "max speed {:.3e}, tol {STATIONARY_TOL:.0e}",
                    hm.max_pre_decision_speed
                ),
            ));
        }
        "bee" => {
            let bm = m.bee.as_ref().expect("bee metrics");
            lines.push(verdict(
                "recruit counts proportional to speeds",
                bm.counts == bm.expected_counts && bm.unassigned.is_empty(),
                format!("counts {:?}, expected {:?}", bm.counts, bm.expected_counts),
            ));
            lines.push(verdict(
                "followers on their targets",
                bm.max_target_distance <= TARGET_TOL,
                format!("max distance {:.3e}, tol {TARGET_TOL:.0e}", bm.max_target_distance),
            ));
            let worst_radius = bm.radius_errors.iter().map(|&(_, e)| e).fold(0.0, f64::max);
            lines.push(verdict(
                "unit circling radius",
                worst_radius <= RADIUS_TOL,
                format!("max error {worst_radius:.3e}, tol {RADIUS_TOL:.0e}"),
            ));
            let worst_speed = bm.speed_errors.iter().map(|&(_, e)| e).fold(0.0, f64::max);
            lines.push(verdict(
                "circling speed held",
                worst_speed <= SPEED_REL_TOL,
                format!("max relative error {worst_speed:.3e}, tol {SPEED_REL_TOL:.0e}"),
            ));
        }
        _ => {}
    }
    lines
}
