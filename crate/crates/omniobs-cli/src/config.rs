//! JSON experiment configs and their conversion to library types.
//!
//! Every id in a config file (graph edge endpoints, roots, leaders) is
//! 1-based; the conversion to the library's 0-based indices happens here
//! and nowhere else. Unknown fields are rejected so typos fail loudly.

use nalgebra::{DMatrix, DVector};
use omniobs::graph::{Graph, NodeSet};
use omniobs::observer::AdaptiveParams;
use omniobs::scenarios::{BeeGains, BeeLeader, PiecewiseVelocity, DECISION_INTERVAL};
use omniobs::synthesis::AgentModel;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    HeteroObserver(HeteroSpec),
    HomoObserver(HomoSpec),
    ExtensionObserver(ExtensionSpec),
    Nash(NashSpec),
    Herding(HerdingSpec),
    Bee(BeeSpec),
}

impl ExperimentConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExperimentConfig::HeteroObserver(_) => "hetero-observer",
            ExperimentConfig::HomoObserver(_) => "homo-observer",
            ExperimentConfig::ExtensionObserver(_) => "extension-observer",
            ExperimentConfig::Nash(_) => "nash",
            ExperimentConfig::Herding(_) => "herding",
            ExperimentConfig::Bee(_) => "bee",
        }
    }

    pub fn out_dir(&self) -> Option<&str> {
        match self {
            ExperimentConfig::HeteroObserver(s) => s.out_dir.as_deref(),
            ExperimentConfig::HomoObserver(s) => s.out_dir.as_deref(),
            ExperimentConfig::ExtensionObserver(s) => s.out_dir.as_deref(),
            ExperimentConfig::Nash(s) => s.out_dir.as_deref(),
            ExperimentConfig::Herding(s) => s.out_dir.as_deref(),
            ExperimentConfig::Bee(s) => s.out_dir.as_deref(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::HeteroObserver(s) => s.seed,
            ExperimentConfig::HomoObserver(s) => s.seed,
            ExperimentConfig::ExtensionObserver(s) => s.seed,
            ExperimentConfig::Nash(s) => s.seed,
            ExperimentConfig::Herding(s) => s.seed,
            ExperimentConfig::Bee(s) => s.seed,
        }
    }

    pub fn dt_t_end(&self) -> (f64, f64) {
        match self {
            ExperimentConfig::HeteroObserver(s) => (s.dt, s.t_end),
            ExperimentConfig::HomoObserver(s) => (s.dt, s.t_end),
            ExperimentConfig::ExtensionObserver(s) => (s.dt, s.t_end),
            ExperimentConfig::Nash(s) => (s.dt, s.t_end),
            ExperimentConfig::Herding(s) => (s.dt, s.t_end),
            ExperimentConfig::Bee(s) => (s.dt, s.t_end),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: usize,
    /// `[i, j]` with unit weight or `[i, j, w]`, endpoints 1-based.
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum EdgeSpec {
    Plain(usize, usize),
    Weighted(usize, usize, f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub gamma0: f64,
    pub gamma_s0: f64,
    pub phi: f64,
    pub phi_s: f64,
}

/// One parameter set shared by every node, or one per node.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ParamsSpec {
    Shared(ParamSpec),
    PerNode(Vec<ParamSpec>),
}

/// `u(t) = amplitude * sin(frequency * t + phase)` on one input channel.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidSpec {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroSpec {
    pub graph: GraphSpec,
    /// One model per graph node, in node order.
    pub agents: Vec<ModelSpec>,
    pub x0: Vec<f64>,
    /// One sinusoid per input channel; generated from the seed when absent.
    pub inputs: Option<Vec<SinusoidSpec>>,
    pub params: ParamsSpec,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub out_dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomoSpec {
    pub graph: GraphSpec,
    pub model: ModelSpec,
    /// Nodes with absolute output access, 1-based.
    pub roots: Vec<usize>,
    pub x0: Vec<f64>,
    pub inputs: Option<Vec<SinusoidSpec>>,
    pub params: ParamsSpec,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub out_dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionSpec {
    pub graph: GraphSpec,
    pub model: ModelSpec,
    /// Absolute-output access weights, one per node.
    pub weights: Vec<f64>,
    pub margin: f64,
    pub x0: Vec<f64>,
    pub inputs: Option<Vec<SinusoidSpec>>,
    pub params: ParamsSpec,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub out_dir: Option<String>,
}

/// Which observer network carries the gradient play.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObserverPathSpec {
    /// Each player measures its own action block.
    Hetero,
    /// Relative measurements with the given 1-based roots.
    Homo { roots: Vec<usize> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NashSpec {
    pub graph: GraphSpec,
    /// Pseudogradient matrix of the quadratic game, row-major.
    pub q: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    /// Action dimension per player, one per graph node.
    pub dims: Vec<usize>,
    pub observer: ObserverPathSpec,
    pub x0: Vec<f64>,
    /// Per-player gradient step clamp; library default when absent.
    pub u_max: Option<f64>,
    pub params: ParamsSpec,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub t: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HerdingSpec {
    pub graph: GraphSpec,
    pub roots: Vec<usize>,
    /// 1-based leader ids.
    pub leaders: Vec<usize>,
    /// One velocity schedule per leader, in `leaders` order.
    pub schedules: Vec<Vec<SegmentSpec>>,
    pub initial_positions: Vec<[f64; 2]>,
    pub z_star: f64,
    pub z_star_t: f64,
    pub k_f: f64,
    pub params: ParamsSpec,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_decision_dt")]
    pub decision_dt: f64,
    pub seed: u64,
    pub out_dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeeLeaderSpec {
    /// 1-based agent id.
    pub id: usize,
    pub center: [f64; 2],
    pub speed: f64,
    pub stop_at: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeeGainsSpec {
    pub k_r: f64,
    pub k_a: f64,
    pub k_p: f64,
    pub k_d: f64,
    pub k_b: f64,
    pub a_max: f64,
}

impl Default for BeeGainsSpec {
    fn default() -> Self {
        let g = BeeGains::<f64>::default();
        Self {
            k_r: g.k_r,
            k_a: g.k_a,
            k_p: g.k_p,
            k_d: g.k_d,
            k_b: g.k_b,
            a_max: g.a_max,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeeSpec {
    pub graph: GraphSpec,
    pub roots: Vec<usize>,
    pub leaders: Vec<BeeLeaderSpec>,
    pub v_star_t: f64,
    #[serde(default)]
    pub gains: BeeGainsSpec,
    pub initial_positions: Vec<[f64; 2]>,
    pub params: ParamsSpec,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_decision_dt")]
    pub decision_dt: f64,
    pub seed: u64,
    pub out_dir: Option<String>,
}

fn default_decision_dt() -> f64 {
    DECISION_INTERVAL
}

/// Converts a 1-based config id into a 0-based index, bounds-checked.
pub fn zero_based(id: usize, n: usize, what: &str) -> Result<usize, String> {
    if id == 0 || id > n {
        return Err(format!("{what} id {id} out of range 1..={n}"));
    }
    Ok(id - 1)
}

pub fn build_graph(spec: &GraphSpec) -> Result<Graph<f64>, String> {
    let mut edges = Vec::with_capacity(spec.edges.len());
    for e in &spec.edges {
        let (i, j, w) = match *e {
            EdgeSpec::Plain(i, j) => (i, j, 1.0),
            EdgeSpec::Weighted(i, j, w) => (i, j, w),
        };
        edges.push((
            zero_based(i, spec.nodes, "edge endpoint")?,
            zero_based(j, spec.nodes, "edge endpoint")?,
            w,
        ));
    }
    Graph::from_edges(spec.nodes, &edges).map_err(|e| e.to_string())
}

pub fn build_roots(ids: &[usize], n: usize) -> Result<NodeSet, String> {
    let mut set = NodeSet::new();
    for &id in ids {
        set.insert(zero_based(id, n, "root")?);
    }
    Ok(set)
}

pub fn build_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, String> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(format!("{what} must be a nonempty matrix"));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{what} rows have unequal lengths"));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

pub fn build_model(spec: &ModelSpec, what: &str) -> Result<AgentModel<f64>, String> {
    let a = build_matrix(&spec.a, &format!("{what} drift"))?;
    let b = build_matrix(&spec.b, &format!("{what} input map"))?;
    let c = build_matrix(&spec.c, &format!("{what} output map"))?;
    AgentModel::new(a, b, c).map_err(|e| e.to_string())
}

pub fn build_params(spec: &ParamsSpec, n: usize) -> Result<Vec<AdaptiveParams<f64>>, String> {
    let mk = |p: &ParamSpec| {
        AdaptiveParams::new(p.gamma0, p.gamma_s0, p.phi, p.phi_s).map_err(|e| e.to_string())
    };
    match spec {
        ParamsSpec::Shared(p) => {
            let one = mk(p)?;
            Ok(vec![one; n])
        }
        ParamsSpec::PerNode(ps) => {
            if ps.len() != n {
                return Err(format!("{} parameter sets for {n} nodes", ps.len()));
            }
            ps.iter().map(mk).collect()
        }
    }
}

pub fn build_x0(x0: &[f64], dim: usize) -> Result<DVector<f64>, String> {
    if x0.len() != dim {
        return Err(format!(
            "initial state has length {}, plant has dimension {dim}",
            x0.len()
        ));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err("initial state must be finite".into());
    }
    Ok(DVector::from_column_slice(x0))
}

pub fn build_schedule(segments: &[SegmentSpec]) -> Result<PiecewiseVelocity<f64>, String> {
    PiecewiseVelocity::new(
        segments
            .iter()
            .map(|s| (s.t, [s.vx, s.vy]))
            .collect(),
    )
    .map_err(|e| e.to_string())
}

pub fn build_bee_leaders(
    specs: &[BeeLeaderSpec],
    n: usize,
) -> Result<Vec<BeeLeader<f64>>, String> {
    specs
        .iter()
        .map(|s| {
            Ok(BeeLeader {
                id: zero_based(s.id, n, "leader")?,
                center: s.center,
                speed: s.speed,
                stop_at: s.stop_at,
            })
        })
        .collect()
}

pub fn build_bee_gains(spec: &BeeGainsSpec) -> BeeGains<f64> {
    BeeGains {
        k_r: spec.k_r,
        k_a: spec.k_a,
        k_p: spec.k_p,
        k_d: spec.k_d,
        k_b: spec.k_b,
        a_max: spec.a_max,
    }
}
