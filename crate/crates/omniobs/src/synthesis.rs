//! Observer synthesis for networks of linear agents.
//!
//! Three constructions produce an [`ObserverDesign`]:
//!
//! * [`synth_hetero`]: each agent has its own `(A, B, C)` and measures its
//!   own output absolutely. The directly reconstructible subspace of node
//!   `i` is its own state block, recovered through a Luenberger gain; the
//!   rest of the stacked state arrives through consensus.
//! * [`synth_homo`]: all agents share one model; non-root nodes only
//!   measure neighbour-relative outputs, root nodes measure their own
//!   absolutely. The reconstructible subspace is the corresponding weighted
//!   combination of state blocks, and the node's input information is the
//!   matching weighted combination of inputs.
//! * [`synth_extension`]: agents share one model and each node first runs a
//!   small cooperative observer for its *own* state from relative outputs
//!   (plus absolute access on a weighted subset), then feeds that estimate
//!   into a static omniscient layer as a pseudo-output.
//!
//! [`ObserverDesign::verify`] rechecks every structural identity the
//! constructions promise and reports numeric residuals.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, GraphError, NodeSet};
use crate::numerics::{
    default_poles, image_equal, orthonormal_complement, place_observer_gain, solve_care, svd_rank,
    NumericsError,
};
use crate::observer::{derive_bar_gains, NodeGains, ObserverError, RawNode};
use crate::scalar::{cv, precision_tol, to_f64, Scalar};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("graph mismatch: {0}")]
    GraphMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
}

/// One agent's continuous-time model `dx = A x + B u`, `y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
}

impl<T: Scalar> AgentModel<T> {
    /// Validates shapes and that `C` has full row rank.
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>) -> Result<Self, SynthesisError> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(SynthesisError::BadModel(format!(
                "state matrix must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(SynthesisError::BadModel(format!(
                "input matrix has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(SynthesisError::BadModel(format!(
                "output matrix must be p x {n} with p >= 1, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if svd_rank(&c) != c.nrows() {
            return Err(SynthesisError::BadModel(
                "output matrix must have full row rank".into(),
            ));
        }
        Ok(Self { a, b, c })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
}

/// Stacked network plant.
#[derive(Debug, Clone)]
pub struct PlantModel<T: Scalar> {
    /// Stacked drift, `n x n`.
    pub a: DMatrix<T>,
    /// Stacked input map, `n x m`.
    pub b: DMatrix<T>,
    /// Start index of each agent's state block; length `N + 1`.
    pub state_offsets: Vec<usize>,
    /// Start index of each agent's input block; length `N + 1`.
    pub input_offsets: Vec<usize>,
}

impl<T: Scalar> PlantModel<T> {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_agents(&self) -> usize {
        self.state_offsets.len() - 1
    }
    /// `(offset, len)` of agent `i`'s state block.
    pub fn state_block(&self, i: usize) -> (usize, usize) {
        (
            self.state_offsets[i],
            self.state_offsets[i + 1] - self.state_offsets[i],
        )
    }
    /// `(offset, len)` of agent `i`'s input block.
    pub fn input_block(&self, i: usize) -> (usize, usize) {
        (
            self.input_offsets[i],
            self.input_offsets[i + 1] - self.input_offsets[i],
        )
    }
}

/// Which identity the reduced-subspace gains satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GainBranch {
    /// `E` is Hurwitz and the output-injection identities hold.
    Hurwitz,
    /// `E = F = 0` and `G C` reproduces the subspace selector exactly.
    Static,
}

/// One node's reduced-subspace solution.
#[derive(Debug, Clone)]
pub struct NodeSolution<T: Scalar> {
    /// Orthonormal basis of the directly reconstructible subspace, `n x d`.
    pub t_id: DMatrix<T>,
    /// Orthonormal complement, `n x (n - d)`.
    pub t_iu: DMatrix<T>,
    /// Reduced drift, `d x d`.
    pub e: DMatrix<T>,
    /// Reduced output injection, `d x p`.
    pub f: DMatrix<T>,
    /// Reduced feedthrough, `d x p`.
    pub g: DMatrix<T>,
    /// The node's output map on the stacked state, `p x n`.
    pub c: DMatrix<T>,
    /// Input directions the node can account for, `n x m_i`.
    pub b_avail: DMatrix<T>,
    /// Input directions it cannot, `n x m_u`.
    pub b_unavail: DMatrix<T>,
    pub branch: GainBranch,
}

/// Where a node's output `y_i` comes from during simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutputSource {
    /// `y_i = C_i x` measured on the true stacked state.
    Plant,
    /// `y_i` is the node's auxiliary estimate of its own state.
    AuxEstimate,
}

/// The auxiliary cooperative layer of the two-layer design.
#[derive(Debug, Clone)]
pub struct AuxDesign<T: Scalar> {
    /// Shared single-agent model.
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    /// Injection direction `S C'` from the Riccati solution.
    pub m: DMatrix<T>,
    /// Coupling strength `margin / (2 lambda_min(L + W))`.
    pub c_gain: T,
    /// Absolute-output access weights, one per node, each `>= 0`.
    pub weights: Vec<T>,
}

/// A complete synthesized observer network.
#[derive(Debug, Clone)]
pub struct ObserverDesign<T: Scalar> {
    pub plant: PlantModel<T>,
    pub graph: Graph<T>,
    pub nodes: Vec<NodeSolution<T>>,
    /// Bar-form gains derived from `nodes`, same order.
    pub bar: Vec<NodeGains<T>>,
    /// `u_i = input_maps[i] * u` extracts what node `i` knows of the input.
    pub input_maps: Vec<DMatrix<T>>,
    /// `u_{-i} = unavail_maps[i] * u`, the complementary information; only
    /// used to verify the input split.
    pub unavail_maps: Vec<DMatrix<T>>,
    pub output_source: OutputSource,
    pub aux: Option<AuxDesign<T>>,
}

/// Residuals at or below this pass verification of an `f64` design.
/// Coarser scalars get a wider gate scaled to their precision.
pub const CONSTRAINT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    pub name: &'static str,
    /// Node index the check belongs to; network-wide checks carry none.
    pub node: Option<usize>,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
    pub all_pass: bool,
    /// Residual gate the checks were graded against.
    pub tol: f64,
}

impl ConstraintReport {
    fn push(&mut self, name: &'static str, node: Option<usize>, residual: f64) {
        let pass = residual <= self.tol;
        self.all_pass &= pass;
        self.checks.push(ConstraintCheck {
            name,
            node,
            residual,
            pass,
        });
    }
}

fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter()
        .fold(T::zero(), |acc, x| acc.max(x.abs()))
        .to_f64()
        .unwrap_or(f64::INFINITY)
}

impl<T: Scalar> ObserverDesign<T> {
    pub fn n_agents(&self) -> usize {
        self.nodes.len()
    }

    pub fn state_dim(&self) -> usize {
        self.plant.state_dim()
    }

    /// Rechecks every structural identity of the design.
    pub fn verify(&self) -> ConstraintReport {
        let mut report = ConstraintReport {
            checks: Vec::new(),
            all_pass: true,
            tol: to_f64(precision_tol::<T>(CONSTRAINT_TOL, 1e-3)),
        };
        let n = self.plant.state_dim();
        let a = &self.plant.a;
        let b = &self.plant.b;

        // The union of the directly reconstructible subspaces must cover
        // the whole stacked state; residual counts missing dimensions.
        let total_d: usize = self.nodes.iter().map(|s| s.t_id.ncols()).sum();
        let mut stacked = DMatrix::<T>::zeros(n, total_d);
        let mut at = 0;
        for s in &self.nodes {
            stacked
                .view_mut((0, at), (n, s.t_id.ncols()))
                .copy_from(&s.t_id);
            at += s.t_id.ncols();
        }
        report.push("subspace-cover", None, (n - svd_rank(&stacked)) as f64);

        for (i, s) in self.nodes.iter().enumerate() {
            let d = s.t_id.ncols();
            let du = s.t_iu.ncols();
            let p = s.c.nrows();
            let shapes_ok = s.t_id.nrows() == n
                && s.t_iu.nrows() == n
                && d + du == n
                && s.e.shape() == (d, d)
                && s.f.shape() == (d, p)
                && s.g.shape() == (d, p)
                && s.c.ncols() == n
                && s.b_avail.nrows() == n
                && s.b_unavail.nrows() == n;
            report.push("shapes", Some(i), if shapes_ok { 0.0 } else { 1.0 });
            if !shapes_ok {
                continue;
            }

            // Together the two input families must reach everything the
            // plant input reaches.
            let mut both = DMatrix::<T>::zeros(n, s.b_avail.ncols() + s.b_unavail.ncols());
            both.view_mut((0, 0), (n, s.b_avail.ncols()))
                .copy_from(&s.b_avail);
            both.view_mut((0, s.b_avail.ncols()), (n, s.b_unavail.ncols()))
                .copy_from(&s.b_unavail);
            report.push(
                "input-image",
                Some(i),
                if image_equal(&both, b) { 0.0 } else { 1.0 },
            );

            // The two information channels recompose the exact input map.
            let recomposed =
                &s.b_avail * &self.input_maps[i] + &s.b_unavail * &self.unavail_maps[i];
            report.push("input-split", Some(i), max_abs(&(recomposed - b)));

            let gram = s.t_id.transpose() * &s.t_id - DMatrix::<T>::identity(d, d);
            report.push("orthonormal-columns", Some(i), max_abs(&gram));

            match s.branch {
                GainBranch::Hurwitz => {
                    report.push(
                        "gain-null",
                        Some(i),
                        max_abs(&(&s.g * &s.c * &s.b_unavail - s.t_id.transpose() * &s.b_unavail)),
                    );
                    let lhs = &s.e * s.t_id.transpose() + (&s.f - &s.e * &s.g) * &s.c;
                    let rhs = (s.t_id.transpose() - &s.g * &s.c) * a;
                    report.push("gain-consistency", Some(i), max_abs(&(lhs - rhs)));
                    let worst = s
                        .e
                        .complex_eigenvalues()
                        .iter()
                        .fold(f64::NEG_INFINITY, |acc, l| acc.max(to_f64(l.re)));
                    report.push("gain-stability", Some(i), worst.max(0.0));
                }
                GainBranch::Static => {
                    report.push(
                        "static-dims",
                        Some(i),
                        if d == p { 0.0 } else { 1.0 },
                    );
                    report.push(
                        "static-zero",
                        Some(i),
                        max_abs(&s.e).max(max_abs(&s.f)),
                    );
                    report.push(
                        "static-selector",
                        Some(i),
                        max_abs(&(&s.g * &s.c - s.t_id.transpose())),
                    );
                }
            }
        }
        report
    }
}

fn block_diag<T: Scalar>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

fn offsets(sizes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out = vec![0];
    for s in sizes {
        out.push(out.last().unwrap() + s);
    }
    out
}

/// Identity rows `start..start+len` of an `n`-column selector.
fn selector_rows<T: Scalar>(n: usize, start: usize, len: usize) -> DMatrix<T> {
    let mut s = DMatrix::zeros(len, n);
    for k in 0..len {
        s[(k, start + k)] = T::one();
    }
    s
}

/// Heterogeneous design with default observer poles `-1..-n_i` per agent.
pub fn synth_hetero<T: Scalar>(
    models: &[AgentModel<T>],
    graph: &Graph<T>,
) -> Result<ObserverDesign<T>, SynthesisError> {
    let poles: Vec<Vec<Complex<T>>> = models
        .iter()
        .map(|m| default_poles(m.state_dim()))
        .collect();
    synth_hetero_with_poles(models, graph, &poles)
}

/// Heterogeneous design with caller-chosen observer poles per agent.
pub fn synth_hetero_with_poles<T: Scalar>(
    models: &[AgentModel<T>],
    graph: &Graph<T>,
    poles: &[Vec<Complex<T>>],
) -> Result<ObserverDesign<T>, SynthesisError> {
    let n_agents = graph.node_count();
    if models.len() != n_agents {
        return Err(SynthesisError::GraphMismatch(format!(
            "{} models for a graph of {n_agents} nodes",
            models.len()
        )));
    }
    if poles.len() != n_agents {
        return Err(SynthesisError::BadModel(format!(
            "{} pole sets for {n_agents} agents",
            poles.len()
        )));
    }
    if !graph.is_connected() {
        return Err(SynthesisError::GraphMismatch(
            "the communication graph must be connected".into(),
        ));
    }
    let state_offsets = offsets(models.iter().map(|m| m.state_dim()));
    let input_offsets = offsets(models.iter().map(|m| m.input_dim()));
    let n = *state_offsets.last().unwrap();
    let m = *input_offsets.last().unwrap();
    let a_blocks: Vec<&DMatrix<T>> = models.iter().map(|mo| mo.a()).collect();
    let b_blocks: Vec<&DMatrix<T>> = models.iter().map(|mo| mo.b()).collect();
    let a = block_diag(&a_blocks);
    let b = block_diag(&b_blocks);

    let mut nodes = Vec::with_capacity(n_agents);
    let mut input_maps = Vec::with_capacity(n_agents);
    let mut unavail_maps = Vec::with_capacity(n_agents);
    for (i, model) in models.iter().enumerate() {
        let ni = model.state_dim();
        let mi = model.input_dim();
        let so = state_offsets[i];
        let io = input_offsets[i];
        let l = place_observer_gain(model.a(), model.c(), &poles[i])?;
        let e = model.a() + &l * model.c();
        let f = -l;
        let g = DMatrix::zeros(ni, model.output_dim());
        let t_id = selector_rows::<T>(n, so, ni).transpose();
        let t_iu = {
            // Complementary block selector, assembled directly.
            let mut t = DMatrix::zeros(n, n - ni);
            let mut col = 0;
            for r in 0..n {
                if r < so || r >= so + ni {
                    t[(r, col)] = T::one();
                    col += 1;
                }
            }
            t
        };
        let mut c = DMatrix::zeros(model.output_dim(), n);
        c.view_mut((0, so), (model.output_dim(), ni))
            .copy_from(model.c());
        let mut b_avail = DMatrix::zeros(n, mi);
        b_avail.view_mut((so, 0), (ni, mi)).copy_from(model.b());
        let mut b_unavail = DMatrix::zeros(n, m - mi);
        let mut col = 0;
        for j in 0..n_agents {
            if j == i {
                continue;
            }
            let jlen = input_offsets[j + 1] - input_offsets[j];
            let (jso, jslen) = (state_offsets[j], state_offsets[j + 1] - state_offsets[j]);
            b_unavail
                .view_mut((jso, col), (jslen, jlen))
                .copy_from(models[j].b());
            col += jlen;
        }
        input_maps.push(selector_rows::<T>(m, io, mi));
        let mut unavail = DMatrix::zeros(m - mi, m);
        let mut row = 0;
        for j in 0..m {
            if j < io || j >= io + mi {
                unavail[(row, j)] = T::one();
                row += 1;
            }
        }
        unavail_maps.push(unavail);
        nodes.push(NodeSolution {
            t_id,
            t_iu,
            e,
            f,
            g,
            c,
            b_avail,
            b_unavail,
            branch: GainBranch::Hurwitz,
        });
    }
    finish_design(
        PlantModel {
            a,
            b,
            state_offsets,
            input_offsets,
        },
        graph.clone(),
        nodes,
        input_maps,
        unavail_maps,
        OutputSource::Plant,
        None,
    )
}

/// Homogeneous relative-measurement design with default poles.
pub fn synth_homo<T: Scalar>(
    model: &AgentModel<T>,
    graph: &Graph<T>,
    roots: &NodeSet,
) -> Result<ObserverDesign<T>, SynthesisError> {
    synth_homo_with_poles(model, graph, roots, &default_poles(model.state_dim()))
}

/// Homogeneous relative-measurement design with caller-chosen poles.
pub fn synth_homo_with_poles<T: Scalar>(
    model: &AgentModel<T>,
    graph: &Graph<T>,
    roots: &NodeSet,
    poles: &[Complex<T>],
) -> Result<ObserverDesign<T>, SynthesisError> {
    let n_agents = graph.node_count();
    if !graph.is_connected() {
        return Err(SynthesisError::GraphMismatch(
            "the communication graph must be connected".into(),
        ));
    }
    let rows = graph.bar_rows(roots)?;
    if !crate::graph::verify_bar_nonsingular(&rows) {
        return Err(SynthesisError::GraphMismatch(
            "the measurement rows are singular; the roots do not anchor the graph".into(),
        ));
    }
    let nb = model.state_dim();
    let mb = model.input_dim();
    let n = n_agents * nb;
    let l = place_observer_gain(model.a(), model.c(), poles)?;
    let e = model.a() + &l * model.c();
    let eye_nb = DMatrix::<T>::identity(nb, nb);
    let eye_mb = DMatrix::<T>::identity(mb, mb);
    let a = DMatrix::<T>::identity(n_agents, n_agents).kronecker(model.a());
    let b = DMatrix::<T>::identity(n_agents, n_agents).kronecker(model.b());

    let mut nodes = Vec::with_capacity(n_agents);
    let mut input_maps = Vec::with_capacity(n_agents);
    let mut unavail_maps = Vec::with_capacity(n_agents);
    for row in &rows {
        let norm = row.norm();
        let row_mat = DMatrix::from_row_slice(1, n_agents, row.as_slice());
        let col_mat = row_mat.transpose();
        let t_id = col_mat.kronecker(&eye_nb) / norm;
        let t_iu = orthonormal_complement(&t_id)?;
        let c = row_mat.kronecker(model.c());
        let f = -&l / norm;
        let g = DMatrix::zeros(nb, model.output_dim());
        let b_avail = &t_id * model.b() / norm;
        let b_unavail = (DMatrix::identity(n, n) - &t_id * t_id.transpose()) * &b;
        input_maps.push(row_mat.kronecker(&eye_mb));
        unavail_maps.push(DMatrix::identity(n_agents * mb, n_agents * mb));
        nodes.push(NodeSolution {
            t_id,
            t_iu,
            e: e.clone(),
            f,
            g,
            c,
            b_avail,
            b_unavail,
            branch: GainBranch::Hurwitz,
        });
    }
    finish_design(
        PlantModel {
            a,
            b,
            state_offsets: offsets(std::iter::repeat(nb).take(n_agents)),
            input_offsets: offsets(std::iter::repeat(mb).take(n_agents)),
        },
        graph.clone(),
        nodes,
        input_maps,
        unavail_maps,
        OutputSource::Plant,
        None,
    )
}

/// Two-layer design: a cooperative local observer per node feeding a static
/// omniscient layer.
///
/// `weights[i] > 0` grants node `i` absolute access to its own output; the
/// weighted graph Laplacian plus `diag(weights)` must be positive definite.
/// `margin >= 1` scales the coupling strength above its threshold value.
pub fn synth_extension<T: Scalar>(
    model: &AgentModel<T>,
    graph: &Graph<T>,
    weights: &[T],
    margin: T,
) -> Result<ObserverDesign<T>, SynthesisError> {
    let n_agents = graph.node_count();
    if weights.len() != n_agents {
        return Err(SynthesisError::GraphMismatch(format!(
            "{} access weights for {n_agents} nodes",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(SynthesisError::BadModel(
            "access weights must be finite and nonnegative".into(),
        ));
    }
    if !(margin >= T::one()) || !margin.is_finite() {
        return Err(SynthesisError::BadModel(
            "coupling margin must be at least 1".into(),
        ));
    }
    let lam = graph
        .min_eigenvalue_shifted(weights)
        .ok_or_else(|| SynthesisError::GraphMismatch("empty graph".into()))?;
    if !(lam > cv::<T>(1e-12)) {
        return Err(SynthesisError::GraphMismatch(
            "Laplacian plus access weights is not positive definite; \
             every component needs an absolutely informed node"
                .into(),
        ));
    }
    let s = solve_care(model.a(), model.c())?;
    let m_inj = &s * model.c().transpose();
    let c_gain = margin / (cv::<T>(2.0) * lam);

    let nb = model.state_dim();
    let mb = model.input_dim();
    let n = n_agents * nb;
    let m = n_agents * mb;
    let a = DMatrix::<T>::identity(n_agents, n_agents).kronecker(model.a());
    let b = DMatrix::<T>::identity(n_agents, n_agents).kronecker(model.b());

    let mut nodes = Vec::with_capacity(n_agents);
    let mut input_maps = Vec::with_capacity(n_agents);
    let mut unavail_maps = Vec::with_capacity(n_agents);
    for i in 0..n_agents {
        let t_id = selector_rows::<T>(n, i * nb, nb).transpose();
        let mut t_iu = DMatrix::zeros(n, n - nb);
        let mut col = 0;
        for r in 0..n {
            if r < i * nb || r >= (i + 1) * nb {
                t_iu[(r, col)] = T::one();
                col += 1;
            }
        }
        let c = selector_rows::<T>(n, i * nb, nb);
        nodes.push(NodeSolution {
            t_id,
            t_iu,
            e: DMatrix::zeros(nb, nb),
            f: DMatrix::zeros(nb, nb),
            g: DMatrix::identity(nb, nb),
            c,
            b_avail: DMatrix::zeros(n, 0),
            b_unavail: b.clone(),
            branch: GainBranch::Static,
        });
        input_maps.push(DMatrix::zeros(0, m));
        unavail_maps.push(DMatrix::identity(m, m));
    }
    finish_design(
        PlantModel {
            a,
            b,
            state_offsets: offsets(std::iter::repeat(nb).take(n_agents)),
            input_offsets: offsets(std::iter::repeat(mb).take(n_agents)),
        },
        graph.clone(),
        nodes,
        input_maps,
        unavail_maps,
        OutputSource::AuxEstimate,
        Some(AuxDesign {
            a: model.a().clone(),
            b: model.b().clone(),
            c: model.c().clone(),
            m: m_inj,
            c_gain,
            weights: weights.to_vec(),
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_design<T: Scalar>(
    plant: PlantModel<T>,
    graph: Graph<T>,
    nodes: Vec<NodeSolution<T>>,
    input_maps: Vec<DMatrix<T>>,
    unavail_maps: Vec<DMatrix<T>>,
    output_source: OutputSource,
    aux: Option<AuxDesign<T>>,
) -> Result<ObserverDesign<T>, SynthesisError> {
    let bar = nodes
        .iter()
        .map(|s| {
            derive_bar_gains(
                &plant.a,
                &RawNode {
                    t_id: &s.t_id,
                    t_iu: &s.t_iu,
                    e: &s.e,
                    f: &s.f,
                    g: &s.g,
                    c: &s.c,
                    b: &s.b_avail,
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ObserverDesign {
        plant,
        graph,
        nodes,
        bar,
        input_maps,
        unavail_maps,
        output_source,
        aux,
    })
}
