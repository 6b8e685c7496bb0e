//! Per-node observer machinery.
//!
//! A node holds an internal state `z` together with two adaptive gains and
//! reconstructs the full stacked plant state as `xhat = z + Gbar y` from its
//! local output `y`. The drift of `z` is linear in `(z, y, u)` through the
//! bar-form gains assembled here, minus a consensus injection `H` built from
//! neighbour estimate disagreements. The injection carries one adaptively
//! weighted linear term and one adaptively weighted unit-vector (sliding)
//! term; both weights grow monotonically with the disagreement and freeze
//! once agreement is reached.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::Graph;
use crate::scalar::{cv, to_f64, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum ObserverError {
    #[error("adaptive parameter {name} must be strictly positive, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Initial values and growth rates for the two adaptive coupling gains.
///
/// All four must be strictly positive: the linear gain starts at `gamma0`
/// and grows at rate `phi` times the squared disagreement, the sliding gain
/// starts at `gamma_s0` and grows at rate `phi_s` times the disagreement
/// norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams<T: Scalar> {
    pub gamma0: T,
    pub gamma_s0: T,
    pub phi: T,
    pub phi_s: T,
}

impl<T: Scalar> Default for AdaptiveParams<T> {
    fn default() -> Self {
        Self {
            gamma0: T::one(),
            gamma_s0: T::one(),
            phi: T::one(),
            phi_s: T::one(),
        }
    }
}

impl<T: Scalar> AdaptiveParams<T> {
    pub fn new(gamma0: T, gamma_s0: T, phi: T, phi_s: T) -> Result<Self, ObserverError> {
        for (name, value) in [
            ("gamma0", gamma0),
            ("gamma_s0", gamma_s0),
            ("phi", phi),
            ("phi_s", phi_s),
        ] {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(ObserverError::NonPositiveParam {
                    name,
                    value: to_f64(value),
                });
            }
        }
        Ok(Self {
            gamma0,
            gamma_s0,
            phi,
            phi_s,
        })
    }
}

/// Raw per-node design quantities, borrowed from whoever synthesized them.
///
/// `t_id` spans the directly reconstructible subspace (orthonormal
/// columns), `t_iu` its orthonormal complement; `e`, `f`, `g` act on that
/// reduced subspace; `c` and `b` are the node's own output and input maps
/// into the stacked state.
pub struct RawNode<'a, T: Scalar> {
    pub t_id: &'a DMatrix<T>,
    pub t_iu: &'a DMatrix<T>,
    pub e: &'a DMatrix<T>,
    pub f: &'a DMatrix<T>,
    pub g: &'a DMatrix<T>,
    pub c: &'a DMatrix<T>,
    pub b: &'a DMatrix<T>,
}

/// Full-dimension gains driving one node's internal state.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGains<T: Scalar> {
    /// Drift on the internal state, `nN x nN`.
    pub e_bar: DMatrix<T>,
    /// Output injection, `nN x p_i`.
    pub f_bar: DMatrix<T>,
    /// Input injection, `nN x m_i`.
    pub b_bar: DMatrix<T>,
    /// Output feedthrough in the estimate, `nN x p_i`.
    pub g_bar: DMatrix<T>,
    /// Complement basis the consensus injection acts through, `nN x d_u`.
    pub t_iu: DMatrix<T>,
}

/// Assembles the bar-form gains from the reduced-subspace solution.
pub fn derive_bar_gains<T: Scalar>(
    a: &DMatrix<T>,
    raw: &RawNode<'_, T>,
) -> Result<NodeGains<T>, ObserverError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(ObserverError::Dimension(format!(
            "stacked drift must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let d = raw.t_id.ncols();
    let du = raw.t_iu.ncols();
    let p = raw.c.nrows();
    let checks = [
        (raw.t_id.nrows() == n, "t_id rows"),
        (raw.t_iu.nrows() == n, "t_iu rows"),
        (d + du == n, "t_id and t_iu columns must total the state size"),
        (raw.e.shape() == (d, d), "e shape"),
        (raw.f.shape() == (d, p), "f shape"),
        (raw.g.shape() == (d, p), "g shape"),
        (raw.c.ncols() == n, "c columns"),
        (raw.b.nrows() == n, "b rows"),
    ];
    for (ok, what) in checks {
        if !ok {
            return Err(ObserverError::Dimension(what.into()));
        }
    }
    let g_bar = raw.t_id * raw.g;
    let proj_u = raw.t_iu * raw.t_iu.transpose();
    let e_bar = raw.t_id * raw.e * raw.t_id.transpose() + &proj_u * a;
    let f_bar = raw.t_id * raw.f + &proj_u * a * &g_bar;
    let b_bar = (DMatrix::identity(n, n) - &g_bar * raw.c) * raw.b;
    Ok(NodeGains {
        e_bar,
        f_bar,
        b_bar,
        g_bar,
        t_iu: raw.t_iu.clone(),
    })
}

/// `xhat = z + Gbar y`.
pub fn estimate<T: Scalar>(
    gains: &NodeGains<T>,
    z: &DVector<T>,
    y: &DVector<T>,
) -> DVector<T> {
    z + &gains.g_bar * y
}

/// Norm threshold below which the sliding direction is taken as zero.
const SLIDING_DEADBAND: f64 = 1e-9;

/// Unit vector along `w`, or zero inside the deadband.
pub fn sliding_direction<T: Scalar>(w: &DVector<T>) -> DVector<T> {
    let norm = w.norm();
    if norm > cv::<T>(SLIDING_DEADBAND) {
        w / norm
    } else {
        DVector::zeros(w.len())
    }
}

/// Consensus disagreement of node `i` seen through its complement basis:
/// `t_iu' * sum_j a_ij (xhat_i - xhat_j)`.
pub fn consensus_residual<T: Scalar>(
    graph: &Graph<T>,
    i: usize,
    t_iu: &DMatrix<T>,
    estimates: &[DVector<T>],
) -> DVector<T> {
    let mut disagreement = DVector::zeros(t_iu.nrows());
    for (j, w) in graph.neighbors(i) {
        disagreement += (&estimates[i] - &estimates[j]) * w;
    }
    t_iu.transpose() * disagreement
}

/// Consensus injection `H = gamma t_iu eps + gamma_s t_iu h(eps)`.
pub fn coupling<T: Scalar>(
    t_iu: &DMatrix<T>,
    eps: &DVector<T>,
    gamma: T,
    gamma_s: T,
) -> DVector<T> {
    t_iu * (eps * gamma + sliding_direction(eps) * gamma_s)
}

/// Time derivative of one node's internal state and adaptive gains.
///
/// Returns `(dz, dgamma, dgamma_s)`; `eps` is the consensus residual from
/// [`consensus_residual`].
pub fn node_derivative<T: Scalar>(
    gains: &NodeGains<T>,
    params: &AdaptiveParams<T>,
    z: &DVector<T>,
    y: &DVector<T>,
    u: &DVector<T>,
    eps: &DVector<T>,
    gamma: T,
    gamma_s: T,
) -> (DVector<T>, T, T) {
    let h = coupling(&gains.t_iu, eps, gamma, gamma_s);
    let dz = &gains.e_bar * z + &gains.f_bar * y + &gains.b_bar * u - h;
    let eps_norm = eps.norm();
    (dz, params.phi * eps_norm * eps_norm, params.phi_s * eps_norm)
}

/// One neighbour's contribution to the auxiliary (local-state) observer:
/// edge weight, the neighbour's measured output, and its current estimate.
pub struct AuxNeighbor<'a, T: Scalar> {
    pub weight: T,
    pub y: &'a DVector<T>,
    pub xhat: &'a DVector<T>,
}

/// Drift of the auxiliary local observer
/// `d/dt xhat = A xhat + B u + c M zeta`, where `zeta` mixes the node's own
/// absolute output error (weight `w_own`) with relative output errors
/// against each neighbour.
#[allow(clippy::too_many_arguments)]
pub fn aux_derivative<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    m: &DMatrix<T>,
    c_gain: T,
    w_own: T,
    y: &DVector<T>,
    xhat: &DVector<T>,
    u: &DVector<T>,
    neighbors: &[AuxNeighbor<'_, T>],
) -> DVector<T> {
    let own_innovation = y - c * xhat;
    let mut zeta = &own_innovation * w_own;
    for nb in neighbors {
        zeta += ((y - nb.y) - c * (xhat - nb.xhat)) * nb.weight;
    }
    a * xhat + b * u + m * zeta * c_gain
}
