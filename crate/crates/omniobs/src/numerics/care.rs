//! Filter Riccati equation `A S + S A' - S C'C S + I = 0`.
//!
//! The stabilizing solution is extracted from the stable invariant
//! subspace of the Hamiltonian, located with a determinant-scaled matrix
//! sign iteration, then polished by a few Newton (Kleinman) steps. The
//! result is gated on the equation residual, symmetry, positive
//! semidefiniteness, and on `A - S C'C` being Hurwitz; anything short of
//! that is reported instead of returned.

use nalgebra::DMatrix;

use crate::numerics::place::is_detectable;
use crate::numerics::NumericsError;
use crate::scalar::{cv, precision_tol, Scalar};

fn frobenius<T: Scalar>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt()
}

/// `A S + S A' - S C'C S + I`, the defect of a candidate solution.
fn residual<T: Scalar>(a: &DMatrix<T>, ctc: &DMatrix<T>, s: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    a * s + s * a.transpose() - s * ctc * s + DMatrix::identity(n, n)
}

/// Matrix sign of `h` by scaled Newton iteration.
fn matrix_sign<T: Scalar>(h: &DMatrix<T>) -> Result<DMatrix<T>, NumericsError> {
    let m = h.nrows();
    let mut z = h.clone();
    let exponent = -T::one() / cv::<T>(m as f64);
    for _ in 0..100 {
        let det = z.determinant().abs();
        let scale = if det > T::zero() && det.is_finite() {
            det.powf(exponent)
        } else {
            T::one()
        };
        let zs = &z * scale;
        let inv = zs.clone().try_inverse().ok_or_else(|| {
            NumericsError::NoConvergence("sign iteration hit a singular iterate".into())
        })?;
        let next = (&zs + &inv) * cv::<T>(0.5);
        let delta = frobenius(&(&next - &z));
        let done = delta <= precision_tol::<T>(1e-13, 1e-6) * (T::one() + frobenius(&z));
        z = next;
        if done {
            return Ok(z);
        }
    }
    Err(NumericsError::NoConvergence(
        "sign iteration did not settle".into(),
    ))
}

/// Stabilizing solution of `A S + S A' - S C'C S + I = 0`.
///
/// Requires `(A, C)` detectable; `C` may have fewer rows than states.
pub fn solve_care<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
) -> Result<DMatrix<T>, NumericsError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(NumericsError::Dimension(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if c.ncols() != n {
        return Err(NumericsError::Dimension(format!(
            "C has {} columns, expected {n}",
            c.ncols()
        )));
    }
    if !is_detectable(a, c) {
        return Err(NumericsError::NotDetectable);
    }
    let ctc = c.transpose() * c;
    let eye = DMatrix::<T>::identity(n, n);

    // Hamiltonian of the dual control problem: stable subspace carries S.
    let mut ham = DMatrix::<T>::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(&a.transpose());
    ham.view_mut((0, n), (n, n)).copy_from(&(-&ctc));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-&eye));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a));

    let sign = matrix_sign(&ham)?;
    // Projector onto the stable invariant subspace; its range has rank n.
    let proj = (DMatrix::identity(2 * n, 2 * n) - sign) * cv::<T>(0.5);
    let qr = proj.col_piv_qr();
    let basis = qr.q().columns(0, n).into_owned();
    let u1 = basis.rows(0, n).into_owned();
    let u2 = basis.rows(n, n).into_owned();
    let st = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or_else(|| NumericsError::NoConvergence("stable subspace basis is degenerate".into()))?;
    let mut s = (st.transpose() + st) * cv::<T>(0.5);

    // Newton polish: each step solves the closed-loop Lyapunov equation
    // exactly (dense Kronecker form; the sizes here are small).
    let mut best = s.clone();
    let mut best_res = frobenius(&residual(a, &ctc, &best));
    for _ in 0..15 {
        let acl = a - &s * &ctc;
        let mut lhs = DMatrix::<T>::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // vec(Acl X): block row structure of I (x) Acl.
                    lhs[(j * n + i, j * n + k)] += acl[(i, k)];
                    // vec(X Acl'): Acl (x) I.
                    lhs[(j * n + i, k * n + i)] += acl[(j, k)];
                }
            }
        }
        let rhs_mat = -(&eye) - &s * &ctc * &s;
        let rhs = vectorize(&rhs_mat);
        let Some(xv) = lhs.lu().solve(&rhs) else { break };
        let mut next = DMatrix::<T>::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                next[(i, j)] = xv[j * n + i];
            }
        }
        next = (next.transpose() + &next) * cv::<T>(0.5);
        let res = frobenius(&residual(a, &ctc, &next));
        if !res.is_finite() {
            break;
        }
        let improved = res < best_res;
        if improved {
            best_res = res;
            best = next.clone();
        }
        let settled = res <= precision_tol::<T>(1e-13, 1e-6) * (T::one() + frobenius(&next));
        s = next;
        if settled || !improved {
            break;
        }
    }
    let s = best;

    let scale = T::one() + frobenius(&s);
    if best_res > precision_tol::<T>(1e-8, 1e-3) * scale {
        return Err(NumericsError::NoConvergence(format!(
            "residual {} exceeds gate",
            crate::scalar::to_f64(best_res / scale)
        )));
    }
    let eigs = s.clone().symmetric_eigen().eigenvalues;
    if eigs.iter().any(|l| *l < -precision_tol::<T>(1e-8, 1e-3) * scale) {
        return Err(NumericsError::NoConvergence(
            "solution is not positive semidefinite".into(),
        ));
    }
    let acl = a - &s * &ctc;
    let unstable = acl
        .complex_eigenvalues()
        .iter()
        .any(|l| l.re >= precision_tol::<T>(1e-9, 1e-5));
    if unstable {
        return Err(NumericsError::NoConvergence(
            "solution is not stabilizing".into(),
        ));
    }
    Ok(s)
}

/// Column-major vectorization, matching the Kronecker index bookkeeping
/// in the Newton step.
fn vectorize<T: Scalar>(m: &DMatrix<T>) -> nalgebra::DVector<T> {
    nalgebra::DVector::from_iterator(m.nrows() * m.ncols(), m.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_unstable_plant() {
        // 2s - s^2 + 1 = 0, stabilizing root 1 + sqrt(2).
        let s = solve_care(&dmatrix![1.0f64], &dmatrix![1.0]).unwrap();
        assert!((s[(0, 0)] - (1.0 + 2.0_f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn scalar_integrator() {
        let s = solve_care(&dmatrix![0.0f64], &dmatrix![1.0]).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn double_integrator_closed_form() {
        // Hand-solved: S = [[sqrt(3), 1], [1, sqrt(3)]].
        let a = dmatrix![0.0f64, 1.0; 0.0, 0.0];
        let c = dmatrix![1.0, 0.0];
        let s = solve_care(&a, &c).unwrap();
        let r3 = 3.0_f64.sqrt();
        let expect = dmatrix![r3, 1.0; 1.0, r3];
        assert!(frobenius(&(s - expect)) < 1e-9);
    }

    #[test]
    fn undetectable_pair_is_rejected() {
        assert_eq!(
            solve_care(&dmatrix![1.0f64], &dmatrix![0.0]),
            Err(NumericsError::NotDetectable)
        );
    }

    #[test]
    fn detectable_but_not_observable() {
        // Unobservable -2 mode: stabilizing solution still exists.
        let a = dmatrix![1.0f64, 0.0; 0.0, -2.0];
        let c = dmatrix![1.0, 0.0];
        let s = solve_care(&a, &c).unwrap();
        let ctc = c.transpose() * &c;
        let res = residual(&a, &ctc, &s);
        assert!(frobenius(&res) < 1e-8 * (1.0 + frobenius(&s)));
    }

    #[test]
    fn random_observable_pairs_satisfy_the_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..25 {
            let n = 1 + (trial % 5);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let p = 1 + (trial % 2);
            let c = DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0));
            if !is_detectable(&a, &c) {
                continue;
            }
            let s = solve_care(&a, &c).unwrap();
            let ctc = c.transpose() * &c;
            let scale = 1.0 + frobenius(&s);
            assert!(
                frobenius(&residual(&a, &ctc, &s)) <= 1e-8 * scale,
                "trial {trial}: residual too large"
            );
            let acl = &a - &s * &ctc;
            assert!(acl.complex_eigenvalues().iter().all(|l| l.re < 0.0));
        }
    }
}
