//! Rank decisions, column-space comparisons, and orthonormal complements.
//!
//! All rank decisions share one convention: singular values above
//! `1e-10 * sigma_max` count. Empty matrices (zero rows or columns) have
//! rank zero.

use nalgebra::DMatrix;

use crate::numerics::NumericsError;
use crate::scalar::{cv, precision_tol, Scalar};

/// Numerical rank by singular values.
pub fn svd_rank<T: Scalar>(m: &DMatrix<T>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if !(max > T::zero()) {
        return 0;
    }
    let tol = precision_tol::<T>(1e-10, 1e-5) * max;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Horizontal concatenation. Either side may have zero columns.
fn hstack<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    assert_eq!(a.nrows(), b.nrows(), "hstack needs equal row counts");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Whether `m1` and `m2` span the same column space: both ranks equal the
/// rank of the concatenation.
pub fn image_equal<T: Scalar>(m1: &DMatrix<T>, m2: &DMatrix<T>) -> bool {
    assert_eq!(m1.nrows(), m2.nrows(), "image comparison needs equal row counts");
    let r1 = svd_rank(m1);
    let r2 = svd_rank(m2);
    if r1 != r2 {
        return false;
    }
    svd_rank(&hstack(m1, m2)) == r1
}

/// Orthonormal basis of the orthogonal complement of the column span of
/// `t_id` (an `n x d` matrix with orthonormal columns, checked at a
/// precision-dependent tolerance).
///
/// The basis is built greedily from the standard basis: at each round the
/// coordinate vector with the largest residual after projecting out `t_id`
/// and the columns accepted so far is orthonormalized and appended. Each
/// column is sign-normalized so its first entry of visible magnitude is
/// positive. The result is deterministic for a fixed input.
pub fn orthonormal_complement<T: Scalar>(
    t_id: &DMatrix<T>,
) -> Result<DMatrix<T>, NumericsError> {
    let (n, d) = t_id.shape();
    if d > n {
        return Err(NumericsError::Dimension(format!(
            "complement of {n}x{d}: more columns than rows"
        )));
    }
    let gram = t_id.transpose() * t_id;
    let tol = precision_tol::<T>(1e-10, 1e-4);
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { T::one() } else { T::zero() };
            if (gram[(i, j)] - target).abs() > tol {
                return Err(NumericsError::NotOrthonormal);
            }
        }
    }

    let remaining = n - d;
    let mut basis = DMatrix::<T>::zeros(n, remaining);
    let mut accepted = 0;
    while accepted < remaining {
        // Residual of each coordinate vector against t_id and the accepted
        // columns; two projection passes keep the result orthogonal to
        // working precision.
        let mut best: Option<(usize, T)> = None;
        for k in 0..n {
            let mut v = nalgebra::DVector::<T>::zeros(n);
            v[k] = T::one();
            for _ in 0..2 {
                let coeff = t_id.transpose() * &v;
                v -= t_id * coeff;
                if accepted > 0 {
                    let acc = basis.columns(0, accepted);
                    let coeff = acc.transpose() * &v;
                    v -= acc * coeff;
                }
            }
            let norm = v.norm();
            if best.map_or(true, |(_, bn)| norm > bn) {
                best = Some((k, norm));
            }
        }
        let (k, norm) = best.expect("n > 0");
        if !(norm > precision_tol::<T>(1e-8, 1e-4)) {
            return Err(NumericsError::NotOrthonormal);
        }
        let mut v = nalgebra::DVector::<T>::zeros(n);
        v[k] = T::one();
        for _ in 0..2 {
            let coeff = t_id.transpose() * &v;
            v -= t_id * coeff;
            if accepted > 0 {
                let acc = basis.columns(0, accepted);
                let coeff = acc.transpose() * &v;
                v -= acc * coeff;
            }
        }
        v /= v.norm();
        if let Some(first) = v.iter().find(|x| x.abs() > cv::<T>(1e-9)) {
            if *first < T::zero() {
                v = -v;
            }
        }
        basis.set_column(accepted, &v);
        accepted += 1;
    }
    Ok(basis)
}
