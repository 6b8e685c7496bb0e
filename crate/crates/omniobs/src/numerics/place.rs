//! Observer eigenstructure assignment.
//!
//! `place_observer_gain(A, C, poles)` returns `L` such that `A + L C` has
//! the requested spectrum on the observable subspace. Internally the dual
//! controllability problem for `(A', C')` is solved with a Sylvester-based
//! assignment: pick a target matrix `F` in real block form carrying the
//! requested poles, pick a parameter matrix `G`, solve `A X - X F = -B G`
//! column by column, and read the feedback off `G X^{-1}`. A staircase split
//! computed first confines the assignment to the observable subspace, so
//! unobservable-but-stable modes are left untouched; an unstable
//! unobservable mode is reported as `NotDetectable`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::numerics::linalg::{orthonormal_complement, svd_rank};
use crate::numerics::NumericsError;
use crate::scalar::{cv, precision_tol, Scalar};

/// Default observer poles `-1, -2, ..., -n`.
pub fn default_poles<T: Scalar>(n: usize) -> Vec<Complex<T>> {
    (1..=n)
        .map(|k| Complex::new(-cv::<T>(k as f64), T::zero()))
        .collect()
}

/// Stable real-part margin: modes with real part above this are treated as
/// not acceptable for the unobservable subspace.
const STABILITY_MARGIN: f64 = 1e-9;

struct Staircase<T: Scalar> {
    /// Orthogonal basis; first `nc` columns span the controllable (dual:
    /// observable) subspace.
    q: DMatrix<T>,
    nc: usize,
}

/// Controllability staircase of `(a, b)` via a pivoted QR of the Krylov
/// matrix.
fn staircase<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<Staircase<T>, NumericsError> {
    let n = a.nrows();
    let m = b.ncols();
    let mut krylov = DMatrix::zeros(n, n.max(1) * m);
    let mut block = b.clone();
    for k in 0..n {
        krylov.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    let nc = svd_rank(&krylov);
    let qc = if nc == 0 {
        DMatrix::zeros(n, 0)
    } else {
        let qr = krylov.col_piv_qr();
        let q = qr.q();
        q.columns(0, nc).into_owned()
    };
    let qu = orthonormal_complement(&qc)?;
    let mut q = DMatrix::zeros(n, n);
    q.view_mut((0, 0), (n, nc)).copy_from(&qc);
    q.view_mut((0, nc), (n, n - nc)).copy_from(&qu);
    Ok(Staircase { q, nc })
}

/// Whether every unobservable mode of `(a, c)` is strictly stable.
pub fn is_detectable<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>) -> bool {
    let n = a.nrows();
    if a.ncols() != n || c.ncols() != n {
        return false;
    }
    let Ok(stair) = staircase(&a.transpose(), &c.transpose()) else {
        return false;
    };
    if stair.nc == n {
        return true;
    }
    let at = stair.q.transpose() * a.transpose() * &stair.q;
    let au = at
        .view((stair.nc, stair.nc), (n - stair.nc, n - stair.nc))
        .into_owned();
    au.complex_eigenvalues()
        .iter()
        .all(|l| l.re < -cv::<T>(STABILITY_MARGIN))
}

#[derive(Clone, Copy)]
enum PoleBlock<T> {
    Real { value: T, len: usize },
    Pair { re: T, im: T, len: usize },
}

fn validate_poles<T: Scalar>(
    n: usize,
    poles: &[Complex<T>],
) -> Result<Vec<Complex<T>>, NumericsError> {
    if poles.len() != n {
        return Err(NumericsError::BadPoleSet(format!(
            "expected {n} poles, got {}",
            poles.len()
        )));
    }
    for p in poles {
        if !(p.re < T::zero()) || !p.re.is_finite() || !p.im.is_finite() {
            return Err(NumericsError::BadPoleSet(format!(
                "pole {} + {}i is not strictly stable",
                crate::scalar::to_f64(p.re),
                crate::scalar::to_f64(p.im)
            )));
        }
    }
    // Conjugate closure: pair every pole with positive imaginary part.
    let mut remaining: Vec<Complex<T>> = poles.to_vec();
    let mut sorted = Vec::with_capacity(n);
    while let Some(p) = remaining.pop() {
        if p.im == T::zero() {
            sorted.push(p);
            continue;
        }
        let tol = precision_tol::<T>(1e-9, 1e-5) * (T::one() + p.im.abs() + p.re.abs());
        let mate = remaining.iter().position(|q| {
            (q.re - p.re).abs() <= tol && (q.im + p.im).abs() <= tol
        });
        match mate {
            Some(idx) => {
                remaining.swap_remove(idx);
                let im = p.im.abs();
                sorted.push(Complex::new(p.re, im));
                sorted.push(Complex::new(p.re, -im));
            }
            None => {
                return Err(NumericsError::BadPoleSet(
                    "complex poles must come in conjugate pairs".into(),
                ))
            }
        }
    }
    sorted.sort_by(|a, b| {
        (a.re, a.im.abs(), a.im)
            .partial_cmp(&(b.re, b.im.abs(), b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(sorted)
}

/// Picks a conjugate-closed subset of size `nc` from the validated,
/// sorted list.
fn choose_subset<T: Scalar>(
    sorted: &[Complex<T>],
    nc: usize,
) -> Result<Vec<Complex<T>>, NumericsError> {
    let mut chosen = Vec::with_capacity(nc);
    let mut i = 0;
    while i < sorted.len() && chosen.len() < nc {
        if sorted[i].im == T::zero() {
            chosen.push(sorted[i]);
            i += 1;
        } else {
            if chosen.len() + 2 <= nc {
                chosen.push(sorted[i]);
                chosen.push(sorted[i + 1]);
            }
            i += 2;
        }
    }
    if chosen.len() != nc {
        return Err(NumericsError::BadPoleSet(format!(
            "cannot select a conjugate-closed subset of size {nc} for the observable subspace"
        )));
    }
    Ok(chosen)
}

/// Groups a sorted conjugate-closed list into real-form blocks, merging
/// (exactly) repeated values into chains.
fn group_blocks<T: Scalar>(chosen: &[Complex<T>]) -> Vec<PoleBlock<T>> {
    let mut blocks: Vec<PoleBlock<T>> = Vec::new();
    let mut i = 0;
    while i < chosen.len() {
        let p = chosen[i];
        if p.im == T::zero() {
            match blocks.last_mut() {
                Some(PoleBlock::Real { value, len }) if *value == p.re => *len += 1,
                _ => blocks.push(PoleBlock::Real { value: p.re, len: 1 }),
            }
            i += 1;
        } else {
            let (re, im) = (p.re, p.im.abs());
            match blocks.last_mut() {
                Some(PoleBlock::Pair { re: r, im: w, len }) if *r == re && *w == im => *len += 1,
                _ => blocks.push(PoleBlock::Pair { re, im, len: 1 }),
            }
            i += 2;
        }
    }
    blocks
}

/// Real block-form target matrix: Jordan chains for repeated reals,
/// `[[s, w], [-w, s]]` blocks (chained by identity superblocks) for
/// complex pairs.
fn target_matrix<T: Scalar>(blocks: &[PoleBlock<T>], nc: usize) -> DMatrix<T> {
    let mut f = DMatrix::zeros(nc, nc);
    let mut at = 0;
    for b in blocks {
        match *b {
            PoleBlock::Real { value, len } => {
                for k in 0..len {
                    f[(at + k, at + k)] = value;
                    if k + 1 < len {
                        f[(at + k, at + k + 1)] = T::one();
                    }
                }
                at += len;
            }
            PoleBlock::Pair { re, im, len } => {
                for k in 0..len {
                    let j = at + 2 * k;
                    f[(j, j)] = re;
                    f[(j, j + 1)] = im;
                    f[(j + 1, j)] = -im;
                    f[(j + 1, j + 1)] = re;
                    if k + 1 < len {
                        f[(j, j + 2)] = T::one();
                        f[(j + 1, j + 3)] = T::one();
                    }
                }
                at += 2 * len;
            }
        }
    }
    f
}

/// Solves `A X - X F = -B G` column by column, exploiting the real block
/// structure of `F`. Returns `None` when a shifted system is singular.
fn solve_sylvester<T: Scalar>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    g: &DMatrix<T>,
    f: &DMatrix<T>,
    blocks: &[PoleBlock<T>],
) -> Option<DMatrix<T>> {
    let nc = a.nrows();
    let mut x = DMatrix::<T>::zeros(nc, nc);
    let prior = |x: &DMatrix<T>, col: usize, skip: &[usize]| -> DVector<T> {
        let mut rhs = DVector::zeros(nc);
        for i in 0..col {
            if skip.contains(&i) {
                continue;
            }
            let fij = f[(i, col)];
            if fij != T::zero() {
                rhs += x.column(i) * fij;
            }
        }
        rhs
    };
    let mut col = 0;
    for blk in blocks {
        match *blk {
            PoleBlock::Real { value, len } => {
                for _ in 0..len {
                    let mut rhs = -(b * g.column(col)) + prior(&x, col, &[]);
                    let shifted = a - DMatrix::identity(nc, nc) * value;
                    let lu = shifted.lu();
                    rhs = lu.solve(&rhs)?;
                    x.set_column(col, &rhs);
                    col += 1;
                }
            }
            PoleBlock::Pair { re, im, len } => {
                for _ in 0..len {
                    let (j0, j1) = (col, col + 1);
                    let r0 = -(b * g.column(j0)) + prior(&x, j0, &[]);
                    let r1 = -(b * g.column(j1)) + prior(&x, j1, &[j0]);
                    let mut big = DMatrix::<T>::zeros(2 * nc, 2 * nc);
                    let shifted = a - DMatrix::identity(nc, nc) * re;
                    big.view_mut((0, 0), (nc, nc)).copy_from(&shifted);
                    big.view_mut((nc, nc), (nc, nc)).copy_from(&shifted);
                    for k in 0..nc {
                        big[(k, nc + k)] = im;
                        big[(nc + k, k)] = -im;
                    }
                    let mut rhs = DVector::<T>::zeros(2 * nc);
                    rhs.rows_mut(0, nc).copy_from(&r0);
                    rhs.rows_mut(nc, nc).copy_from(&r1);
                    let sol = big.lu().solve(&rhs)?;
                    x.set_column(j0, &sol.rows(0, nc).into_owned());
                    x.set_column(j1, &sol.rows(nc, nc).into_owned());
                    col += 2;
                }
            }
        }
    }
    Some(x)
}

/// Multiset comparison of spectra within `1e-6 (1 + |lambda|)`.
fn spectra_match<T: Scalar>(expected: &[Complex<T>], actual: &[Complex<T>]) -> bool {
    if expected.len() != actual.len() {
        return false;
    }
    let mut used = vec![false; actual.len()];
    for e in expected {
        let tol = precision_tol::<T>(1e-6, 5e-3) * (T::one() + (e.re * e.re + e.im * e.im).sqrt());
        let mut found = false;
        for (k, a) in actual.iter().enumerate() {
            if used[k] {
                continue;
            }
            let d = ((a.re - e.re) * (a.re - e.re) + (a.im - e.im) * (a.im - e.im)).sqrt();
            if d <= tol {
                used[k] = true;
                found = true;
                break;
            }
        }
        if !found {
            return false;
        }
    }
    true
}

/// Output-injection gain `L` with `A + L C` carrying `poles` on the
/// observable subspace and the (necessarily stable) unobservable modes
/// untouched.
pub fn place_observer_gain<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    poles: &[Complex<T>],
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
    let p = c.nrows();
    let sorted = validate_poles(n, poles)?;

    let ad = a.transpose();
    let bd = c.transpose();
    let stair = staircase(&ad, &bd)?;
    let nc = stair.nc;
    let at = stair.q.transpose() * &ad * &stair.q;
    let bt = stair.q.transpose() * &bd;
    let au_eigs: Vec<Complex<T>> = if nc == n {
        Vec::new()
    } else {
        let au = at.view((nc, nc), (n - nc, n - nc)).into_owned();
        au.complex_eigenvalues().iter().copied().collect()
    };
    if au_eigs.iter().any(|l| !(l.re < -cv::<T>(STABILITY_MARGIN))) {
        return Err(NumericsError::NotDetectable);
    }

    if nc == 0 {
        return Ok(DMatrix::zeros(n, p));
    }

    let ac = at.view((0, 0), (nc, nc)).into_owned();
    let bc = bt.view((0, 0), (nc, p)).into_owned();
    let chosen = choose_subset(&sorted, nc)?;
    let blocks = group_blocks(&chosen);
    let f = target_matrix(&blocks, nc);

    let mut expected = chosen.clone();
    expected.extend(au_eigs.iter().copied());

    for attempt in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x00C0_FFEE + attempt);
        // A deterministic pre-feedback keeps the shifted solves nonsingular
        // when a requested pole collides with an eigenvalue of `ac`.
        let g0 = if attempt == 0 {
            DMatrix::zeros(p, nc)
        } else {
            DMatrix::from_fn(p, nc, |_, _| cv::<T>(rng.random_range(-0.5..0.5)))
        };
        let ac_shifted = &ac + &bc * &g0;
        let g = if p == 1 && attempt == 0 {
            DMatrix::from_element(1, nc, T::one())
        } else {
            DMatrix::from_fn(p, nc, |_, _| cv::<T>(rng.random_range(-1.0..1.0)))
        };
        let Some(x) = solve_sylvester(&ac_shifted, &bc, &g, &f, &blocks) else {
            continue;
        };
        // K = (G + G0 X) X^{-1}; transpose the solve to reuse LU.
        let target = (&g + &g0 * &x).transpose();
        let Some(kt) = x.transpose().lu().solve(&target) else {
            continue;
        };
        let kc = kt.transpose();
        let mut khat = DMatrix::<T>::zeros(p, n);
        khat.view_mut((0, 0), (p, nc)).copy_from(&kc);
        let kd = khat * stair.q.transpose();
        let l = kd.transpose();
        let closed = a + &l * c;
        let actual: Vec<Complex<T>> = closed.complex_eigenvalues().iter().copied().collect();
        if spectra_match(&expected, &actual) {
            return Ok(l);
        }
    }
    Err(NumericsError::PlacementFailed(
        "no parameter choice produced the requested spectrum".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn poles_of(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
        let mut v: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn double_integrator_poles_land_exactly() {
        let a = dmatrix![0.0f64, 1.0; 0.0, 0.0];
        let c = dmatrix![1.0, 0.0];
        let poles = vec![Complex::new(-1.0, 0.0), Complex::new(-2.0, 0.0)];
        let l = place_observer_gain(&a, &c, &poles).unwrap();
        // Unique solution for this pair.
        assert!((l[(0, 0)] + 3.0).abs() < 1e-9, "l = {l}");
        assert!((l[(1, 0)] + 2.0).abs() < 1e-9, "l = {l}");
        let spec = poles_of(&(a + l * c));
        assert!((spec[0].re + 2.0).abs() < 1e-8);
        assert!((spec[1].re + 1.0).abs() < 1e-8);
    }

    #[test]
    fn scalar_integrator() {
        let a = dmatrix![0.0f64];
        let c = dmatrix![1.0];
        let l = place_observer_gain(&a, &c, &[Complex::new(-1.0, 0.0)]).unwrap();
        assert!((l[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn undetectable_pair_is_rejected() {
        let a = dmatrix![1.0f64];
        let c = dmatrix![0.0];
        assert_eq!(
            place_observer_gain(&a, &c, &[Complex::new(-1.0, 0.0)]),
            Err(NumericsError::NotDetectable)
        );
    }

    #[test]
    fn unstable_or_lonely_poles_are_rejected() {
        let a = dmatrix![0.0f64, 1.0; 0.0, 0.0];
        let c = dmatrix![1.0, 0.0];
        assert!(matches!(
            place_observer_gain(&a, &c, &[Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)]),
            Err(NumericsError::BadPoleSet(_))
        ));
        assert!(matches!(
            place_observer_gain(&a, &c, &[Complex::new(-1.0, 2.0), Complex::new(-1.0, 1.0)]),
            Err(NumericsError::BadPoleSet(_))
        ));
        assert!(matches!(
            place_observer_gain(&a, &c, &[Complex::new(-1.0, 0.0)]),
            Err(NumericsError::BadPoleSet(_))
        ));
    }

    #[test]
    fn complex_pairs_and_repeats_are_assigned() {
        let a = dmatrix![
            0.0f64, 1.0, 0.0, 0.0;
            0.0, 0.0, 1.0, 0.0;
            0.0, 0.0, 0.0, 1.0;
            -1.0, 0.5, 2.0, -0.3
        ];
        let c = dmatrix![1.0, 0.0, 0.0, 0.0];
        let requested = vec![
            Complex::new(-1.0, 2.0),
            Complex::new(-1.0, -2.0),
            Complex::new(-3.0, 0.0),
            Complex::new(-3.0, 0.0),
        ];
        let l = place_observer_gain(&a, &c, &requested).unwrap();
        let spec = poles_of(&(a.clone() + l * c));
        let mut expect = requested.clone();
        expect.sort_by(|x, y| (x.re, x.im).partial_cmp(&(y.re, y.im)).unwrap());
        for (s, e) in spec.iter().zip(&expect) {
            assert!(
                ((s.re - e.re).powi(2) + (s.im - e.im).powi(2)).sqrt() < 1e-6,
                "spec {spec:?} vs {expect:?}"
            );
        }
    }

    #[test]
    fn stable_unobservable_mode_is_left_alone() {
        // Block diagonal: observable integrator, unobservable -5 mode.
        let a = dmatrix![0.0f64, 0.0; 0.0, -5.0];
        let c = dmatrix![1.0, 0.0];
        let l = place_observer_gain(&a, &c, &[Complex::new(-1.0, 0.0), Complex::new(-2.0, 0.0)])
            .unwrap();
        let spec = poles_of(&(a + l * c));
        // -5 stays; the most negative requested pole is picked for the
        // one-dimensional observable subspace.
        assert!(spec.iter().any(|s| (s.re + 5.0).abs() < 1e-8));
        assert!(spec.iter().any(|s| (s.re + 2.0).abs() < 1e-6));
    }

    #[test]
    fn detectability_probe() {
        assert!(is_detectable(
            &dmatrix![0.0f64, 1.0; 0.0, 0.0],
            &dmatrix![1.0, 0.0]
        ));
        assert!(is_detectable(&dmatrix![-1.0f64], &dmatrix![0.0]));
        assert!(!is_detectable(&dmatrix![0.0f64], &dmatrix![0.0]));
    }

    #[test]
    fn multi_output_placement() {
        let a = dmatrix![
            0.0, 1.0, 0.0;
            0.0, 0.0, 1.0;
            0.5, -0.2, 0.1
        ];
        let c = dmatrix![1.0, 0.0, 0.0; 0.0, 1.0, 0.0];
        let requested = default_poles::<f64>(3);
        let l = place_observer_gain(&a, &c, &requested).unwrap();
        let spec = poles_of(&(a + l * c));
        for (s, e) in spec.iter().zip([-3.0, -2.0, -1.0]) {
            assert!((s.re - e).abs() < 1e-6 && s.im.abs() < 1e-6, "spec {spec:?}");
        }
    }
}
