//! Planar convex hulls and point-to-hull distances, used to verify that
//! followers end up inside the region spanned by the leaders.

use crate::scalar::{cv, Scalar};

fn cross<T: Scalar>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by Andrew's monotone chain, counterclockwise, no repeated
/// first point. Degenerate inputs collapse: coincident points give one
/// vertex, collinear points give the two extremes.
pub fn convex_hull_2d<T: Scalar>(points: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut pts: Vec<[T; 2]> = points.to_vec();
    pts.sort_by(|p, q| {
        p[0].partial_cmp(&q[0])
            .unwrap()
            .then(p[1].partial_cmp(&q[1]).unwrap())
    });
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    fn build<T: Scalar>(iter: impl Iterator<Item = [T; 2]>) -> Vec<[T; 2]> {
        let mut chain: Vec<[T; 2]> = Vec::new();
        for p in iter {
            while chain.len() >= 2
                && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) <= T::zero()
            {
                chain.pop();
            }
            chain.push(p);
        }
        chain
    }
    // Each chain ends where the other starts; drop both endpoints on merge.
    let mut lower = build(pts.iter().copied());
    let mut upper = build(pts.iter().rev().copied());
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn dist_to_segment<T: Scalar>(a: [T; 2], b: [T; 2], q: [T; 2]) -> T {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let aq = [q[0] - a[0], q[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 < cv(1e-30) {
        return super::norm2(aq);
    }
    let t = ((aq[0] * ab[0] + aq[1] * ab[1]) / len2)
        .max(T::zero())
        .min(T::one());
    super::norm2([q[0] - a[0] - t * ab[0], q[1] - a[1] - t * ab[1]])
}

/// Distance from `q` to the convex hull (zero inside). The hull must be in
/// the form produced by [`convex_hull_2d`]; one and two vertex degenerate
/// hulls are a point and a segment.
pub fn dist_to_hull<T: Scalar>(hull: &[[T; 2]], q: [T; 2]) -> T {
    assert!(!hull.is_empty(), "hull needs at least one point");
    match hull.len() {
        1 => super::norm2([q[0] - hull[0][0], q[1] - hull[0][1]]),
        2 => dist_to_segment(hull[0], hull[1], q),
        n => {
            let inside = (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], q) >= T::zero());
            if inside {
                return T::zero();
            }
            (0..n)
                .map(|i| dist_to_segment(hull[i], hull[(i + 1) % n], q))
                .fold(T::max_value().unwrap(), |acc, d| acc.min(d))
        }
    }
}

/// Whether `q` lies within `tol` of the convex hull of `points`.
pub fn point_in_convex_hull<T: Scalar>(points: &[[T; 2]], q: [T; 2], tol: T) -> bool {
    assert!(!points.is_empty(), "need at least one hull point");
    dist_to_hull(&convex_hull_2d(points), q) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn square_hull_is_counterclockwise_with_four_vertices() {
        let hull = convex_hull_2d(&SQUARE);
        assert_eq!(hull.len(), 4);
        let area2: f64 = (0..4)
            .map(|i| {
                let a = hull[i];
                let b = hull[(i + 1) % 4];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        assert!((area2 - 2.0).abs() < 1e-12, "signed area {area2}");
    }

    #[test]
    fn interior_points_are_inside() {
        assert!(point_in_convex_hull(&SQUARE, [0.5, 0.5], 0.0));
        assert!(point_in_convex_hull(&SQUARE, [0.0, 0.0], 0.0));
        assert!(point_in_convex_hull(&SQUARE, [1.0, 0.5], 0.0));
    }

    #[test]
    fn exterior_distance_is_euclidean() {
        let hull = convex_hull_2d(&SQUARE);
        assert!((dist_to_hull(&hull, [2.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((dist_to_hull(&hull, [2.0, 2.0]) - (2.0f64).sqrt()).abs() < 1e-12);
        assert!(!point_in_convex_hull(&SQUARE, [2.0, 0.0], 0.05));
        assert!(point_in_convex_hull(&SQUARE, [1.04, 0.5], 0.05));
    }

    #[test]
    fn interior_points_are_pruned() {
        let mut pts = SQUARE.to_vec();
        pts.push([0.5, 0.5]);
        pts.push([0.25, 0.25]);
        assert_eq!(convex_hull_2d(&pts).len(), 4);
    }

    #[test]
    fn segment_hull_from_two_or_collinear_points() {
        let seg = convex_hull_2d(&[[0.0f64, 0.0], [2.0, 0.0]]);
        assert_eq!(seg.len(), 2);
        assert!((dist_to_hull(&seg, [1.0, 0.0])).abs() < 1e-12);
        assert!((dist_to_hull(&seg, [1.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!((dist_to_hull(&seg, [3.0, 0.0]) - 1.0).abs() < 1e-12);

        let collinear = convex_hull_2d(&[[0.0f64, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_eq!(collinear.len(), 2);
        assert_eq!(collinear[0], [0.0, 0.0]);
        assert_eq!(collinear[1], [2.0, 0.0]);
    }

    #[test]
    fn point_hull_from_coincident_points() {
        let hull = convex_hull_2d(&[[1.0f64, 1.0], [1.0, 1.0]]);
        assert_eq!(hull.len(), 1);
        assert!((dist_to_hull(&hull, [1.0, 2.0]) - 1.0).abs() < 1e-12);
    }
}
