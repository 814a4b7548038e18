//! Point-in-visible-region tests in a face's parameter domain.
//!
//! Loops are closed polylines. Outer loops wind counterclockwise and holes
//! clockwise, so the visible region is exactly where the summed winding number
//! is positive.

use crate::geometry::GEOM_EPS;

/// Winding number of `poly` around `p` (crossing-count form; no trig).
pub fn winding_number(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let is_left = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && is_left > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && is_left < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

pub fn on_boundary(poly: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    let n = poly.len();
    (0..n).any(|i| segment_distance(poly[i], poly[(i + 1) % n], p) <= tol)
}

/// Shoelace area; positive for counterclockwise polylines.
pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// True if `p` lies in the visible region bounded by `loops`. Points within
/// [`GEOM_EPS`] of any loop count as inside.
pub fn inside_visible_region(loops: &[Vec<[f64; 2]>], p: [f64; 2]) -> bool {
    if loops.iter().any(|l| on_boundary(l, p, GEOM_EPS)) {
        return true;
    }
    loops.iter().map(|l| winding_number(l, p)).sum::<i32>() > 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(lo: f64, hi: f64) -> Vec<[f64; 2]> {
        vec![[lo, lo], [hi, lo], [hi, hi], [lo, hi]]
    }

    fn holed() -> Vec<Vec<[f64; 2]>> {
        let mut hole = square(0.4, 0.6);
        hole.reverse();
        vec![square(0.0, 1.0), hole]
    }

    #[test]
    fn center_without_holes() {
        assert!(inside_visible_region(&[square(0.0, 1.0)], [0.5, 0.5]));
    }

    #[test]
    fn hole_and_outside() {
        let loops = holed();
        assert!(!inside_visible_region(&loops, [0.5, 0.5]));
        assert!(inside_visible_region(&loops, [0.2, 0.5]));
        assert!(!inside_visible_region(&loops, [1.2, 0.5]));
    }

    #[test]
    fn boundary_counts_inside() {
        let loops = holed();
        assert!(inside_visible_region(&loops, [1.0, 0.3]));
        assert!(inside_visible_region(&loops, [0.4, 0.5]));
        assert!(inside_visible_region(&loops, [0.0, 0.0]));
    }

    #[test]
    fn orientation_by_area() {
        assert!(signed_area(&square(0.0, 2.0)) > 0.0);
        let mut cw = square(0.0, 2.0);
        cw.reverse();
        assert!((signed_area(&cw) + 4.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_outside_corner() {
        let tri = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!inside_visible_region(std::slice::from_ref(&tri), [0.9, 0.9]));
        assert!(inside_visible_region(&[tri], [0.2, 0.2]));
    }
}
