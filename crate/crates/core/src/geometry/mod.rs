//! Parametric curves and surfaces: evaluation, normals and the
//! parameterization edits (knot insertion, degree elevation) used to probe
//! reparametrization invariance.

mod curve;
pub mod nurbs;
mod surface;

use serde::{Deserialize, Serialize};

pub use curve::ParametricCurve;
pub use nurbs::{BSplineCurve, BSplineSurface, Direction};
pub use surface::{ParametricSurface, SurfaceEval};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Geometric tolerance used for domain checks, knot comparisons and the like.
pub const GEOM_EPS: f64 = 1e-9;
/// Step for central-difference derivative checks.
pub const DERIVATIVE_CHECK_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let i = Self { lo, hi };
        i.validate()?;
        Ok(i)
    }

    pub(crate) fn new_unchecked(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidGeometry(format!(
                "interval [{}, {}] must be finite with lo < hi",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `M` uniformly spaced parameters `lo + k (hi - lo) / (M - 1)`.
    pub fn uniform(&self, count: usize) -> Vec<f64> {
        assert!(count >= 2, "uniform sampling needs at least two samples");
        let step = self.len() / (count - 1) as f64;
        (0..count)
            .map(|k| if k + 1 == count { self.hi } else { self.lo + step * k as f64 })
            .collect()
    }

    /// Accepts `u` within [`GEOM_EPS`] of the interval and clamps it inside.
    pub fn check(&self, u: f64) -> Result<f64> {
        let tol = GEOM_EPS * (1.0 + self.len().abs());
        if !u.is_finite() || u < self.lo - tol || u > self.hi + tol {
            return Err(Error::Domain { value: u, lo: self.lo, hi: self.hi });
        }
        Ok(u.clamp(self.lo, self.hi))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { lo: self.lo * s, hi: self.hi * s }
    }
}

/// Builds an orthonormal `(x, y)` pair in the plane orthogonal to `axis`.
pub fn frame_from_axis(axis: &Vec3) -> (Vec3, Vec3) {
    let z = axis.normalize();
    let helper = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let x = helper.cross(&z).normalize();
    let y = z.cross(&x);
    (x, y)
}

pub(crate) fn check_frame(x: &Vec3, y: &Vec3) -> Result<()> {
    let ok = (x.norm() - 1.0).abs() < 1e-9 && (y.norm() - 1.0).abs() < 1e-9 && x.dot(y).abs() < 1e-9;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidGeometry("frame axes must be orthonormal".into()))
    }
}

pub(crate) fn check_point(p: &Vec3, what: &str) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidGeometry(format!("non-finite {what}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_hits_both_ends_exactly() {
        let i = Interval::new(0.1, 0.7).unwrap();
        let p = i.uniform(10);
        assert_eq!(p[0], 0.1);
        assert_eq!(p[9], 0.7);
        let step = (0.7 - 0.1) / 9.0;
        for w in p.windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-15);
        }
    }

    #[test]
    fn interval_rejects_reversed_or_nan() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn domain_check_tolerance() {
        let i = Interval::new(0.0, 1.0).unwrap();
        assert_eq!(i.check(1.0 + 1e-12).unwrap(), 1.0);
        assert!(i.check(1.001).is_err());
    }

    #[test]
    fn axis_frame_is_right_handed() {
        for axis in [Vec3::z(), Vec3::x(), Vec3::new(0.3, -0.2, 0.9)] {
            let (x, y) = frame_from_axis(&axis);
            check_frame(&x, &y).unwrap();
            assert!((x.cross(&y) - axis.normalize()).norm() < 1e-12);
        }
    }
}
