use serde::{Deserialize, Serialize};

use super::{check_frame, check_point, BSplineCurve, Interval, Vec3, GEOM_EPS};
use crate::error::{Error, Result};

/// Edge geometry. Lines are parameterized by length along `direction`
/// (scaled by its norm), arcs by angle in radians, Béziers on `[0, 1]` and
/// B-splines on their knot domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParametricCurve {
    Line {
        origin: Vec3,
        direction: Vec3,
    },
    CircularArc {
        center: Vec3,
        radius: f64,
        x_axis: Vec3,
        y_axis: Vec3,
        start: f64,
        end: f64,
    },
    CubicBezier {
        controls: [Vec3; 4],
    },
    #[serde(rename = "bspline")]
    BSpline(BSplineCurve),
}

impl ParametricCurve {
    pub fn line_through(a: Vec3, b: Vec3) -> Self {
        ParametricCurve::Line { origin: a, direction: (b - a).normalize() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ParametricCurve::Line { .. } => "line",
            ParametricCurve::CircularArc { .. } => "circular_arc",
            ParametricCurve::CubicBezier { .. } => "cubic_bezier",
            ParametricCurve::BSpline(_) => "bspline",
        }
    }

    /// `None` for curves defined on the whole real line.
    pub fn natural_domain(&self) -> Option<Interval> {
        match self {
            ParametricCurve::Line { .. } => None,
            ParametricCurve::CircularArc { start, end, .. } => Some(Interval::new_unchecked(*start, *end)),
            ParametricCurve::CubicBezier { .. } => Some(Interval::new_unchecked(0.0, 1.0)),
            ParametricCurve::BSpline(b) => Some(b.domain()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParametricCurve::Line { origin, direction } => {
                check_point(origin, "line origin")?;
                check_point(direction, "line direction")?;
                if direction.norm() < GEOM_EPS {
                    return Err(Error::InvalidGeometry("line direction has zero length".into()));
                }
            }
            ParametricCurve::CircularArc { center, radius, x_axis, y_axis, start, end } => {
                check_point(center, "arc center")?;
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidGeometry(format!("arc radius {radius} must be positive")));
                }
                check_frame(x_axis, y_axis)?;
                Interval::new(*start, *end)?;
            }
            ParametricCurve::CubicBezier { controls } => {
                for c in controls {
                    check_point(c, "bezier control point")?;
                }
            }
            ParametricCurve::BSpline(b) => b.validate()?,
        }
        Ok(())
    }

    /// Point `C(u)` and the parametric derivative `dC/du`.
    pub fn eval(&self, u: f64) -> Result<(Vec3, Vec3)> {
        match self {
            ParametricCurve::Line { origin, direction } => {
                if direction.norm() < GEOM_EPS {
                    return Err(Error::InvalidGeometry("line direction has zero length".into()));
                }
                if !u.is_finite() {
                    return Err(Error::Domain { value: u, lo: f64::NEG_INFINITY, hi: f64::INFINITY });
                }
                Ok((origin + direction * u, *direction))
            }
            ParametricCurve::CircularArc { center, radius, x_axis, y_axis, start, end } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidGeometry("arc radius must be positive".into()));
                }
                let u = Interval::new_unchecked(*start, *end).check(u)?;
                let (s, c) = u.sin_cos();
                let point = center + (x_axis * c + y_axis * s) * *radius;
                let deriv = (y_axis * c - x_axis * s) * *radius;
                Ok((point, deriv))
            }
            ParametricCurve::CubicBezier { controls: [p0, p1, p2, p3] } => {
                let t = Interval::new_unchecked(0.0, 1.0).check(u)?;
                let s = 1.0 - t;
                let point = p0 * (s * s * s) + p1 * (3.0 * s * s * t) + p2 * (3.0 * s * t * t) + p3 * (t * t * t);
                let deriv = ((p1 - p0) * (s * s) + (p2 - p1) * (2.0 * s * t) + (p3 - p2) * (t * t)) * 3.0;
                Ok((point, deriv))
            }
            ParametricCurve::BSpline(b) => b.eval(u),
        }
    }

    pub fn point(&self, u: f64) -> Result<Vec3> {
        Ok(self.eval(u)?.0)
    }

    /// True when the parameter measures length, so a uniform scaling of the
    /// model must also scale parameter intervals on this curve.
    pub fn has_length_parameter(&self) -> bool {
        matches!(self, ParametricCurve::Line { .. })
    }

    /// Applies `p -> scale * p + offset`. Length parameters are kept in model
    /// units, so callers rescale intervals when [`Self::has_length_parameter`].
    pub fn transformed(&self, scale: f64, offset: &Vec3) -> Self {
        let map = |p: &Vec3| p * scale + offset;
        match self {
            ParametricCurve::Line { origin, direction } => {
                ParametricCurve::Line { origin: map(origin), direction: *direction }
            }
            ParametricCurve::CircularArc { center, radius, x_axis, y_axis, start, end } => ParametricCurve::CircularArc {
                center: map(center),
                radius: radius * scale,
                x_axis: *x_axis,
                y_axis: *y_axis,
                start: *start,
                end: *end,
            },
            ParametricCurve::CubicBezier { controls } => ParametricCurve::CubicBezier { controls: controls.map(|c| map(&c)) },
            ParametricCurve::BSpline(b) => {
                let mut b = b.clone();
                b.map_points(map);
                ParametricCurve::BSpline(b)
            }
        }
    }

    pub fn insert_knot(&self, t: f64) -> Result<Self> {
        match self {
            ParametricCurve::BSpline(b) => Ok(ParametricCurve::BSpline(b.insert_knot(t)?)),
            _ => Err(Error::UnsupportedVariant("knot insertion needs a bspline curve")),
        }
    }

    pub fn elevate_degree(&self) -> Result<Self> {
        match self {
            ParametricCurve::BSpline(b) => Ok(ParametricCurve::BSpline(b.elevate_degree()?)),
            _ => Err(Error::UnsupportedVariant("degree elevation needs a bspline curve")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn unit_arc() -> ParametricCurve {
        ParametricCurve::CircularArc {
            center: Vec3::zeros(),
            radius: 1.0,
            x_axis: Vec3::x(),
            y_axis: Vec3::y(),
            start: 0.0,
            end: FRAC_PI_2,
        }
    }

    #[test]
    fn line_eval() {
        let l = ParametricCurve::Line { origin: Vec3::zeros(), direction: Vec3::x() };
        let (p, d) = l.eval(0.5).unwrap();
        assert_eq!(p, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(d, Vec3::x());
    }

    #[test]
    fn arc_eval() {
        let (p, d) = unit_arc().eval(FRAC_PI_4).unwrap();
        let h = SQRT_2 / 2.0;
        assert!((p - Vec3::new(h, h, 0.0)).norm() < 1e-15);
        assert!((d - Vec3::new(-h, h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn arc_endpoints() {
        let arc = unit_arc();
        assert!((arc.point(0.0).unwrap() - Vec3::x()).norm() < 1e-12);
        assert!((arc.point(FRAC_PI_2).unwrap() - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn domain_and_degeneracy_errors() {
        assert!(matches!(unit_arc().eval(2.0), Err(Error::Domain { .. })));
        let l = ParametricCurve::Line { origin: Vec3::zeros(), direction: Vec3::zeros() };
        assert!(matches!(l.eval(0.0), Err(Error::InvalidGeometry(_))));
        assert!(l.validate().is_err());
    }

    #[test]
    fn non_bspline_refinement_is_unsupported() {
        assert!(matches!(unit_arc().insert_knot(0.5), Err(Error::UnsupportedVariant(_))));
        assert!(matches!(unit_arc().elevate_degree(), Err(Error::UnsupportedVariant(_))));
    }

    #[test]
    fn derivatives_match_finite_differences_for_every_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let curves = vec![
            ParametricCurve::Line { origin: Vec3::new(1.0, 2.0, 3.0), direction: Vec3::new(0.3, -0.4, 2.0) },
            ParametricCurve::CircularArc {
                center: Vec3::new(0.5, 0.0, 1.0),
                radius: 2.5,
                x_axis: Vec3::x(),
                y_axis: Vec3::z(),
                start: -1.0,
                end: 2.0,
            },
            ParametricCurve::CubicBezier {
                controls: [Vec3::zeros(), Vec3::new(1.0, 2.0, 0.0), Vec3::new(2.0, -1.0, 1.0), Vec3::new(3.0, 0.0, 0.0)],
            },
            ParametricCurve::BSpline(
                BSplineCurve::new(
                    2,
                    vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0],
                    vec![Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0), Vec3::new(2.0, 0.0, 1.0), Vec3::new(3.0, 1.0, 0.0)],
                    Some(vec![1.0, 0.7, 1.3, 1.0]),
                )
                .unwrap(),
            ),
        ];
        let h = super::super::DERIVATIVE_CHECK_STEP;
        for c in &curves {
            let dom = c.natural_domain().unwrap_or(Interval::new_unchecked(-5.0, 5.0));
            for _ in 0..100 {
                let u = rng.random_range(dom.lo + 2.0 * h..dom.hi - 2.0 * h);
                let (_, d) = c.eval(u).unwrap();
                let fd = (c.point(u + h).unwrap() - c.point(u - h).unwrap()) / (2.0 * h);
                let rel = (d - fd).norm() / d.norm().max(1e-6);
                assert!(rel < 1e-5, "{}: rel err {rel}", c.kind());
            }
        }
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_value(unit_arc()).unwrap();
        assert_eq!(json["type"], "circular_arc");
        let back: ParametricCurve = serde_json::from_value(json).unwrap();
        assert_eq!(back, unit_arc());
    }
}
