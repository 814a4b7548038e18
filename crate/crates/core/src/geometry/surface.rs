use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{check_frame, check_point, BSplineSurface, Direction, Interval, Vec3, GEOM_EPS};
use crate::error::{Error, Result};

/// Face geometry. Angular parameters are in radians; planar parameters and
/// the axial parameter of cylinders and cones are lengths.
///
/// Primitive frames are orthonormal with the axis `x_axis × y_axis`, except
/// planes, whose two spanning vectors may be arbitrary (non-parallel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParametricSurface {
    /// `origin + u u_axis + v v_axis`
    Plane { origin: Vec3, u_axis: Vec3, v_axis: Vec3 },
    /// `origin + r (cos u x + sin u y) + v z`
    Cylinder { origin: Vec3, x_axis: Vec3, y_axis: Vec3, radius: f64 },
    /// Longitude `u`, latitude `v` in `[-π/2, π/2]`.
    Sphere { center: Vec3, x_axis: Vec3, y_axis: Vec3, radius: f64 },
    /// `origin + (r + v tan α)(cos u x + sin u y) + v z`
    Cone { origin: Vec3, x_axis: Vec3, y_axis: Vec3, radius: f64, half_angle: f64 },
    /// `center + (R + r cos v)(cos u x + sin u y) + r sin v z`
    Torus { center: Vec3, x_axis: Vec3, y_axis: Vec3, major_radius: f64, minor_radius: f64 },
    #[serde(rename = "bspline_surface")]
    BSpline(BSplineSurface),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceEval {
    pub point: Vec3,
    pub du: Vec3,
    pub dv: Vec3,
    /// Set where `du × dv` vanishes (sphere and cone poles).
    pub degenerate: bool,
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGeometry(format!("{what} must be positive, found {x}")))
    }
}

impl ParametricSurface {
    pub fn kind(&self) -> &'static str {
        match self {
            ParametricSurface::Plane { .. } => "plane",
            ParametricSurface::Cylinder { .. } => "cylinder",
            ParametricSurface::Sphere { .. } => "sphere",
            ParametricSurface::Cone { .. } => "cone",
            ParametricSurface::Torus { .. } => "torus",
            ParametricSurface::BSpline(_) => "bspline_surface",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParametricSurface::Plane { origin, u_axis, v_axis } => {
                check_point(origin, "plane origin")?;
                if u_axis.cross(v_axis).norm() < GEOM_EPS {
                    return Err(Error::InvalidGeometry("plane axes are parallel".into()));
                }
            }
            ParametricSurface::Cylinder { origin, x_axis, y_axis, radius }
            | ParametricSurface::Sphere { center: origin, x_axis, y_axis, radius } => {
                check_point(origin, "origin")?;
                check_frame(x_axis, y_axis)?;
                positive(*radius, "radius")?;
            }
            ParametricSurface::Cone { origin, x_axis, y_axis, radius, half_angle } => {
                check_point(origin, "cone origin")?;
                check_frame(x_axis, y_axis)?;
                positive(*radius, "cone radius")?;
                if !(half_angle.abs() < FRAC_PI_2) {
                    return Err(Error::InvalidGeometry("cone half-angle must be below π/2".into()));
                }
            }
            ParametricSurface::Torus { center, x_axis, y_axis, major_radius, minor_radius } => {
                check_point(center, "torus center")?;
                check_frame(x_axis, y_axis)?;
                positive(*major_radius, "major radius")?;
                positive(*minor_radius, "minor radius")?;
                if major_radius <= minor_radius {
                    return Err(Error::InvalidGeometry("torus major radius must exceed minor radius".into()));
                }
            }
            ParametricSurface::BSpline(b) => b.validate()?,
        }
        Ok(())
    }

    fn check_params(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        let unbounded = |x: f64| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::Domain { value: x, lo: f64::NEG_INFINITY, hi: f64::INFINITY })
            }
        };
        match self {
            ParametricSurface::Sphere { .. } => {
                Ok((unbounded(u)?, Interval::new_unchecked(-FRAC_PI_2, FRAC_PI_2).check(v)?))
            }
            ParametricSurface::Cone { radius, half_angle, .. } => {
                let t = half_angle.tan();
                let v = unbounded(v)?;
                let rho = radius + v * t;
                if rho < -GEOM_EPS {
                    let limit = -radius / t;
                    let (lo, hi) = if t > 0.0 { (limit, f64::INFINITY) } else { (f64::NEG_INFINITY, limit) };
                    return Err(Error::Domain { value: v, lo, hi });
                }
                Ok((unbounded(u)?, v))
            }
            ParametricSurface::BSpline(b) => Ok((b.domain_u().check(u)?, b.domain_v().check(v)?)),
            _ => Ok((unbounded(u)?, unbounded(v)?)),
        }
    }

    /// Point `S(u, v)` with partials `S_u`, `S_v`.
    pub fn eval(&self, u: f64, v: f64) -> Result<SurfaceEval> {
        let (u, v) = self.check_params(u, v)?;
        let (point, du, dv) = match self {
            ParametricSurface::Plane { origin, u_axis, v_axis } => (origin + u_axis * u + v_axis * v, *u_axis, *v_axis),
            ParametricSurface::Cylinder { origin, x_axis, y_axis, radius } => {
                let z = x_axis.cross(y_axis);
                let (s, c) = u.sin_cos();
                let radial = x_axis * c + y_axis * s;
                let tangent = y_axis * c - x_axis * s;
                (origin + radial * *radius + z * v, tangent * *radius, z)
            }
            ParametricSurface::Sphere { center, x_axis, y_axis, radius } => {
                let z = x_axis.cross(y_axis);
                let (su, cu) = u.sin_cos();
                let (sv, cv) = v.sin_cos();
                let radial = x_axis * cu + y_axis * su;
                let point = center + (radial * cv + z * sv) * *radius;
                let du = (y_axis * cu - x_axis * su) * (radius * cv);
                let dv = (z * cv - radial * sv) * *radius;
                (point, du, dv)
            }
            ParametricSurface::Cone { origin, x_axis, y_axis, radius, half_angle } => {
                let z = x_axis.cross(y_axis);
                let t = half_angle.tan();
                let rho = (radius + v * t).max(0.0);
                let (s, c) = u.sin_cos();
                let radial = x_axis * c + y_axis * s;
                let point = origin + radial * rho + z * v;
                ((point), (y_axis * c - x_axis * s) * rho, radial * t + z)
            }
            ParametricSurface::Torus { center, x_axis, y_axis, major_radius, minor_radius } => {
                let z = x_axis.cross(y_axis);
                let (su, cu) = u.sin_cos();
                let (sv, cv) = v.sin_cos();
                let radial = x_axis * cu + y_axis * su;
                let ring = major_radius + minor_radius * cv;
                let point = center + radial * ring + z * (minor_radius * sv);
                let du = (y_axis * cu - x_axis * su) * ring;
                let dv = (z * cv - radial * sv) * *minor_radius;
                (point, du, dv)
            }
            ParametricSurface::BSpline(b) => b.eval(u, v)?,
        };
        let scale = du.norm().max(dv.norm()).max(1.0);
        let degenerate = du.cross(&dv).norm() <= 1e-12 * scale * scale;
        Ok(SurfaceEval { point, du, dv, degenerate })
    }

    pub fn point(&self, u: f64, v: f64) -> Result<Vec3> {
        Ok(self.eval(u, v)?.point)
    }

    /// Unit normal `(S_u × S_v) / |S_u × S_v|`, negated when `same_sense` is false.
    /// Sphere and cone poles return the limiting normal; a vanishing cross
    /// product on a B-spline surface is an error.
    pub fn unit_normal(&self, u: f64, v: f64, same_sense: bool) -> Result<Vec3> {
        let (u, v) = self.check_params(u, v)?;
        let n = match self {
            ParametricSurface::Sphere { x_axis, y_axis, .. } => {
                let z = x_axis.cross(y_axis);
                let (su, cu) = u.sin_cos();
                let (sv, cv) = v.sin_cos();
                (x_axis * cu + y_axis * su) * cv + z * sv
            }
            ParametricSurface::Cone { x_axis, y_axis, half_angle, .. } => {
                let z = x_axis.cross(y_axis);
                let (s, c) = u.sin_cos();
                let (sa, ca) = half_angle.sin_cos();
                (x_axis * c + y_axis * s) * ca - z * sa
            }
            ParametricSurface::Torus { x_axis, y_axis, .. } => {
                let z = x_axis.cross(y_axis);
                let (su, cu) = u.sin_cos();
                let (sv, cv) = v.sin_cos();
                (x_axis * cu + y_axis * su) * cv + z * sv
            }
            _ => {
                let e = self.eval(u, v)?;
                if e.degenerate {
                    return Err(Error::InvalidGeometry(format!(
                        "degenerate normal on {} at ({u}, {v})",
                        self.kind()
                    )));
                }
                e.du.cross(&e.dv).normalize()
            }
        };
        Ok(if same_sense { n } else { -n })
    }

    /// Which parameters measure length and must follow a uniform model scaling.
    pub fn length_parameters(&self) -> (bool, bool) {
        match self {
            ParametricSurface::Plane { .. } => (true, true),
            ParametricSurface::Cylinder { .. } | ParametricSurface::Cone { .. } => (false, true),
            _ => (false, false),
        }
    }

    /// Applies `p -> scale * p + offset`; see [`Self::length_parameters`].
    pub fn transformed(&self, scale: f64, offset: &Vec3) -> Self {
        let map = |p: &Vec3| p * scale + offset;
        match self {
            ParametricSurface::Plane { origin, u_axis, v_axis } => {
                ParametricSurface::Plane { origin: map(origin), u_axis: *u_axis, v_axis: *v_axis }
            }
            ParametricSurface::Cylinder { origin, x_axis, y_axis, radius } => ParametricSurface::Cylinder {
                origin: map(origin),
                x_axis: *x_axis,
                y_axis: *y_axis,
                radius: radius * scale,
            },
            ParametricSurface::Sphere { center, x_axis, y_axis, radius } => ParametricSurface::Sphere {
                center: map(center),
                x_axis: *x_axis,
                y_axis: *y_axis,
                radius: radius * scale,
            },
            ParametricSurface::Cone { origin, x_axis, y_axis, radius, half_angle } => ParametricSurface::Cone {
                origin: map(origin),
                x_axis: *x_axis,
                y_axis: *y_axis,
                radius: radius * scale,
                half_angle: *half_angle,
            },
            ParametricSurface::Torus { center, x_axis, y_axis, major_radius, minor_radius } => ParametricSurface::Torus {
                center: map(center),
                x_axis: *x_axis,
                y_axis: *y_axis,
                major_radius: major_radius * scale,
                minor_radius: minor_radius * scale,
            },
            ParametricSurface::BSpline(b) => {
                let mut b = b.clone();
                b.map_points(map);
                ParametricSurface::BSpline(b)
            }
        }
    }

    pub fn insert_knot(&self, dir: Direction, t: f64) -> Result<Self> {
        match self {
            ParametricSurface::BSpline(b) => Ok(ParametricSurface::BSpline(b.insert_knot(dir, t)?)),
            _ => Err(Error::UnsupportedVariant("knot insertion needs a bspline surface")),
        }
    }

    pub fn elevate_degree(&self, dir: Direction) -> Result<Self> {
        match self {
            ParametricSurface::BSpline(b) => Ok(ParametricSurface::BSpline(b.elevate_degree(dir)?)),
            _ => Err(Error::UnsupportedVariant("degree elevation needs a bspline surface")),
        }
    }
}
