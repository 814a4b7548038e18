//! How far UV-grid interpolants stray from the exact geometry.
//!
//! Chordal: a straight chord (curves) or the average of a quad's corners
//! (surfaces) against the exact point at the mean parameter. Bézier: a cubic
//! built from span endpoints and unit tangents (curves), or a twist-free
//! bicubic from quad corners and normals (surfaces), evaluated at its centre.
//! All errors are divided by the longest bounding-box edge of the solid.

use serde::{Deserialize, Serialize};

use super::{sample_edge, sample_face, CurveUVGrid, SurfaceUVGrid};
use crate::brep::{bounding_box, Solid};
use crate::error::{Error, Result};
use crate::geometry::{ParametricCurve, ParametricSurface, Vec3};

pub const ERROR_THRESHOLDS: [f64; 3] = [1e-3, 1e-2, 1e-1];

/// Error of one span or patch; `fallback` marks a Bézier error that fell
/// back to the chordal value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanError {
    pub error: f64,
    pub fallback: bool,
}

pub fn curve_chordal_error(curve: &ParametricCurve, grid: &CurveUVGrid, divisor: f64) -> Result<Vec<f64>> {
    (0..grid.len().saturating_sub(1))
        .map(|k| {
            let mid = (grid.point(k) + grid.point(k + 1)) * 0.5;
            let exact = curve.point(0.5 * (grid.params[k] + grid.params[k + 1]))?;
            Ok((mid - exact).norm() / divisor)
        })
        .collect()
}

pub fn curve_bezier_error(curve: &ParametricCurve, grid: &CurveUVGrid, divisor: f64) -> Result<Vec<SpanError>> {
    if grid.channels != 6 {
        return Err(Error::Contract("Bézier error needs a curve grid with tangents".into()));
    }
    let mut out = Vec::with_capacity(grid.len().saturating_sub(1));
    for k in 0..grid.len().saturating_sub(1) {
        let (p0, p3) = (grid.point(k), grid.point(k + 1));
        let (t0, t1) = (grid.tangent(k).unwrap(), grid.tangent(k + 1).unwrap());
        let exact = curve.point(0.5 * (grid.params[k] + grid.params[k + 1]))?;
        if t0.dot(&t1) < -1.0 + 1e-9 {
            out.push(SpanError { error: ((p0 + p3) * 0.5 - exact).norm() / divisor, fallback: true });
            continue;
        }
        let l = (p3 - p0).norm();
        let p1 = p0 + t0 * (l / 3.0);
        let p2 = p3 - t1 * (l / 3.0);
        let mid = (p0 + p1 * 3.0 + p2 * 3.0 + p3) / 8.0;
        out.push(SpanError { error: (mid - exact).norm() / divisor, fallback: false });
    }
    Ok(out)
}

fn quads(grid: &SurfaceUVGrid) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (m, n) = (grid.m(), grid.n());
    (0..m.saturating_sub(1))
        .flat_map(move |k| (0..n.saturating_sub(1)).map(move |l| (k, l)))
        .filter(|&(k, l)| grid.mask(k, l) || grid.mask(k + 1, l) || grid.mask(k, l + 1) || grid.mask(k + 1, l + 1))
}

fn quad_center(surface: &ParametricSurface, grid: &SurfaceUVGrid, k: usize, l: usize) -> Result<Vec3> {
    surface.point(0.5 * (grid.u_params[k] + grid.u_params[k + 1]), 0.5 * (grid.v_params[l] + grid.v_params[l + 1]))
}

/// Per-quad chordal error over quads with at least one visible corner.
pub fn surface_chordal_error(surface: &ParametricSurface, grid: &SurfaceUVGrid, divisor: f64) -> Result<Vec<f64>> {
    quads(grid)
        .map(|(k, l)| {
            let mean =
                (grid.point(k, l) + grid.point(k + 1, l) + grid.point(k, l + 1) + grid.point(k + 1, l + 1)) * 0.25;
            Ok((mean - quad_center(surface, grid, k, l)?).norm() / divisor)
        })
        .collect()
}

/// Component of `d` in the tangent plane with normal `n`.
fn tangential(d: Vec3, n: Vec3) -> Vec3 {
    d - n * n.dot(&d)
}

/// Per-quad Bézier error over quads with at least one visible corner.
pub fn surface_bezier_error(surface: &ParametricSurface, grid: &SurfaceUVGrid, divisor: f64) -> Result<Vec<SpanError>> {
    if grid.channels != 7 {
        return Err(Error::Contract("Bézier error needs a surface grid with normals".into()));
    }
    quads(grid)
        .map(|(k, l)| {
            let c = [[grid.point(k, l), grid.point(k, l + 1)], [grid.point(k + 1, l), grid.point(k + 1, l + 1)]];
            let nrm = [
                [grid.normal(k, l).unwrap(), grid.normal(k, l + 1).unwrap()],
                [grid.normal(k + 1, l).unwrap(), grid.normal(k + 1, l + 1).unwrap()],
            ];
            // Control net p[i][j], i along u, j along v; corners first.
            let mut p = [[Vec3::zeros(); 4]; 4];
            for a in 0..2 {
                for b in 0..2 {
                    let (i, j) = (3 * a, 3 * b);
                    p[i][j] = c[a][b];
                    let (iu, jv) = (if a == 0 { 1 } else { 2 }, if b == 0 { 1 } else { 2 });
                    p[iu][j] = c[a][b] + tangential(c[1 - a][b] - c[a][b], nrm[a][b]) / 3.0;
                    p[i][jv] = c[a][b] + tangential(c[a][1 - b] - c[a][b], nrm[a][b]) / 3.0;
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    let (i, j) = (3 * a, 3 * b);
                    let (iu, jv) = (if a == 0 { 1 } else { 2 }, if b == 0 { 1 } else { 2 });
                    p[iu][jv] = p[iu][j] + p[i][jv] - p[i][j];
                }
            }
            let w = [1.0, 3.0, 3.0, 1.0];
            let mut mid = Vec3::zeros();
            for i in 0..4 {
                for j in 0..4 {
                    mid += p[i][j] * (w[i] * w[j] / 64.0);
                }
            }
            let error = (mid - quad_center(surface, grid, k, l)?).norm() / divisor;
            Ok(SpanError { error, fallback: false })
        })
        .collect()
}

/// Raw per-span / per-quad errors of one or more solids.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSamples {
    pub curve_chordal: Vec<f64>,
    pub curve_bezier: Vec<f64>,
    pub surface_chordal: Vec<f64>,
    pub surface_bezier: Vec<f64>,
    /// Curve spans whose Bézier error fell back to chordal.
    pub curve_fallbacks: usize,
}

impl ErrorSamples {
    pub fn extend(&mut self, other: ErrorSamples) {
        self.curve_chordal.extend(other.curve_chordal);
        self.curve_bezier.extend(other.curve_bezier);
        self.surface_chordal.extend(other.surface_chordal);
        self.surface_bezier.extend(other.surface_bezier);
        self.curve_fallbacks += other.curve_fallbacks;
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            thresholds: ERROR_THRESHOLDS.to_vec(),
            curve_chordal: MetricSummary::of(&self.curve_chordal),
            curve_bezier: MetricSummary::of(&self.curve_bezier),
            surface_chordal: MetricSummary::of(&self.surface_chordal),
            surface_bezier: MetricSummary::of(&self.surface_bezier),
            curve_fallbacks: self.curve_fallbacks,
        }
    }
}

/// All four metrics for one solid at curve resolution `m` and surface
/// resolution `m × n`, normalized by the solid's longest bounding-box edge.
pub fn error_samples(solid: &Solid, m: usize, n: usize) -> Result<ErrorSamples> {
    let divisor = bounding_box(solid).longest_edge();
    if !(divisor > 0.0 && divisor.is_finite()) {
        return Err(Error::DegenerateSolid("zero-extent bounding box".into()));
    }
    let mut out = ErrorSamples::default();
    for e in 0..solid.edges.len() {
        let curve = solid.edge_curve(e);
        let grid = sample_edge(solid, e, m, true)?;
        out.curve_chordal.extend(curve_chordal_error(curve, &grid, divisor)?);
        for s in curve_bezier_error(curve, &grid, divisor)? {
            out.curve_bezier.push(s.error);
            out.curve_fallbacks += usize::from(s.fallback);
        }
    }
    for f in 0..solid.faces.len() {
        let surface = solid.face_surface(f);
        let grid = sample_face(solid, f, m, n, true)?;
        out.surface_chordal.extend(surface_chordal_error(surface, &grid, divisor)?);
        out.surface_bezier.extend(surface_bezier_error(surface, &grid, divisor)?.into_iter().map(|s| s.error));
    }
    Ok(out)
}

pub fn error_report(solid: &Solid, m: usize, n: usize) -> Result<ErrorReport> {
    Ok(error_samples(solid, m, n)?.report())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    /// Fraction of errors strictly above each threshold.
    pub exceedance: Vec<f64>,
}

impl MetricSummary {
    fn of(errors: &[f64]) -> Self {
        let count = errors.len();
        let frac = |t: f64| if count == 0 { 0.0 } else { errors.iter().filter(|&&e| e > t).count() as f64 / count as f64 };
        Self {
            count,
            max: errors.iter().copied().fold(0.0, f64::max),
            mean: if count == 0 { 0.0 } else { errors.iter().sum::<f64>() / count as f64 },
            exceedance: ERROR_THRESHOLDS.iter().map(|&t| frac(t)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub thresholds: Vec<f64>,
    pub curve_chordal: MetricSummary,
    pub curve_bezier: MetricSummary,
    pub surface_chordal: MetricSummary,
    pub surface_bezier: MetricSummary,
    pub curve_fallbacks: usize,
}

impl ErrorReport {
    pub fn metrics(&self) -> [(&'static str, &MetricSummary); 4] {
        [
            ("curve_chordal", &self.curve_chordal),
            ("curve_bezier", &self.curve_bezier),
            ("surface_chordal", &self.surface_chordal),
            ("surface_bezier", &self.surface_bezier),
        ]
    }

    /// Plain-text table: one row per threshold, one column per metric.
    pub fn table(&self) -> String {
        let mut s = String::from("threshold   curve_chordal  curve_bezier  surface_chordal  surface_bezier\n");
        for (i, t) in self.thresholds.iter().enumerate() {
            s.push_str(&format!("above {t:<6.0e}"));
            for (_, m) in self.metrics() {
                s.push_str(&format!(" {:>14.4}%", 100.0 * m.exceedance[i]));
            }
            s.push('\n');
        }
        s
    }
}
