//! Regular parameter-domain sampling of edges and faces into UV-grids, plus
//! the chordal / Bézier approximation-error analysis of those grids.

mod analysis;

use serde::{Deserialize, Serialize};

pub use analysis::{
    curve_bezier_error, curve_chordal_error, error_report, error_samples, surface_bezier_error,
    surface_chordal_error, ErrorReport, ErrorSamples, MetricSummary, SpanError, ERROR_THRESHOLDS,
};

use crate::brep::{trim, FaceAdjacencyGraph, Solid};
use crate::error::{Error, Result};
use crate::geometry::{Interval, ParametricCurve, Vec3};

pub const DEFAULT_CURVE_SAMPLES: usize = 10;
pub const DEFAULT_SURFACE_SAMPLES: usize = 10;

/// 1D grid along an edge: `M` samples of xyz, optionally followed by the
/// unit tangent. Values are stored sample-major (`data[k * channels + c]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveUVGrid {
    pub params: Vec<f64>,
    /// 3 (xyz) or 6 (xyz + tangent).
    pub channels: usize,
    pub data: Vec<f64>,
    /// Samples whose tangent was copied from a neighbour (zero derivative).
    #[serde(default)]
    pub flagged: Vec<usize>,
}

impl CurveUVGrid {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn point(&self, k: usize) -> Vec3 {
        Vec3::from_column_slice(&self.data[k * self.channels..k * self.channels + 3])
    }

    pub fn tangent(&self, k: usize) -> Option<Vec3> {
        (self.channels == 6).then(|| Vec3::from_column_slice(&self.data[k * 6 + 3..k * 6 + 6]))
    }

    /// Same curve traversed the other way: sample order flipped and tangents negated.
    pub fn reversed(&self) -> Self {
        let m = self.len();
        let c = self.channels;
        let mut data = Vec::with_capacity(self.data.len());
        for k in (0..m).rev() {
            let s = &self.data[k * c..(k + 1) * c];
            data.extend_from_slice(&s[..3]);
            data.extend(s[3..].iter().map(|x| -x));
        }
        let params = self.params.iter().rev().copied().collect();
        let flagged = self.flagged.iter().map(|&k| m - 1 - k).collect();
        Self { params, channels: c, data, flagged }
    }
}

/// 2D grid over a face's uv-bounds: `M × N` samples of xyz, optional unit
/// normal, and the trimming mask as last channel. Sample `(k, l)` (k along
/// u) lives at `data[(k * n + l) * channels ..]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceUVGrid {
    pub u_params: Vec<f64>,
    pub v_params: Vec<f64>,
    /// 4 (xyz + mask) or 7 (xyz + normal + mask).
    pub channels: usize,
    pub data: Vec<f64>,
    /// Samples at surface singularities (poles), as flat `k * n + l` indices.
    #[serde(default)]
    pub flagged: Vec<usize>,
}

impl SurfaceUVGrid {
    pub fn m(&self) -> usize {
        self.u_params.len()
    }

    pub fn n(&self) -> usize {
        self.v_params.len()
    }

    fn at(&self, k: usize, l: usize) -> &[f64] {
        let i = (k * self.n() + l) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn point(&self, k: usize, l: usize) -> Vec3 {
        Vec3::from_column_slice(&self.at(k, l)[..3])
    }

    pub fn normal(&self, k: usize, l: usize) -> Option<Vec3> {
        (self.channels == 7).then(|| Vec3::from_column_slice(&self.at(k, l)[3..6]))
    }

    pub fn mask(&self, k: usize, l: usize) -> bool {
        self.at(k, l)[self.channels - 1] > 0.5
    }

    pub fn visible_count(&self) -> usize {
        (0..self.m()).flat_map(|k| (0..self.n()).map(move |l| (k, l))).filter(|&(k, l)| self.mask(k, l)).count()
    }

    /// Drops the normal channels, leaving xyz + mask.
    pub fn xyz_only(&self) -> Self {
        if self.channels == 4 {
            return self.clone();
        }
        let data = self.data.chunks(7).flat_map(|s| [s[0], s[1], s[2], s[6]]).collect();
        Self { channels: 4, data, ..self.clone() }
    }
}

/// Resolution and channel selection for sampling a whole solid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub surface_m: usize,
    pub surface_n: usize,
    pub curve_m: usize,
    pub normals: bool,
    pub tangents: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            surface_m: DEFAULT_SURFACE_SAMPLES,
            surface_n: DEFAULT_SURFACE_SAMPLES,
            curve_m: DEFAULT_CURVE_SAMPLES,
            normals: true,
            tangents: true,
        }
    }
}

impl SamplingConfig {
    pub fn with_resolution(m: usize, n: usize) -> Self {
        Self { surface_m: m, surface_n: n, curve_m: m, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.surface_m < 2 || self.surface_n < 2 || self.curve_m < 2 {
            return Err(Error::Config(format!(
                "grid resolution must be at least 2 (got {}x{}, curve {})",
                self.surface_m, self.surface_n, self.curve_m
            )));
        }
        Ok(())
    }
}

/// Samples `curve` at `m` uniform parameters of `interval`.
pub fn sample_curve(curve: &ParametricCurve, interval: Interval, m: usize, tangents: bool) -> Result<CurveUVGrid> {
    if m < 2 {
        return Err(Error::Config(format!("curve grid needs at least 2 samples, got {m}")));
    }
    interval.validate()?;
    let params = interval.uniform(m);
    let mut points = Vec::with_capacity(m);
    let mut dirs: Vec<Option<Vec3>> = Vec::with_capacity(m);
    for &u in &params {
        let (p, d) = curve.eval(u)?;
        points.push(p);
        let len = d.norm();
        dirs.push((len > 1e-12 * (1.0 + p.norm())).then(|| d / len));
    }
    let mut flagged = Vec::new();
    if tangents {
        fill_from_nearest(&mut dirs, &mut flagged)?;
    }
    let channels = if tangents { 6 } else { 3 };
    let mut data = Vec::with_capacity(m * channels);
    for k in 0..m {
        data.extend(points[k].iter());
        if tangents {
            data.extend(dirs[k].unwrap().iter());
        }
    }
    Ok(CurveUVGrid { params, channels, data, flagged })
}

/// Replaces missing entries by the nearest valid one (by index distance),
/// recording which were filled.
fn fill_from_nearest(values: &mut [Option<Vec3>], flagged: &mut Vec<usize>) -> Result<()> {
    let valid: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    if valid.is_empty() {
        return Err(Error::InvalidGeometry("no sample has a nonzero derivative".into()));
    }
    for i in 0..values.len() {
        if values[i].is_none() {
            let j = *valid.iter().min_by_key(|&&j| (j as isize - i as isize).unsigned_abs()).unwrap();
            values[i] = values[j];
            flagged.push(i);
        }
    }
    Ok(())
}

pub fn sample_edge(solid: &Solid, edge: usize, m: usize, tangents: bool) -> Result<CurveUVGrid> {
    let e = &solid.edges[edge];
    sample_curve(&solid.curves[e.curve], e.interval, m, tangents)
}

/// Parameters of sample `(k, l)` over a face's uv-bounds.
pub fn face_params(solid: &Solid, face: usize, m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let b = solid.faces[face].uv_bounds;
    (b.u.uniform(m), b.v.uniform(n))
}

/// 1 iff `(u, v)` lies in the visible region of `face`.
pub fn trimming_mask(solid: &Solid, face: usize, u: f64, v: f64) -> bool {
    trim::inside_visible_region(&solid.faces[face].uv_loop_polylines, [u, v])
}

pub fn sample_face(solid: &Solid, face: usize, m: usize, n: usize, normals: bool) -> Result<SurfaceUVGrid> {
    if m < 2 || n < 2 {
        return Err(Error::Config(format!("surface grid needs at least 2x2 samples, got {m}x{n}")));
    }
    let f = &solid.faces[face];
    f.uv_bounds.u.validate()?;
    f.uv_bounds.v.validate()?;
    let surface = &solid.surfaces[f.surface];
    let (u_params, v_params) = face_params(solid, face, m, n);
    let mut points = Vec::with_capacity(m * n);
    let mut norms: Vec<Option<Vec3>> = Vec::with_capacity(m * n);
    let mut masks = Vec::with_capacity(m * n);
    let mut flagged = Vec::new();
    for &u in &u_params {
        for &v in &v_params {
            let e = surface.eval(u, v)?;
            if e.degenerate {
                flagged.push(points.len());
            }
            points.push(e.point);
            masks.push(trim::inside_visible_region(&f.uv_loop_polylines, [u, v]));
            if normals {
                norms.push(surface.unit_normal(u, v, f.same_sense).ok());
            }
        }
    }
    if normals {
        let mut filled = Vec::new();
        fill_from_nearest(&mut norms, &mut filled)?;
    }
    if !masks.iter().any(|&b| b) {
        log::warn!("face {face} has no visible samples at {m}x{n}");
    }
    let channels = if normals { 7 } else { 4 };
    let mut data = Vec::with_capacity(m * n * channels);
    for i in 0..m * n {
        data.extend(points[i].iter());
        if normals {
            data.extend(norms[i].unwrap().iter());
        }
        data.push(if masks[i] { 1.0 } else { 0.0 });
    }
    Ok(SurfaceUVGrid { u_params, v_params, channels, data, flagged })
}

/// Face-adjacency graph of `solid` with every node and link grid filled in.
pub fn sample_graph(solid: &Solid, cfg: &SamplingConfig) -> Result<FaceAdjacencyGraph> {
    cfg.validate()?;
    let mut g = FaceAdjacencyGraph::from_solid(solid)?;
    for node in &mut g.nodes {
        node.grid = Some(sample_face(solid, node.face, cfg.surface_m, cfg.surface_n, cfg.normals)?);
    }
    for link in &mut g.links {
        link.grid = Some(sample_edge(solid, link.edge, cfg.curve_m, cfg.tangents)?);
    }
    Ok(g)
}
