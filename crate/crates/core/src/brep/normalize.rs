use serde::{Deserialize, Serialize};

use super::{trim, Solid, UvBounds};
use crate::error::{Error, Result};
use crate::geometry::{Interval, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoundingBox {
    fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn longest_edge(&self) -> f64 {
        self.extents().max()
    }
}

const EDGE_SAMPLES: usize = 33;
const FACE_SAMPLES: usize = 33;

/// Axis-aligned bounding box from vertices, sampled edges and the visible
/// samples of every face.
pub fn bounding_box(solid: &Solid) -> BoundingBox {
    let mut bb = BoundingBox::empty();
    for v in &solid.vertices {
        bb.grow(v);
    }
    for e in &solid.edges {
        if e.interval.validate().is_err() {
            continue;
        }
        let curve = &solid.curves[e.curve];
        for t in e.interval.uniform(EDGE_SAMPLES) {
            if let Ok(p) = curve.point(t) {
                bb.grow(&p);
            }
        }
    }
    for f in &solid.faces {
        let UvBounds { u, v } = f.uv_bounds;
        if u.validate().is_err() || v.validate().is_err() {
            continue;
        }
        let surface = &solid.surfaces[f.surface];
        for &pu in &u.uniform(FACE_SAMPLES) {
            for &pv in &v.uniform(FACE_SAMPLES) {
                if trim::inside_visible_region(&f.uv_loop_polylines, [pu, pv]) {
                    if let Ok(p) = surface.point(pu, pv) {
                        bb.grow(&p);
                    }
                }
            }
        }
    }
    bb
}

/// Uniformly scales and translates `solid` so its bounding box is centred at
/// the origin with longest edge 2. Length-measuring parameters (line
/// intervals, plane coordinates, cylinder/cone heights) are rescaled along
/// with the geometry so every face and edge keeps its extent.
pub fn normalize(solid: &Solid) -> Result<Solid> {
    if solid.vertices.is_empty() && solid.faces.is_empty() {
        return Err(Error::DegenerateSolid("empty solid".into()));
    }
    let bb = bounding_box(solid);
    let longest = bb.longest_edge();
    if !(longest.is_finite() && longest > 0.0) {
        return Err(Error::DegenerateSolid(format!("bounding box longest edge is {longest}")));
    }
    let scale = 2.0 / longest;
    let offset = -bb.center() * scale;
    Ok(transform(solid, scale, &offset))
}

/// Applies `p -> scale * p + offset` to every geometric entity.
pub fn transform(solid: &Solid, scale: f64, offset: &Vec3) -> Solid {
    let mut out = solid.clone();
    for v in &mut out.vertices {
        *v = *v * scale + offset;
    }
    for c in &mut out.curves {
        *c = c.transformed(scale, offset);
    }
    for s in &mut out.surfaces {
        *s = s.transformed(scale, offset);
    }
    for e in &mut out.edges {
        if solid.curves[e.curve].has_length_parameter() {
            e.interval = e.interval.scaled(scale);
        }
    }
    for f in &mut out.faces {
        let (su, sv) = solid.surfaces[f.surface].length_parameters();
        let (fu, fv) = (if su { scale } else { 1.0 }, if sv { scale } else { 1.0 });
        let scale_interval = |i: Interval, k: f64| if k == 1.0 { i } else { i.scaled(k) };
        f.uv_bounds = UvBounds { u: scale_interval(f.uv_bounds.u, fu), v: scale_interval(f.uv_bounds.v, fv) };
        for poly in &mut f.uv_loop_polylines {
            for p in poly.iter_mut() {
                p[0] *= fu;
                p[1] *= fv;
            }
        }
    }
    out
}
