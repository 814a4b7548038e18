use super::{Edge, Face, Halfedge, Loop, LoopKind, Solid, UvBounds, BREP_SCHEMA_VERSION};
use crate::geometry::{Interval, ParametricCurve, ParametricSurface, Vec3};

/// One loop handed to [`SolidBuilder::face`]: `(edge, forward)` uses in
/// traversal order plus the parameter-domain polyline.
pub struct LoopSpec {
    pub kind: LoopKind,
    pub uses: Vec<(usize, bool)>,
    pub polyline: Vec<[f64; 2]>,
}

/// Incremental construction of a [`Solid`]; twins are paired per edge in
/// [`SolidBuilder::build`].
#[derive(Default)]
pub struct SolidBuilder {
    solid: Solid,
}

impl SolidBuilder {
    pub fn new() -> Self {
        Self { solid: Solid { schema_version: BREP_SCHEMA_VERSION, ..Default::default() } }
    }

    pub fn vertex(&mut self, p: Vec3) -> usize {
        self.solid.vertices.push(p);
        self.solid.vertices.len() - 1
    }

    pub fn vertex_point(&self, v: usize) -> Vec3 {
        self.solid.vertices[v]
    }

    pub fn edge_vertices(&self, edge: usize) -> [usize; 2] {
        self.solid.edges[edge].vertices
    }

    pub fn curve(&mut self, c: ParametricCurve) -> usize {
        self.solid.curves.push(c);
        self.solid.curves.len() - 1
    }

    pub fn surface(&mut self, s: ParametricSurface) -> usize {
        self.solid.surfaces.push(s);
        self.solid.surfaces.len() - 1
    }

    pub fn edge(&mut self, curve: usize, interval: Interval, start: usize, end: usize) -> usize {
        self.solid.edges.push(Edge { curve, interval, halfedges: Vec::with_capacity(2), vertices: [start, end] });
        self.solid.edges.len() - 1
    }

    /// Straight edge between two existing vertices, parameterized by length.
    pub fn line_edge(&mut self, start: usize, end: usize) -> usize {
        let (a, b) = (self.solid.vertices[start], self.solid.vertices[end]);
        let curve = self.curve(ParametricCurve::line_through(a, b));
        self.edge(curve, Interval::new_unchecked(0.0, (b - a).norm()), start, end)
    }

    pub fn face(&mut self, surface: usize, same_sense: bool, loops: Vec<LoopSpec>) -> usize {
        let face_id = self.solid.faces.len();
        let mut face_loops = Vec::with_capacity(loops.len());
        let mut polylines = Vec::with_capacity(loops.len());
        let mut bounds = UvBounds { u: Interval::new_unchecked(0.0, 0.0), v: Interval::new_unchecked(0.0, 0.0) };
        for spec in loops {
            let mut hes = Vec::with_capacity(spec.uses.len());
            for (edge, forward) in spec.uses {
                let he = self.solid.halfedges.len();
                self.solid.halfedges.push(Halfedge { edge, face: face_id, twin: he, forward });
                self.solid.edges[edge].halfedges.push(he);
                hes.push(he);
            }
            if spec.kind == LoopKind::Outer {
                bounds = polyline_bounds(&spec.polyline);
            }
            face_loops.push(Loop { halfedges: hes, kind: spec.kind });
            polylines.push(spec.polyline);
        }
        self.solid.faces.push(Face { surface, same_sense, loops: face_loops, uv_bounds: bounds, uv_loop_polylines: polylines });
        face_id
    }

    pub fn build(mut self) -> Solid {
        for e in &self.solid.edges {
            if let [a, b] = e.halfedges[..] {
                self.solid.halfedges[a].twin = b;
                self.solid.halfedges[b].twin = a;
            }
        }
        self.solid
    }
}

/// Parameter-domain bounding box of a polyline.
pub fn polyline_bounds(poly: &[[f64; 2]]) -> UvBounds {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    UvBounds { u: Interval::new_unchecked(lo[0], hi[0]), v: Interval::new_unchecked(lo[1], hi[1]) }
}
