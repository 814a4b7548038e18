//! Boundary representation: vertices, edges, halfedges, loops and trimmed
//! faces, stored as index tables so the whole solid round-trips through the
//! JSON exchange format without loss.

mod builder;
mod graph;
mod normalize;
pub mod primitives;
pub mod trim;
mod validate;

use serde::{Deserialize, Serialize};

pub use builder::{polyline_bounds, LoopSpec, SolidBuilder};
pub use graph::{n_hop_nodes, FaceAdjacencyGraph, GraphLink, GraphNode};
pub use normalize::{bounding_box, normalize, transform, BoundingBox};
pub use validate::{validate, ValidationReport, Violation};

use crate::error::{Error, Result};
use crate::geometry::{Interval, ParametricCurve, ParametricSurface, Vec3};

pub const BREP_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Outer,
    Inner,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    /// Halfedges in traversal order; the face lies to the left when viewed
    /// from outside the solid.
    pub halfedges: Vec<usize>,
    pub kind: LoopKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvBounds {
    pub u: Interval,
    pub v: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub surface: usize,
    /// False when the outward normal is opposite to `S_u × S_v`.
    pub same_sense: bool,
    pub loops: Vec<Loop>,
    pub uv_bounds: UvBounds,
    /// Parameter-domain polyline per loop (same order as `loops`), implicitly
    /// closed. Outer loops run counterclockwise, holes clockwise.
    pub uv_loop_polylines: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub curve: usize,
    pub interval: Interval,
    /// Both uses of the edge; a well-formed solid has exactly two.
    pub halfedges: Vec<usize>,
    /// Vertices at `interval.lo` and `interval.hi`.
    pub vertices: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfedge {
    pub edge: usize,
    pub face: usize,
    pub twin: usize,
    /// True when the halfedge runs along increasing curve parameter.
    pub forward: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Solid {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub vertices: Vec<Vec3>,
    pub curves: Vec<ParametricCurve>,
    pub surfaces: Vec<ParametricSurface>,
    pub edges: Vec<Edge>,
    pub halfedges: Vec<Halfedge>,
    pub faces: Vec<Face>,
}

fn schema_version() -> u32 {
    BREP_SCHEMA_VERSION
}

impl Solid {
    pub fn from_json(text: &str) -> Result<Self> {
        let solid: Solid = serde_json::from_str(text)?;
        if solid.schema_version != BREP_SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported brep schema version {}", solid.schema_version)));
        }
        Ok(solid)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn face_surface(&self, face: usize) -> &ParametricSurface {
        &self.surfaces[self.faces[face].surface]
    }

    pub fn edge_curve(&self, edge: usize) -> &ParametricCurve {
        &self.curves[self.edges[edge].curve]
    }

    pub fn loop_count(&self) -> usize {
        self.faces.iter().map(|f| f.loops.len()).sum()
    }

    /// Vertex a halfedge starts from.
    pub fn halfedge_start(&self, he: usize) -> usize {
        let h = &self.halfedges[he];
        let e = &self.edges[h.edge];
        if h.forward {
            e.vertices[0]
        } else {
            e.vertices[1]
        }
    }

    pub fn halfedge_end(&self, he: usize) -> usize {
        let h = &self.halfedges[he];
        let e = &self.edges[h.edge];
        if h.forward {
            e.vertices[1]
        } else {
            e.vertices[0]
        }
    }

    /// Outward unit normal of `face` at `(u, v)`.
    pub fn face_normal(&self, face: usize, u: f64, v: f64) -> Result<Vec3> {
        let f = &self.faces[face];
        self.surfaces[f.surface].unit_normal(u, v, f.same_sense)
    }
}
