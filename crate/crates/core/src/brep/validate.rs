use std::fmt;

use serde::Serialize;

use super::{trim, LoopKind, Solid};
use crate::error::{Error, Result};

/// One broken invariant of a [`Solid`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "invariant", rename_all = "snake_case")]
pub enum Violation {
    IndexOutOfRange { table: &'static str, index: usize, refers_to: &'static str },
    TwoHalfedgeRule { edge: usize, count: usize },
    HalfedgeEdgeMismatch { halfedge: usize, edge: usize },
    TwinOfTwin { halfedge: usize },
    TwinEdgeMismatch { halfedge: usize },
    HalfedgeNotInFaceLoop { halfedge: usize },
    LoopNotClosed { face: usize, loop_index: usize },
    OuterLoopCount { face: usize, count: usize },
    InvalidGeometry { table: &'static str, index: usize, reason: String },
    VertexMismatch { edge: usize, end: usize, distance: f64 },
    InvalidUvBounds { face: usize },
    LoopPolyline { face: usize, loop_index: usize, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { table, index, refers_to } => {
                write!(f, "{table}[{index}] refers to a missing {refers_to}")
            }
            Violation::TwoHalfedgeRule { edge, count } => {
                write!(f, "edge {edge} has {count} halfedges; every edge needs exactly two")
            }
            Violation::HalfedgeEdgeMismatch { halfedge, edge } => {
                write!(f, "halfedge {halfedge} is listed by edge {edge} but points elsewhere")
            }
            Violation::TwinOfTwin { halfedge } => write!(f, "twin of twin of halfedge {halfedge} is not itself"),
            Violation::TwinEdgeMismatch { halfedge } => {
                write!(f, "halfedge {halfedge} and its twin lie on different edges or share a direction")
            }
            Violation::HalfedgeNotInFaceLoop { halfedge } => {
                write!(f, "halfedge {halfedge} does not appear exactly once in a loop of its face")
            }
            Violation::LoopNotClosed { face, loop_index } => write!(f, "loop {loop_index} of face {face} is not closed"),
            Violation::OuterLoopCount { face, count } => write!(f, "face {face} has {count} outer loops"),
            Violation::InvalidGeometry { table, index, reason } => write!(f, "{table}[{index}]: {reason}"),
            Violation::VertexMismatch { edge, end, distance } => {
                write!(f, "edge {edge} end {end} is {distance:.3e} away from its vertex")
            }
            Violation::InvalidUvBounds { face } => write!(f, "face {face} has invalid uv bounds"),
            Violation::LoopPolyline { face, loop_index, reason } => {
                write!(f, "loop polyline {loop_index} of face {face}: {reason}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidSolid(format!("{v} ({} violations)", self.violations.len()))),
        }
    }
}

/// Lists every violated invariant; an empty report means the solid is well formed.
pub fn validate(solid: &Solid) -> ValidationReport {
    let mut out = Vec::new();
    let nv = solid.vertices.len();
    let nc = solid.curves.len();
    let ns = solid.surfaces.len();
    let ne = solid.edges.len();
    let nh = solid.halfedges.len();
    let nf = solid.faces.len();

    for (i, c) in solid.curves.iter().enumerate() {
        if let Err(e) = c.validate() {
            out.push(Violation::InvalidGeometry { table: "curves", index: i, reason: e.to_string() });
        }
    }
    for (i, s) in solid.surfaces.iter().enumerate() {
        if let Err(e) = s.validate() {
            out.push(Violation::InvalidGeometry { table: "surfaces", index: i, reason: e.to_string() });
        }
    }

    // Index integrity first; later checks assume valid references.
    let mut refs_ok = true;
    let mut oob = |table, index, refers_to| {
        out.push(Violation::IndexOutOfRange { table, index, refers_to });
        false
    };
    for (i, e) in solid.edges.iter().enumerate() {
        if e.curve >= nc {
            refs_ok &= oob("edges", i, "curve");
        }
        if e.vertices.iter().any(|&v| v >= nv) {
            refs_ok &= oob("edges", i, "vertex");
        }
        if e.halfedges.iter().any(|&h| h >= nh) {
            refs_ok &= oob("edges", i, "halfedge");
        }
    }
    for (i, h) in solid.halfedges.iter().enumerate() {
        if h.edge >= ne {
            refs_ok &= oob("halfedges", i, "edge");
        }
        if h.face >= nf {
            refs_ok &= oob("halfedges", i, "face");
        }
        if h.twin >= nh {
            refs_ok &= oob("halfedges", i, "twin");
        }
    }
    for (i, f) in solid.faces.iter().enumerate() {
        if f.surface >= ns {
            refs_ok &= oob("faces", i, "surface");
        }
        if f.loops.iter().flat_map(|l| &l.halfedges).any(|&h| h >= nh) {
            refs_ok &= oob("faces", i, "halfedge");
        }
    }
    if !refs_ok {
        return ValidationReport { violations: out };
    }

    for (i, e) in solid.edges.iter().enumerate() {
        if e.halfedges.len() != 2 {
            out.push(Violation::TwoHalfedgeRule { edge: i, count: e.halfedges.len() });
        }
        for &h in &e.halfedges {
            if solid.halfedges[h].edge != i {
                out.push(Violation::HalfedgeEdgeMismatch { halfedge: h, edge: i });
            }
        }
        if let Err(err) = e.interval.validate() {
            out.push(Violation::InvalidGeometry { table: "edges", index: i, reason: err.to_string() });
            continue;
        }
        let curve = &solid.curves[e.curve];
        for (end, t) in [(0, e.interval.lo), (1, e.interval.hi)] {
            match curve.point(t) {
                Ok(p) => {
                    let d = (p - solid.vertices[e.vertices[end]]).norm();
                    if d > 1e-6 * (1.0 + p.norm()) {
                        out.push(Violation::VertexMismatch { edge: i, end, distance: d });
                    }
                }
                Err(err) => out.push(Violation::InvalidGeometry { table: "edges", index: i, reason: err.to_string() }),
            }
        }
    }

    for (i, h) in solid.halfedges.iter().enumerate() {
        let twin = &solid.halfedges[h.twin];
        if twin.twin != i || h.twin == i {
            out.push(Violation::TwinOfTwin { halfedge: i });
        } else if twin.edge != h.edge || twin.forward == h.forward {
            out.push(Violation::TwinEdgeMismatch { halfedge: i });
        }
    }

    let mut seen = vec![0usize; nh];
    for (fi, f) in solid.faces.iter().enumerate() {
        let outer = f.loops.iter().filter(|l| l.kind == LoopKind::Outer).count();
        if outer != 1 {
            out.push(Violation::OuterLoopCount { face: fi, count: outer });
        }
        for (li, l) in f.loops.iter().enumerate() {
            for &h in &l.halfedges {
                if solid.halfedges[h].face == fi {
                    seen[h] += 1;
                }
            }
            let n = l.halfedges.len();
            let closed = n > 0
                && (0..n).all(|k| solid.halfedge_end(l.halfedges[k]) == solid.halfedge_start(l.halfedges[(k + 1) % n]));
            if !closed {
                out.push(Violation::LoopNotClosed { face: fi, loop_index: li });
            }
        }
        if f.uv_bounds.u.validate().is_err() || f.uv_bounds.v.validate().is_err() {
            out.push(Violation::InvalidUvBounds { face: fi });
        }
        if f.uv_loop_polylines.len() != f.loops.len() {
            out.push(Violation::LoopPolyline {
                face: fi,
                loop_index: f.uv_loop_polylines.len(),
                reason: format!("{} polylines for {} loops", f.uv_loop_polylines.len(), f.loops.len()),
            });
            continue;
        }
        for (li, (poly, l)) in f.uv_loop_polylines.iter().zip(&f.loops).enumerate() {
            let area = if poly.len() >= 3 { trim::signed_area(poly) } else { 0.0 };
            let ok = match l.kind {
                LoopKind::Outer => area > 0.0,
                LoopKind::Inner => area < 0.0,
            };
            if !ok {
                let reason = format!("{:?} loop has signed area {area}", l.kind);
                out.push(Violation::LoopPolyline { face: fi, loop_index: li, reason });
            }
        }
    }
    for (h, &count) in seen.iter().enumerate() {
        if count != 1 {
            out.push(Violation::HalfedgeNotInFaceLoop { halfedge: h });
        }
    }

    ValidationReport { violations: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::primitives;

    #[test]
    fn unit_cube_is_valid() {
        let cube = primitives::unit_cube();
        assert_eq!((cube.faces.len(), cube.edges.len(), cube.halfedges.len()), (6, 12, 24));
        let report = validate(&cube);
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn broken_twin_is_reported() {
        let mut cube = primitives::unit_cube();
        let other = cube.halfedges[5].twin;
        cube.halfedges[0].twin = other;
        let report = validate(&cube);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::TwinOfTwin { halfedge: 0 })));
        assert!(report.into_result().is_err());
    }

    #[test]
    fn open_sheet_breaks_two_halfedge_rule() {
        let mut cube = primitives::unit_cube();
        cube.edges[0].halfedges.pop();
        let report = validate(&cube);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::TwoHalfedgeRule { edge: 0, count: 1 })));
    }

    #[test]
    fn dangling_index_stops_early() {
        let mut cube = primitives::unit_cube();
        cube.halfedges[3].face = 42;
        let report = validate(&cube);
        assert_eq!(
            report.violations,
            vec![Violation::IndexOutOfRange { table: "halfedges", index: 3, refers_to: "face" }]
        );
    }

    #[test]
    fn reversed_outer_polyline_is_reported() {
        let mut cube = primitives::unit_cube();
        cube.faces[2].uv_loop_polylines[0].reverse();
        let report = validate(&cube);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::LoopPolyline { face: 2, .. })));
    }

    #[test]
    fn all_primitives_validate() {
        for (name, s) in primitives::catalog() {
            let report = validate(&s);
            assert!(report.is_valid(), "{name}: {:?}", report.violations);
        }
    }
}
