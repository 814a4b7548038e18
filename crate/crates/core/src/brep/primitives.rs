//! Hand-built reference solids: boxes, polyhedra, cylinders, cone frustums
//! and spheres split into hemispheres or octants.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::builder::{LoopSpec, SolidBuilder};
use super::{LoopKind, Solid};
use crate::geometry::{Interval, ParametricCurve, ParametricSurface, Vec3};

/// Planar-faced solid from vertex positions and faces given as vertex
/// cycles, counterclockwise seen from outside.
pub fn polyhedron(points: &[Vec3], faces: &[Vec<usize>]) -> Solid {
    let mut b = SolidBuilder::new();
    let verts: Vec<usize> = points.iter().map(|p| b.vertex(*p)).collect();
    let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
    for cycle in faces {
        let n = cycle.len();
        let mut uses = Vec::with_capacity(n);
        for k in 0..n {
            let (a, c) = (cycle[k], cycle[(k + 1) % n]);
            let key = (a.min(c), a.max(c));
            let e = *edge_of.entry(key).or_insert_with(|| b.line_edge(verts[a], verts[c]));
            // Edges are created along the first use, so that use is forward.
            let forward = b.edge_vertices(e)[0] == verts[a];
            uses.push((e, forward));
        }
        let p0 = points[cycle[0]];
        let u = (points[cycle[1]] - p0).normalize();
        let mut normal = Vec3::zeros();
        for k in 0..n {
            let (a, c) = (points[cycle[k]], points[cycle[(k + 1) % n]]);
            normal += a.cross(&c);
        }
        let normal = normal.normalize();
        let v = normal.cross(&u);
        let polyline = cycle.iter().map(|&i| [(points[i] - p0).dot(&u), (points[i] - p0).dot(&v)]).collect();
        let s = b.surface(ParametricSurface::Plane { origin: p0, u_axis: u, v_axis: v });
        b.face(s, true, vec![LoopSpec { kind: LoopKind::Outer, uses, polyline }]);
    }
    b.build()
}

/// Axis-aligned box with the given extents and minimum corner.
/// Faces: bottom, front, right, back, left, top.
pub fn box_solid(extents: Vec3, min_corner: Vec3) -> Solid {
    let points: Vec<Vec3> = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ]
    .iter()
    .map(|c| min_corner + Vec3::new(c[0] * extents.x, c[1] * extents.y, c[2] * extents.z))
    .collect();
    let faces = vec![
        vec![0, 3, 2, 1],
        vec![0, 1, 5, 4],
        vec![1, 2, 6, 5],
        vec![2, 3, 7, 6],
        vec![3, 0, 4, 7],
        vec![4, 5, 6, 7],
    ];
    polyhedron(&points, &faces)
}

pub fn unit_cube() -> Solid {
    box_solid(Vec3::new(1.0, 1.0, 1.0), Vec3::zeros())
}

fn circle_polyline(radius: f64, samples: usize) -> Vec<[f64; 2]> {
    (0..samples)
        .map(|i| {
            let t = TAU * i as f64 / samples as f64;
            [radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

/// Solid of revolution about +z between heights 0 and `height`, with radii
/// `r0` (bottom) and `r1` (top) and the lateral surface split into `splits`
/// faces. One split leaves a single lateral face closed by a seam edge.
fn revolved(r0: f64, r1: f64, height: f64, splits: usize) -> Solid {
    assert!(splits >= 1);
    let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
    let top = z * height;
    let angles: Vec<f64> = (0..=splits).map(|i| TAU * i as f64 / splits as f64).collect();
    let ring = |r: f64, t: f64| x * (r * t.cos()) + y * (r * t.sin());

    let mut b = SolidBuilder::new();
    let bottom_v: Vec<usize> = (0..splits).map(|i| b.vertex(ring(r0, angles[i]))).collect();
    let top_v: Vec<usize> = (0..splits).map(|i| b.vertex(top + ring(r1, angles[i]))).collect();

    let arc_edges = |b: &mut SolidBuilder, center: Vec3, r: f64, verts: &[usize]| -> Vec<usize> {
        (0..splits)
            .map(|i| {
                let (start, end) = (angles[i], angles[i + 1]);
                let c = b.curve(ParametricCurve::CircularArc { center, radius: r, x_axis: x, y_axis: y, start, end });
                b.edge(c, Interval::new_unchecked(start, end), verts[i], verts[(i + 1) % splits])
            })
            .collect()
    };
    let bottom_arcs = arc_edges(&mut b, Vec3::zeros(), r0, &bottom_v);
    let top_arcs = arc_edges(&mut b, top, r1, &top_v);
    let verticals: Vec<usize> = (0..splits).map(|i| b.line_edge(bottom_v[i], top_v[i])).collect();

    let cap_samples = 64;
    let bottom_plane = b.surface(ParametricSurface::Plane { origin: Vec3::zeros(), u_axis: x, v_axis: y });
    b.face(
        bottom_plane,
        false,
        vec![LoopSpec {
            kind: LoopKind::Outer,
            uses: bottom_arcs.iter().rev().map(|&e| (e, false)).collect(),
            polyline: circle_polyline(r0, cap_samples),
        }],
    );
    let lateral = if (r0 - r1).abs() < 1e-15 {
        ParametricSurface::Cylinder { origin: Vec3::zeros(), x_axis: x, y_axis: y, radius: r0 }
    } else {
        let half_angle = ((r1 - r0) / height).atan();
        ParametricSurface::Cone { origin: Vec3::zeros(), x_axis: x, y_axis: y, radius: r0, half_angle }
    };
    let lateral = b.surface(lateral);
    for i in 0..splits {
        let (a0, a1) = (angles[i], angles[i + 1]);
        b.face(
            lateral,
            true,
            vec![LoopSpec {
                kind: LoopKind::Outer,
                uses: vec![
                    (bottom_arcs[i], true),
                    (verticals[(i + 1) % splits], true),
                    (top_arcs[i], false),
                    (verticals[i], false),
                ],
                polyline: vec![[a0, 0.0], [a1, 0.0], [a1, height], [a0, height]],
            }],
        );
    }
    let top_plane = b.surface(ParametricSurface::Plane { origin: top, u_axis: x, v_axis: y });
    b.face(
        top_plane,
        true,
        vec![LoopSpec {
            kind: LoopKind::Outer,
            uses: top_arcs.iter().map(|&e| (e, true)).collect(),
            polyline: circle_polyline(r1, cap_samples),
        }],
    );
    b.build()
}

/// Cylinder about +z from the origin, lateral surface split into `splits` faces.
pub fn cylinder(radius: f64, height: f64, splits: usize) -> Solid {
    revolved(radius, radius, height, splits)
}

/// Cone frustum about +z with bottom radius `r0` and top radius `r1`.
pub fn cone_frustum(r0: f64, r1: f64, height: f64, splits: usize) -> Solid {
    revolved(r0, r1, height, splits)
}

fn meridian(b: &mut SolidBuilder, radius: f64, angle: f64, upper: bool) -> (usize, Interval) {
    let c = b.curve(ParametricCurve::CircularArc {
        center: Vec3::zeros(),
        radius,
        x_axis: Vec3::new(angle.cos(), angle.sin(), 0.0),
        y_axis: Vec3::z(),
        start: if upper { 0.0 } else { -FRAC_PI_2 },
        end: if upper { FRAC_PI_2 } else { 0.0 },
    });
    let i = if upper { Interval::new_unchecked(0.0, FRAC_PI_2) } else { Interval::new_unchecked(-FRAC_PI_2, 0.0) };
    (c, i)
}

fn sphere_surface(b: &mut SolidBuilder, radius: f64) -> usize {
    b.surface(ParametricSurface::Sphere { center: Vec3::zeros(), x_axis: Vec3::x(), y_axis: Vec3::y(), radius })
}

/// Sphere at the origin as two hemispheres sharing an equator split into two
/// edges; each hemisphere is closed by its own seam meridian.
pub fn sphere_hemispheres(radius: f64) -> Solid {
    let mut b = SolidBuilder::new();
    let v0 = b.vertex(Vec3::x() * radius);
    let v1 = b.vertex(-Vec3::x() * radius);
    let north = b.vertex(Vec3::z() * radius);
    let south = b.vertex(-Vec3::z() * radius);
    let equator: Vec<usize> = [(0.0, PI, v0, v1), (PI, TAU, v1, v0)]
        .iter()
        .map(|&(start, end, a, c)| {
            let curve = b.curve(ParametricCurve::CircularArc {
                center: Vec3::zeros(),
                radius,
                x_axis: Vec3::x(),
                y_axis: Vec3::y(),
                start,
                end,
            });
            b.edge(curve, Interval::new_unchecked(start, end), a, c)
        })
        .collect();
    let (c, i) = meridian(&mut b, radius, 0.0, true);
    let seam_n = b.edge(c, i, v0, north);
    let (c, i) = meridian(&mut b, radius, 0.0, false);
    let seam_s = b.edge(c, i, south, v0);
    let s = sphere_surface(&mut b, radius);
    b.face(
        s,
        true,
        vec![LoopSpec {
            kind: LoopKind::Outer,
            uses: vec![(equator[0], true), (equator[1], true), (seam_n, true), (seam_n, false)],
            polyline: vec![[0.0, 0.0], [PI, 0.0], [TAU, 0.0], [TAU, FRAC_PI_2], [0.0, FRAC_PI_2]],
        }],
    );
    b.face(
        s,
        true,
        vec![LoopSpec {
            kind: LoopKind::Outer,
            uses: vec![(seam_s, true), (equator[1], false), (equator[0], false), (seam_s, false)],
            polyline: vec![[0.0, -FRAC_PI_2], [TAU, -FRAC_PI_2], [TAU, 0.0], [PI, 0.0], [0.0, 0.0]],
        }],
    );
    b.build()
}

/// Sphere at the origin split into eight octant faces.
pub fn sphere_octants(radius: f64) -> Solid {
    let mut b = SolidBuilder::new();
    let angles: Vec<f64> = (0..=4).map(|k| FRAC_PI_2 * k as f64).collect();
    let eq_v: Vec<usize> =
        (0..4).map(|k| b.vertex(Vec3::new(angles[k].cos(), angles[k].sin(), 0.0) * radius)).collect();
    let north = b.vertex(Vec3::z() * radius);
    let south = b.vertex(-Vec3::z() * radius);
    let equator: Vec<usize> = (0..4)
        .map(|k| {
            let (start, end) = (angles[k], angles[k + 1]);
            let c = b.curve(ParametricCurve::CircularArc {
                center: Vec3::zeros(),
                radius,
                x_axis: Vec3::x(),
                y_axis: Vec3::y(),
                start,
                end,
            });
            b.edge(c, Interval::new_unchecked(start, end), eq_v[k], eq_v[(k + 1) % 4])
        })
        .collect();
    let upper: Vec<usize> = (0..4)
        .map(|k| {
            let (c, i) = meridian(&mut b, radius, angles[k], true);
            b.edge(c, i, eq_v[k], north)
        })
        .collect();
    let lower: Vec<usize> = (0..4)
        .map(|k| {
            let (c, i) = meridian(&mut b, radius, angles[k], false);
            b.edge(c, i, south, eq_v[k])
        })
        .collect();
    let s = sphere_surface(&mut b, radius);
    for k in 0..4 {
        let (a, c) = (angles[k], angles[k + 1]);
        b.face(
            s,
            true,
            vec![LoopSpec {
                kind: LoopKind::Outer,
                uses: vec![(equator[k], true), (upper[(k + 1) % 4], true), (upper[k], false)],
                polyline: vec![[a, 0.0], [c, 0.0], [c, FRAC_PI_2], [a, FRAC_PI_2]],
            }],
        );
    }
    for k in 0..4 {
        let (a, c) = (angles[k], angles[k + 1]);
        b.face(
            s,
            true,
            vec![LoopSpec {
                kind: LoopKind::Outer,
                uses: vec![(equator[k], false), (lower[k], false), (lower[(k + 1) % 4], true)],
                polyline: vec![[a, -FRAC_PI_2], [c, -FRAC_PI_2], [c, 0.0], [a, 0.0]],
            }],
        );
    }
    b.build()
}

/// Named reference solids covering every topology pattern above.
pub fn catalog() -> Vec<(&'static str, Solid)> {
    vec![
        ("unit_cube", unit_cube()),
        ("box", box_solid(Vec3::new(10.0, 4.0, 2.0), Vec3::new(-1.0, 2.0, 0.5))),
        ("cylinder_seam", cylinder(1.0, 2.0, 1)),
        ("cylinder_quarters", cylinder(0.5, 1.5, 4)),
        ("cone_seam", cone_frustum(1.0, 0.4, 1.0, 1)),
        ("cone_quarters", cone_frustum(0.6, 1.2, 0.8, 4)),
        ("sphere_hemispheres", sphere_hemispheres(1.0)),
        ("sphere_octants", sphere_octants(1.5)),
    ]
}
