use super::profile::{loop_outline, Point2, Profile, ProfileSegment};
use super::ExtrusionSpec;
use crate::brep::{LoopKind, LoopSpec, Solid, SolidBuilder};
use crate::geometry::{BSplineCurve, BSplineSurface, Interval, ParametricCurve, ParametricSurface, Vec3};
use crate::error::{Error, Result};

/// Outline samples per spline side in the cap trimming polylines.
const CAP_SPLINE_SAMPLES: usize = 32;
/// Below this `e_z` the sweep is too flat to be trusted.
const MIN_LIFT: f64 = 0.05;

fn lift(p: Point2) -> Vec3 {
    Vec3::new(p[0], p[1], 0.0)
}

struct LoopEdges {
    bottom: Vec<usize>,
    top: Vec<usize>,
    vertical: Vec<usize>,
}

/// Sweeps `profile` by `spec.height · spec.direction`. Face order: bottom
/// cap, top cap, then one lateral face per profile side (outer loop first,
/// then each hole).
pub fn extrude(profile: &Profile, spec: &ExtrusionSpec) -> Result<Solid> {
    profile.validate()?;
    let e = spec.direction;
    if (e.norm() - 1.0).abs() > 1e-9 || e.z < MIN_LIFT || spec.height.is_nan() || spec.height <= 0.0 {
        return Err(Error::Generation(format!("degenerate sweep: direction {e:?}, height {}", spec.height)));
    }
    let offset = e * spec.height;
    let mut b = SolidBuilder::new();
    let mut loops: Vec<LoopEdges> = Vec::new();
    let mut lateral = Vec::new();

    for segs in profile.loops() {
        let n = segs.len();
        let bv: Vec<usize> = segs.iter().map(|s| b.vertex(lift(s.start))).collect();
        let tv: Vec<usize> = segs.iter().map(|s| b.vertex(lift(s.start) + offset)).collect();
        let vertical: Vec<usize> = (0..n).map(|i| b.line_edge(bv[i], tv[i])).collect();
        let (mut bottom, mut top) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for (i, seg) in segs.iter().enumerate() {
            let j = (i + 1) % n;
            if seg.is_line() {
                bottom.push(b.line_edge(bv[i], bv[j]));
                top.push(b.line_edge(tv[i], tv[j]));
                let (p, q) = (lift(seg.start), lift(segs[j].start));
                let len = (q - p).norm();
                let s = b.surface(ParametricSurface::Plane { origin: p, u_axis: (q - p) / len, v_axis: e });
                lateral.push((s, vec![[0.0, 0.0], [len, 0.0], [len, spec.height], [0.0, spec.height]]));
            } else {
                let ctrl: Vec<Vec3> = spline_controls(seg, &segs[j]).into_iter().map(lift).collect();
                let degree = (ctrl.len() - 1).min(3);
                let curve = BSplineCurve::clamped_uniform(degree, ctrl.clone())?;
                let mut top_curve = curve.clone();
                top_curve.map_points(|p| p + offset);
                let unit = Interval::new(0.0, 1.0)?;
                let cb = b.curve(ParametricCurve::BSpline(curve.clone()));
                bottom.push(b.edge(cb, unit, bv[i], bv[j]));
                let ct = b.curve(ParametricCurve::BSpline(top_curve));
                top.push(b.edge(ct, unit, tv[i], tv[j]));
                let controls: Vec<Vec3> = ctrl.iter().flat_map(|&p| [p, p + offset]).collect();
                let surf = BSplineSurface::new(degree, 1, curve.knots.clone(), vec![0.0, 0.0, 1.0, 1.0], ctrl.len(), 2, controls, None)?;
                let s = b.surface(ParametricSurface::BSpline(surf));
                lateral.push((s, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]));
            }
        }
        loops.push(LoopEdges { bottom, top, vertical });
    }

    let outlines: Vec<Vec<Point2>> = profile.loops().map(|l| loop_outline(l, CAP_SPLINE_SAMPLES)).collect();
    let kind = |k: usize| if k == 0 { LoopKind::Outer } else { LoopKind::Inner };

    // Bottom cap: the plane's normal is +z, the material lies above, so the
    // face is reversed and its loops run against the profile direction.
    let bottom = b.surface(ParametricSurface::Plane { origin: Vec3::zeros(), u_axis: Vec3::x(), v_axis: Vec3::y() });
    let specs = loops
        .iter()
        .enumerate()
        .map(|(k, l)| LoopSpec { kind: kind(k), uses: l.bottom.iter().rev().map(|&e| (e, false)).collect(), polyline: outlines[k].clone() })
        .collect();
    b.face(bottom, false, specs);

    let top = b.surface(ParametricSurface::Plane { origin: offset, u_axis: Vec3::x(), v_axis: Vec3::y() });
    let specs = loops
        .iter()
        .enumerate()
        .map(|(k, l)| LoopSpec { kind: kind(k), uses: l.top.iter().map(|&e| (e, true)).collect(), polyline: outlines[k].clone() })
        .collect();
    b.face(top, true, specs);

    let mut side = lateral.into_iter();
    for l in &loops {
        let n = l.bottom.len();
        for i in 0..n {
            let (s, polyline) = side.next().expect("one surface per side");
            let uses = vec![(l.bottom[i], true), (l.vertical[(i + 1) % n], true), (l.top[i], false), (l.vertical[i], false)];
            b.face(s, true, vec![LoopSpec { kind: LoopKind::Outer, uses, polyline }]);
        }
    }
    let solid = b.build();
    crate::brep::validate(&solid).into_result()?;
    Ok(solid)
}

fn spline_controls(seg: &ProfileSegment, next: &ProfileSegment) -> Vec<Point2> {
    let mut c = vec![seg.start];
    c.extend_from_slice(&seg.spline);
    c.push(next.start);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::FaceAdjacencyGraph;
    use crate::synth::{extrusion_vector, profile::Family};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> Profile {
        Profile { outer: [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]].into_iter().map(ProfileSegment::line).collect(), holes: vec![] }
    }

    fn straight(h: f64) -> ExtrusionSpec {
        ExtrusionSpec { direction: Vec3::z(), height: h, xi1: 1.0, xi2: 0.0, theta: std::f64::consts::FRAC_PI_4 }
    }

    #[test]
    fn unit_square_extrudes_to_cube() {
        let s = extrude(&square(), &straight(1.0)).unwrap();
        assert_eq!((s.faces.len(), s.edges.len(), s.vertices.len()), (6, 12, 8));
        let g = FaceAdjacencyGraph::from_solid(&s).unwrap();
        assert_eq!(g.degrees(), vec![4; 6]);
        let bb = crate::brep::bounding_box(&s);
        assert!((bb.min - Vec3::zeros()).norm() < 1e-12 && (bb.max - Vec3::new(1.0, 1.0, 1.0)).norm() < 1e-12);
        // Outward normals: bottom −z, top +z, first side (y = 0) −y.
        assert!((s.face_normal(0, 0.5, 0.5).unwrap() + Vec3::z()).norm() < 1e-12);
        assert!((s.face_normal(1, 0.5, 0.5).unwrap() - Vec3::z()).norm() < 1e-12);
        assert!((s.face_normal(2, 0.5, 0.5).unwrap() + Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn l_hexagon_has_hand_counted_degrees() {
        let l = Profile {
            outer: [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]].into_iter().map(ProfileSegment::line).collect(),
            holes: vec![],
        };
        let s = extrude(&l, &straight(0.5)).unwrap();
        assert_eq!(s.faces.len(), 8);
        let g = FaceAdjacencyGraph::from_solid(&s).unwrap();
        // Caps touch all six sides; every side touches both caps and its two neighbours.
        assert_eq!(g.degrees(), vec![6, 6, 4, 4, 4, 4, 4, 4]);
    }

    #[test]
    fn square_with_hole_has_inner_trims() {
        let mut p = square();
        p.holes.push([[0.3, 0.3], [0.3, 0.7], [0.7, 0.7], [0.7, 0.3]].into_iter().map(ProfileSegment::line).collect());
        let s = extrude(&p, &straight(1.0)).unwrap();
        assert_eq!(s.faces.len(), 10);
        for cap in 0..2 {
            assert_eq!(s.faces[cap].loops.len(), 2);
            assert_eq!(s.faces[cap].loops[1].kind, LoopKind::Inner);
        }
        let g = FaceAdjacencyGraph::from_solid(&s).unwrap();
        assert_eq!(g.degrees(), vec![8, 8, 4, 4, 4, 4, 4, 4, 4, 4]);
        // An inner lateral face looks into the hole: normal points toward the hole centre.
        let n = s.face_normal(6, 0.2, 0.5).unwrap();
        assert!((n - Vec3::x()).norm() < 1e-12, "{n:?}");
    }

    #[test]
    fn tilted_and_spline_extrusions_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for fam in [Family::SplinePolygon { sides: 4 }, Family::Letter { letter: 'T' }, Family::Holed { sides: 5, hole_sides: 3 }] {
            for k in 0..10 {
                let p = fam.sample(&mut rng);
                let e = extrusion_vector(k as f64 / 10.0, 0.37 * k as f64 % 1.0, std::f64::consts::FRAC_PI_4);
                let spec = ExtrusionSpec { direction: e, height: 0.8, xi1: 0.0, xi2: 0.0, theta: 0.0 };
                let s = extrude(&p, &spec).unwrap();
                assert_eq!(s.faces.len(), fam.face_count());
            }
        }
    }

    #[test]
    fn flat_sweep_is_rejected() {
        let spec = ExtrusionSpec { direction: Vec3::x(), ..straight(1.0) };
        assert!(matches!(extrude(&square(), &spec), Err(Error::Generation(_))));
    }
}
