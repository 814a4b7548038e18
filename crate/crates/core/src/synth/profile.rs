use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// One side of a profile loop, from `start` to the next segment's start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSegment {
    pub start: Point2,
    /// Interior control points of a clamped B-spline side; empty for a line.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spline: Vec<Point2>,
}

impl ProfileSegment {
    pub fn line(start: Point2) -> Self {
        Self { start, spline: Vec::new() }
    }

    pub fn is_line(&self) -> bool {
        self.spline.is_empty()
    }
}

/// Closed planar loops in the XY plane: an outer loop (counterclockwise)
/// and optional holes (clockwise).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub outer: Vec<ProfileSegment>,
    #[serde(default)]
    pub holes: Vec<Vec<ProfileSegment>>,
}

/// Clamped uniform B-spline evaluation in 2D for the dense outline.
fn spline_points(controls: &[Point2], samples: usize) -> Vec<Point2> {
    let p = (controls.len() - 1).min(3);
    let n = controls.len();
    let spans = n - p;
    let mut knots = vec![0.0; p + 1];
    knots.extend((1..spans).map(|i| i as f64 / spans as f64));
    knots.extend(std::iter::repeat_n(1.0, p + 1));
    (0..samples)
        .map(|s| {
            let t = s as f64 / samples as f64;
            // de Boor
            let k = (p..n).rev().find(|&k| knots[k] <= t).unwrap_or(p).min(n - 1);
            let mut d: Vec<Point2> = (0..=p).map(|j| controls[j + k - p]).collect();
            for r in 1..=p {
                for j in (r..=p).rev() {
                    let i = j + k - p;
                    let denom = knots[i + p + 1 - r] - knots[i];
                    let a = if denom > 0.0 { (t - knots[i]) / denom } else { 0.0 };
                    d[j] = [(1.0 - a) * d[j - 1][0] + a * d[j][0], (1.0 - a) * d[j - 1][1] + a * d[j][1]];
                }
            }
            d[p]
        })
        .collect()
}

/// Dense closed polyline of a loop (start points and spline samples).
pub fn loop_outline(segments: &[ProfileSegment], per_spline: usize) -> Vec<Point2> {
    let mut out = Vec::new();
    for (i, s) in segments.iter().enumerate() {
        if s.is_line() {
            out.push(s.start);
        } else {
            let end = segments[(i + 1) % segments.len()].start;
            let mut ctrl = vec![s.start];
            ctrl.extend_from_slice(&s.spline);
            ctrl.push(end);
            out.extend(spline_points(&ctrl, per_spline));
        }
    }
    out
}

pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i][0] * poly[(i + 1) % n][1] - poly[(i + 1) % n][0] * poly[i][1]).sum::<f64>() / 2.0
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (d1, d2) = (orient(a, b, c), orient(a, b, d));
    let (d3, d4) = (orient(c, d, a), orient(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]) {
            inside = !inside;
        }
    }
    inside
}

impl Profile {
    pub fn loops(&self) -> impl Iterator<Item = &Vec<ProfileSegment>> {
        std::iter::once(&self.outer).chain(&self.holes)
    }

    /// Number of lateral faces an extrusion of this profile has.
    pub fn side_count(&self) -> usize {
        self.loops().map(Vec::len).sum()
    }

    /// Orientation, simplicity and containment checks on the dense outlines.
    pub fn validate(&self) -> Result<()> {
        let outlines: Vec<Vec<Point2>> = self.loops().map(|l| loop_outline(l, 16)).collect();
        for (i, (l, poly)) in self.loops().zip(&outlines).enumerate() {
            if l.len() < 3 && l.iter().all(ProfileSegment::is_line) || l.len() < 2 {
                return Err(Error::Generation(format!("loop {i} has too few sides")));
            }
            let area = signed_area(poly);
            if (i == 0) != (area > 0.0) || area.abs() < 1e-9 {
                return Err(Error::Generation(format!("loop {i} has wrong orientation (area {area})")));
            }
        }
        let edges: Vec<(Point2, Point2)> =
            outlines.iter().flat_map(|p| (0..p.len()).map(move |i| (p[i], p[(i + 1) % p.len()]))).collect();
        for i in 0..edges.len() {
            for j in 0..i {
                if segments_cross(edges[i].0, edges[i].1, edges[j].0, edges[j].1) {
                    return Err(Error::Generation("profile loops self-intersect".into()));
                }
            }
        }
        for (k, hole) in outlines.iter().enumerate().skip(1) {
            if !hole.iter().all(|&p| point_in_polygon(p, &outlines[0])) {
                return Err(Error::Generation(format!("hole {k} is not inside the outer loop")));
            }
        }
        Ok(())
    }
}

/// Profile families the generator can draw from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Convex polygon with jittered vertex angles and radii.
    Polygon { sides: usize },
    /// Convex polygon with a smaller polygonal hole.
    Holed { sides: usize, hole_sides: usize },
    /// Letter-like outline: "L", "T" or "U".
    Letter { letter: char },
    /// Convex polygon whose first side is a bulging B-spline.
    SplinePolygon { sides: usize },
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Self::Polygon { sides } => format!("polygon{sides}"),
            Self::Holed { sides, hole_sides } => format!("holed{sides}x{hole_sides}"),
            Self::Letter { letter } => format!("letter_{letter}"),
            Self::SplinePolygon { sides } => format!("spline_polygon{sides}"),
        }
    }

    /// Faces of an extrusion: two caps plus one per profile side.
    pub fn face_count(&self) -> usize {
        2 + match self {
            Self::Polygon { sides } | Self::SplinePolygon { sides } => *sides,
            Self::Holed { sides, hole_sides } => sides + hole_sides,
            Self::Letter { letter: 'L' } => 6,
            Self::Letter { letter: 'U' } => 8,
            Self::Letter { .. } => 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Polygon { sides } | Self::SplinePolygon { sides } if *sides < 3 => {
                Err(Error::Config(format!("polygons need at least 3 sides, got {sides}")))
            }
            Self::Holed { sides, hole_sides } if *sides < 3 || *hole_sides < 3 => Err(Error::Config("holed profiles need at least 3 sides".into())),
            Self::Letter { letter } if !matches!(letter, 'L' | 'T' | 'U') => Err(Error::Config(format!("unknown letter {letter}"))),
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Profile {
        match self {
            Self::Polygon { sides } => Profile { outer: polygon(rng, *sides, 1.0).into_iter().map(ProfileSegment::line).collect(), holes: vec![] },
            Self::Holed { sides, hole_sides } => {
                let outer = polygon(rng, *sides, 1.0);
                // Inradius of the jittered polygon bounds the hole.
                let scale = rng.random_range(0.25..0.4);
                let mut hole = polygon(rng, *hole_sides, scale);
                hole.reverse();
                Profile {
                    outer: outer.into_iter().map(ProfileSegment::line).collect(),
                    holes: vec![hole.into_iter().map(ProfileSegment::line).collect()],
                }
            }
            Self::Letter { letter } => Profile { outer: letter_outline(rng, *letter).into_iter().map(ProfileSegment::line).collect(), holes: vec![] },
            Self::SplinePolygon { sides } => {
                let pts = polygon(rng, *sides, 1.0);
                let (a, b) = (pts[0], pts[1]);
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                // Outward normal of a counterclockwise side is to its right.
                let bulge = rng.random_range(0.15..0.35);
                let ctrl = |t: f64| [a[0] + t * dx + bulge * dy, a[1] + t * dy - bulge * dx];
                let mut outer: Vec<ProfileSegment> = pts.into_iter().map(ProfileSegment::line).collect();
                outer[0].spline = vec![ctrl(1.0 / 3.0), ctrl(2.0 / 3.0)];
                Profile { outer, holes: vec![] }
            }
        }
    }
}

/// Counterclockwise convex polygon: angles jittered within their sector,
/// radii in `[0.8, 1] · scale`, random rotation.
fn polygon(rng: &mut ChaCha8Rng, sides: usize, scale: f64) -> Vec<Point2> {
    let phase = rng.random_range(0.0..TAU);
    let sector = TAU / sides as f64;
    (0..sides)
        .map(|i| {
            let t = phase + sector * (i as f64 + rng.random_range(-0.2..0.2));
            let r = scale * rng.random_range(0.85..1.0);
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn letter_outline(rng: &mut ChaCha8Rng, letter: char) -> Vec<Point2> {
    let w = rng.random_range(1.2..2.0);
    let h = rng.random_range(1.5..2.2);
    let t = rng.random_range(0.3..0.5);
    match letter {
        'L' => vec![[0.0, 0.0], [w, 0.0], [w, t], [t, t], [t, h], [0.0, h]],
        'T' => {
            let (a, b) = ((w - t) / 2.0, (w + t) / 2.0);
            vec![[a, 0.0], [b, 0.0], [b, h - t], [w, h - t], [w, h], [0.0, h], [0.0, h - t], [a, h - t]]
        }
        _ => vec![[0.0, 0.0], [w, 0.0], [w, h], [w - t, h], [w - t, t], [t, t], [t, h], [0.0, h]],
    }
}
