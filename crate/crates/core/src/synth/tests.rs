use std::f64::consts::{FRAC_PI_4, PI};

use super::*;
use crate::brep::{primitives, transform};

fn straight(h: f64) -> ExtrusionSpec {
    ExtrusionSpec { direction: Vec3::z(), height: h, xi1: 1.0, xi2: 0.0, theta: FRAC_PI_4 }
}

fn square() -> Profile {
    Profile { outer: [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]].into_iter().map(ProfileSegment::line).collect(), holes: vec![] }
}

#[test]
fn extrusion_vector_formula() {
    assert!((extrusion_vector(1.0, 0.3, FRAC_PI_4) - Vec3::z()).norm() < 1e-15);
    let e = extrusion_vector(0.0, 0.0, FRAC_PI_4);
    assert!((e.z - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((e.z.acos() - FRAC_PI_4).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let e = extrusion_vector(rng.random(), rng.random(), rng.random_range(0.01..1.5));
        assert!((e.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cap_heights_are_uniform() {
    // One-sample Kolmogorov–Smirnov test of e_z against U[cos θ, 1].
    let n = 100_000;
    let c = FRAC_PI_4.cos();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut z: Vec<f64> = (0..n).map(|_| extrusion_vector(rng.random(), rng.random(), FRAC_PI_4).z).collect();
    z.sort_by(f64::total_cmp);
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x - c) / (1.0 - c);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // Critical value at α = 0.01.
    assert!(d < 1.628 / (n as f64).sqrt(), "D = {d}");
}

#[test]
fn cube_and_tilted_labels() {
    let cube = extrude(&square(), &straight(1.0)).unwrap();
    assert_eq!(segmentation_labels(&cube, &Vec3::z()).unwrap(), vec![LABEL_END, LABEL_END, LABEL_SIDE, LABEL_SIDE, LABEL_SIDE, LABEL_SIDE]);
    let e = extrusion_vector(0.0, 0.2, FRAC_PI_4);
    let spec = ExtrusionSpec { direction: e, ..straight(0.7) };
    let tilted = extrude(&square(), &spec).unwrap();
    let labels = segmentation_labels(&tilted, &e).unwrap();
    assert_eq!(labels, vec![LABEL_END, LABEL_END, LABEL_SIDE, LABEL_SIDE, LABEL_SIDE, LABEL_SIDE]);
    let normalized = normalize(&tilted).unwrap();
    assert_eq!(segmentation_labels(&normalized, &e).unwrap(), labels);
}

#[test]
fn non_extrusion_faces_get_other() {
    // Frustum with a 20° half-angle: the lateral mean normal has |n·z| = sin 20° ≈ 0.34.
    let cone = primitives::cone_frustum(1.0, 0.6, 0.4 / 20f64.to_radians().tan(), 1);
    let labels = segmentation_labels(&cone, &Vec3::z()).unwrap();
    assert_eq!(labels[0], LABEL_END);
    assert_eq!(labels[1], LABEL_OTHER);
}

#[test]
fn quadrature_area() {
    let cube = primitives::unit_cube();
    assert!((surface_area(&cube, 10, 10).unwrap() - 6.0).abs() < 1e-12);
    let (r, h) = (0.8, 1.7);
    let cyl = primitives::cylinder(r, h, 2);
    let exact = 2.0 * PI * r * h + 2.0 * PI * r * r;
    let a = surface_area(&cyl, 10, 10).unwrap();
    assert!((a - exact).abs() / exact < 0.01, "{a} vs {exact}");
}

#[test]
fn hash_invariances_and_collisions() {
    let boxes = [Vec3::new(3.0, 2.0, 1.0), Vec3::new(2.0, 3.0, 1.0), Vec3::new(1.0, 3.0, 2.0)];
    let hashes: Vec<String> = boxes.iter().map(|e| dedup_hash(&normalize(&primitives::box_solid(*e, Vec3::zeros())).unwrap()).unwrap()).collect();
    assert!(hashes.iter().all(|h| *h == hashes[0]));

    let solid = extrude(&Family::Letter { letter: 'T' }.sample(&mut ChaCha8Rng::seed_from_u64(1)), &straight(0.6)).unwrap();
    let doubled = transform(&solid, 2.0, &Vec3::new(0.3, -1.0, 4.0));
    assert_eq!(dedup_hash(&normalize(&solid).unwrap()).unwrap(), dedup_hash(&normalize(&doubled).unwrap()).unwrap());

    let mut cfg = GenConfig::new(5, 40, vec![Family::Polygon { sides: 4 }]);
    cfg.sampling = SamplingConfig::with_resolution(3, 3);
    let ds = gen_dataset(&cfg).unwrap();
    let mut seen: Vec<&String> = ds.records.iter().map(|r| &r.hash).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), ds.len());
}

#[test]
fn generated_dataset_is_balanced_valid_and_deterministic() {
    let cfg = GenConfig::four_shapes(7, 5);
    let ds = gen_dataset(&cfg).unwrap();
    assert_eq!(ds.len(), 20);
    for c in 0..4 {
        assert_eq!(ds.records.iter().filter(|r| r.class == c).count(), 5);
    }
    for r in &ds.records {
        assert!(r.graph.node_count() >= 3);
        assert_eq!(r.graph.node_count(), cfg.families[r.class].face_count());
        assert!(r.graph.nodes.iter().all(|n| n.grid.as_ref().unwrap().visible_count() > 0));
        assert_eq!(r.face_labels.len(), r.graph.node_count());
        assert_eq!(r.face_labels.iter().filter(|&&l| l == LABEL_END).count(), 2);
        crate::brep::validate(r.solid.as_ref().unwrap()).into_result().unwrap();
    }
    let bytes = |ds: &Dataset| {
        let mut buf = Vec::new();
        ds.write_container(&mut buf, "x.uvnd").unwrap();
        buf
    };
    let again = gen_dataset(&cfg).unwrap();
    assert_eq!(bytes(&ds), bytes(&again));
    let other = gen_dataset(&GenConfig::four_shapes(8, 5)).unwrap();
    assert_ne!(bytes(&ds), bytes(&other));
}

#[test]
fn container_round_trip_is_bit_exact() {
    let mut cfg = GenConfig::twenty_shapes(3, 1);
    cfg.sampling = SamplingConfig::with_resolution(5, 4);
    let ds = gen_dataset(&cfg).unwrap();
    assert_eq!(ds.len(), 20);
    let mut buf = Vec::new();
    let index = ds.write_container(&mut buf, "t.uvnd").unwrap();
    let back = Dataset::read_container(&mut buf.as_slice(), &index).unwrap();
    assert_eq!(back, ds);
    let bits = |d: &Dataset| -> Vec<u64> {
        d.records.iter().flat_map(|r| r.graph.nodes.iter().flat_map(|n| n.grid.as_ref().unwrap().data.iter().map(|x| x.to_bits()))).collect()
    };
    assert_eq!(bits(&back), bits(&ds));
    let mut again = Vec::new();
    back.write_container(&mut again, "t.uvnd").unwrap();
    assert_eq!(again, buf);

    let mut truncated = buf.clone();
    truncated.truncate(buf.len() - 9);
    assert!(Dataset::read_container(&mut truncated.as_slice(), &index).is_err());
    let mut bad = buf;
    bad[0] = b'X';
    assert!(Dataset::read_container(&mut bad.as_slice(), &index).is_err());
}

#[test]
fn container_files_and_resampling() {
    let dir = std::env::temp_dir().join(format!("uvnet-synth-{}", std::process::id()));
    let mut cfg = GenConfig::four_shapes(1, 2);
    cfg.sampling = SamplingConfig::with_resolution(4, 4);
    let ds = gen_dataset(&cfg).unwrap();
    let index = ds.save(&dir.join("toy")).unwrap();
    let back = Dataset::load(&index).unwrap();
    assert_eq!(back, ds);
    let text = std::fs::read_to_string(&index).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 8);
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
    let coarse = back.resampled(&SamplingConfig::with_resolution(3, 3)).unwrap();
    assert_eq!(coarse.records[0].graph.nodes[0].grid.as_ref().unwrap().m(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn face_bin_splits() {
    let (train, test) = split_by_face_bins(&[6; 50], 0.2, 0).unwrap();
    assert_eq!((train.len(), test.len()), (40, 10));
    let counts: Vec<usize> = (0..100).map(|i| 5 + (i * 7) % 11).collect();
    let (train, test) = split_by_face_bins(&counts, 0.2, 1).unwrap();
    assert!((18..=22).contains(&test.len()));
    assert_eq!(train.len() + test.len(), 100);
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    // Per-bin audit.
    let (lo, hi) = (5.0, 15.0);
    let bin = |f: usize| {
        let f = f as f64;
        if f < lo + 0.15 * (hi - lo) {
            0
        } else if f < lo + 0.30 * (hi - lo) {
            1
        } else {
            2
        }
    };
    for b in 0..3 {
        let n = counts.iter().filter(|&&f| bin(f) == b).count();
        let t = test.iter().filter(|&&i| bin(counts[i]) == b).count();
        if n >= 10 {
            assert!((t as f64 / n as f64 - 0.2).abs() <= 0.05, "bin {b}: {t}/{n}");
        }
    }
    assert!(split_by_face_bins(&[], 0.2, 0).is_err());
}

#[test]
fn primitive_corpus_is_valid() {
    for s in primitive_corpus(0, 24).unwrap() {
        crate::brep::validate(&s).into_result().unwrap();
        let bb = bounding_box(&s);
        assert!((bb.longest_edge() - 2.0).abs() < 1e-6);
    }
}

#[test]
fn config_validation() {
    assert!(GenConfig::from_json(r#"{"seed": 1, "per_class": 2, "families": [{"polygon": {"sides": 2}}]}"#).is_err());
    let c = GenConfig::from_json(r#"{"seed": 1, "per_class": 2, "families": [{"letter": {"letter": "L"}}]}"#).unwrap();
    assert_eq!(c.theta_deg, 45.0);
    assert!(GenConfig::from_json(r#"{"seed": 1, "per_class": 2, "families": [], "extra": 0}"#).is_err());
}
