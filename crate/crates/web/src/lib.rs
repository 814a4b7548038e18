//! Browser bindings: generate an extrusion and inspect its UV-grids and
//! labels, view it through a contrastive augmentation, and measure grid
//! approximation error of a primitive. Every export returns a JSON string.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use uvnet::brep::{normalize, primitives, FaceAdjacencyGraph, Solid};
use uvnet::dataset::Record;
use uvnet::sampler::{error_report, SamplingConfig};
use uvnet::ssl::ViewTransform;
use uvnet::synth::{gen_dataset, Family, GenConfig, SEGMENT_NAMES};
use uvnet::Result;

fn record(family_json: &str, seed: u64, resolution: usize) -> Result<Record> {
    let family: Family = serde_json::from_str(family_json).map_err(|e| uvnet::Error::Config(format!("family: {e}")))?;
    let mut cfg = GenConfig::new(seed, 1, vec![family]);
    cfg.sampling = SamplingConfig::with_resolution(resolution, resolution);
    gen_dataset(&cfg)?.records.pop().ok_or_else(|| uvnet::Error::Generation("no record after retries".into()))
}

fn graph_json(g: &FaceAdjacencyGraph, labels: &[usize]) -> Value {
    let faces: Vec<Value> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let grid = n.grid.as_ref();
            let points: Vec<[f64; 3]> = grid
                .map(|gr| {
                    (0..gr.m())
                        .flat_map(|k| (0..gr.n()).map(move |l| (k, l)))
                        .filter(|&(k, l)| gr.mask(k, l))
                        .map(|(k, l)| gr.point(k, l).into())
                        .collect()
                })
                .unwrap_or_default();
            json!({
                "face": n.face,
                "label": labels.get(i).map(|&l| SEGMENT_NAMES[l]),
                "visible": grid.map(|gr| gr.visible_count()),
                "samples": grid.map(|gr| gr.m() * gr.n()),
                "points": points,
            })
        })
        .collect();
    let links: Vec<[usize; 2]> = g.links.iter().map(|l| l.ends).collect();
    json!({ "nodes": g.node_count(), "links": links, "faces": faces })
}

/// Extrusion of a random profile from `family_json` (e.g. `{"polygon":{"sides":5}}`).
pub fn generate_json(family_json: &str, seed: u64, resolution: usize) -> Result<String> {
    let r = record(family_json, seed, resolution)?;
    let mut v = graph_json(&r.graph, &r.face_labels);
    v["family"] = json!(r.family);
    v["hash"] = json!(r.hash);
    v["direction"] = json!(r.spec.map(|s| [s.direction.x, s.direction.y, s.direction.z]));
    Ok(v.to_string())
}

/// The same solid seen through one contrastive view transform
/// (`identity`, `patch1`, `patch2`, `drop_nodes`, `drop_edges`).
pub fn augment_json(family_json: &str, seed: u64, resolution: usize, transform: &str, view_seed: u64) -> Result<String> {
    let r = record(family_json, seed, resolution)?;
    let t = match transform {
        "identity" => ViewTransform::Identity,
        "patch1" => ViewTransform::ConnectedPatch { hops: 1 },
        "patch2" => ViewTransform::ConnectedPatch { hops: 2 },
        "drop_nodes" => ViewTransform::DropNodes { p: 0.4 },
        "drop_edges" => ViewTransform::DropEdges { p: 0.4 },
        other => return Err(uvnet::Error::Config(format!("unknown transform {other:?}"))),
    };
    let view = t.apply(&r.graph, &mut ChaCha8Rng::seed_from_u64(view_seed))?;
    let labels: Vec<usize> = view.nodes.iter().map(|n| r.face_labels[n.face]).collect();
    let mut v = graph_json(&view, &labels);
    v["original_nodes"] = json!(r.graph.node_count());
    v["original_links"] = json!(r.graph.link_count());
    Ok(v.to_string())
}

fn primitive(kind: &str) -> Result<Solid> {
    let (_, solid) = primitives::catalog()
        .into_iter()
        .find(|(name, _)| *name == kind)
        .ok_or_else(|| uvnet::Error::Config(format!("unknown primitive {kind:?}")))?;
    normalize(&solid)
}

/// Names accepted by [`error_json`].
#[wasm_bindgen]
pub fn primitive_names() -> String {
    json!(primitives::catalog().iter().map(|(n, _)| *n).collect::<Vec<_>>()).to_string()
}

/// Chordal and Bézier approximation error of a primitive sampled at `m × n`.
pub fn error_json(kind: &str, m: usize, n: usize) -> Result<String> {
    let report = error_report(&primitive(kind)?, m, n)?;
    Ok(json!({ "primitive": kind, "resolution": [m, n], "table": report.table(), "report": report }).to_string())
}

fn js<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn generate(family_json: &str, seed: u32, resolution: u32) -> std::result::Result<String, String> {
    js(generate_json(family_json, seed as u64, resolution as usize))
}

#[wasm_bindgen]
pub fn augment(family_json: &str, seed: u32, resolution: u32, transform: &str, view_seed: u32) -> std::result::Result<String, String> {
    js(augment_json(family_json, seed as u64, resolution as usize, transform, view_seed as u64))
}

#[wasm_bindgen]
pub fn approximation_error(kind: &str, m: u32, n: u32) -> std::result::Result<String, String> {
    js(error_json(kind, m as usize, n as usize))
}
