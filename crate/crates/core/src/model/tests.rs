use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::brep::{primitives, FaceAdjacencyGraph};
use crate::geometry::Vec3;
use crate::nn::{grad_check, relative_error, sample_coords, Tensor};
use crate::sampler::{sample_graph, SamplingConfig};

fn tiny(task: Task, classes: usize) -> ModelConfig {
    ModelConfig {
        surface_widths: [4, 6, 8],
        curve_widths: [4, 6, 8],
        embed_dim: 8,
        graph_dim: 12,
        head_hidden: 6,
        mlp_hidden: 24,
        projection_dim: 5,
        ..ModelConfig::default()
    }
    .with_task(task, classes)
}

fn graph_of(solid: &crate::brep::Solid) -> FaceAdjacencyGraph {
    sample_graph(solid, &SamplingConfig::default()).unwrap()
}

fn cube() -> FaceAdjacencyGraph {
    graph_of(&primitives::unit_cube())
}

fn cylinder() -> FaceAdjacencyGraph {
    graph_of(&primitives::cylinder(0.7, 1.3, 4))
}

fn close(a: &Tensor, b: &Tensor, tol: f64) -> bool {
    a.shape == b.shape && a.data.iter().zip(&b.data).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn identical_graphs_embed_identically() {
    let mut m = UvNet::new(tiny(Task::Classification, 3), 1).unwrap();
    let (a, b) = (cube(), cube());
    let batch = m.batch(&[&a, &b], None).unwrap();
    let e = m.embed(&batch).unwrap();
    assert_eq!(e[0], e[1]);
}

#[test]
fn shape_embedding_is_permutation_invariant_and_segments_equivariant() {
    let mut m = UvNet::new(tiny(Task::Segmentation, 3), 2).unwrap();
    let g = cylinder();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = m.batch(&[&g], None).unwrap();
    let f = m.forward(&base, false).unwrap();
    let (emb, logits) = (f.tape.value(f.encoded.graphs).clone(), f.tape.value(f.output).clone());
    for _ in 0..10 {
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        rand::seq::SliceRandom::shuffle(&mut perm[..], &mut rng);
        let pg = g.permuted(&perm);
        let f = m.forward(&m.batch(&[&pg], None).unwrap(), false).unwrap();
        assert!(close(f.tape.value(f.encoded.graphs), &emb, 1e-9));
        let out = f.tape.value(f.output);
        for (new, &old) in perm.iter().enumerate() {
            for c in 0..3 {
                assert!((out.at(new, c) - logits.at(old, c)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn surface_cnn_ignores_batch_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let cnn = GridCnn::new(&mut store, &mut rng, "s", 7, [4, 6, 8], 5, true);
    let g = cube();
    let grids: Vec<&[f64]> = g.nodes.iter().map(|n| &n.grid.as_ref().unwrap().data[..]).collect();
    let run = |store: &mut ParamStore, order: &[usize]| {
        let data: Vec<f64> = order.iter().flat_map(|&i| grids[i].iter().copied()).collect();
        let mut s = Session::new(store, false);
        let x = s.input(Tensor::matrix(order.len() * 100, 7, data));
        let y = cnn.forward(&mut s, x, order.len(), 10, 10).unwrap();
        s.tape.value(y).clone()
    };
    let a = run(&mut store, &[0, 1, 2, 3, 4, 5]);
    let b = run(&mut store, &[5, 3, 1, 0, 2, 4]);
    for (row, &face) in [5, 3, 1, 0, 2, 4].iter().enumerate() {
        assert_eq!(b.row(row), a.row(face));
    }
}

fn random_grid(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Tensor {
    Tensor::matrix(m * n, 7, (0..m * n * 7).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn cnn_output(store: &mut ParamStore, cnn: &GridCnn, grid: &Tensor, m: usize, n: usize, orbit: bool) -> Tensor {
    let mut s = Session::new(store, false);
    let x = s.input(grid.clone());
    let y = if orbit { cnn.forward_orbit(&mut s, x, 1, m, n) } else { cnn.forward(&mut s, x, 1, m, n) }.unwrap();
    s.tape.value(y).clone()
}

fn transform(grid: &Tensor, sym: GridSymmetry, m: usize, n: usize) -> Tensor {
    let data = sym.source_order(m, n).iter().flat_map(|&s| grid.row(s).to_vec()).collect();
    Tensor::matrix(m * n, grid.cols(), data)
}

#[test]
fn orbit_pooling_is_invariant_plain_cnn_is_not() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::new();
    let cnn = GridCnn::new(&mut store, &mut rng, "s", 7, [8, 8, 8], 8, true);
    for (m, n) in [(6, 6), (5, 7)] {
        let g = random_grid(&mut rng, m, n);
        let pooled = cnn_output(&mut store, &cnn, &g, m, n, true);
        for sym in GridSymmetry::all() {
            let t = transform(&g, sym, m, n);
            let (tm, tn) = sym.dims(m, n);
            assert!(close(&cnn_output(&mut store, &cnn, &t, tm, tn, true), &pooled, 1e-9));
        }
    }
    let g = random_grid(&mut rng, 6, 6);
    let flipped = transform(&g, GridSymmetry { flip_u: true, ..GridSymmetry::IDENTITY }, 6, 6);
    let a = cnn_output(&mut store, &cnn, &g, 6, 6, false);
    let b = cnn_output(&mut store, &cnn, &flipped, 6, 6, false);
    let diff = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff > 1e-3, "{diff}");
}

#[test]
fn face_only_never_reads_curves() {
    let g = cube();
    let mut face_only = UvNet::new(tiny(Task::Classification, 2).with_variant(Variant::FaceOnly), 0).unwrap();
    let batch = face_only.batch(&[&g], None).unwrap();
    face_only.forward(&batch, true).unwrap();
    assert_eq!(batch.curve_reads(), 0);
    assert!(face_only.store.id("curve_cnn.conv1.conv.weight").is_none());
    let mut full = UvNet::new(tiny(Task::Classification, 2), 0).unwrap();
    full.forward(&batch, true).unwrap();
    assert!(batch.curve_reads() > 0);
}

#[test]
fn topology_only_ignores_geometry() {
    let mut m = UvNet::new(tiny(Task::Classification, 2).with_variant(Variant::TopologyOnly), 0).unwrap();
    let a = cube();
    let b = graph_of(&primitives::box_solid(Vec3::new(10.0, 4.0, 2.0), Vec3::new(-3.0, 1.0, 0.5)));
    let ba = m.batch(&[&a], None).unwrap();
    let bb = m.batch(&[&b], None).unwrap();
    let fa = m.forward(&ba, false).unwrap();
    let fb = m.forward(&bb, false).unwrap();
    assert_eq!(fa.tape.value(fa.output), fb.tape.value(fb.output));
}

#[test]
fn features_only_mlp_matches_gin_parameter_count() {
    let count = |m: &UvNet, prefix: &str| -> usize {
        m.store.entries().iter().filter(|e| e.trainable && e.name.starts_with(prefix) && e.name.ends_with("weight")).map(|e| e.value.len()).sum()
    };
    let full = UvNet::new(ModelConfig::desk(), 0).unwrap();
    let feat = UvNet::new(ModelConfig::desk().with_variant(Variant::FeaturesOnly), 0).unwrap();
    assert_eq!(count(&full, "gin0."), count(&feat, "mlp0."));
}

#[test]
fn xyz_mode_and_channel_errors() {
    let g = cube();
    let mut cfg = tiny(Task::Classification, 2);
    cfg.channels = ChannelMode::Xyz;
    let mut m = UvNet::new(cfg, 0).unwrap();
    let batch = m.batch(&[&g], None).unwrap();
    assert_eq!(batch.surface().cols(), 4);
    m.forward(&batch, false).unwrap();

    let xyz_graph = sample_graph(&primitives::unit_cube(), &SamplingConfig { normals: false, tangents: false, ..Default::default() }).unwrap();
    let mut full = UvNet::new(tiny(Task::Classification, 2), 0).unwrap();
    assert!(matches!(full.batch(&[&xyz_graph], None), Err(Error::Shape(_))));
    assert!(matches!(full.forward(&batch, false), Err(Error::Shape(_))));
}

#[test]
fn config_and_label_errors() {
    assert!(matches!("wings".parse::<Variant>(), Err(Error::Config(_))));
    assert!(ModelConfig::from_json("{\"bogus\": 1}").is_err());
    let cfg = tiny(Task::Classification, 3);
    assert_eq!(ModelConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    let mut m = UvNet::new(cfg, 0).unwrap();
    let g = cube();
    let batch = m.batch(&[&g, &g], None).unwrap();
    assert!(matches!(m.supervised_loss(&batch, &[0], true), Err(Error::Config(_))));
    assert!(matches!(m.supervised_loss(&batch, &[0, 7], true), Err(Error::Label { .. })));
}

#[test]
fn every_parameter_gets_gradient() {
    for task in [Task::Classification, Task::Segmentation, Task::Contrastive] {
        let mut m = UvNet::new(tiny(task, 3), 9).unwrap();
        let (a, b) = (cube(), cylinder());
        let batch = m.batch(&[&a, &b], None).unwrap();
        let (f, loss) = if task == Task::Contrastive {
            let mut f = m.forward(&batch, true).unwrap();
            let sq = f.tape.mul(f.output, f.output).unwrap();
            let l = f.tape.sum(sq);
            (f, l)
        } else {
            let labels: Vec<usize> = if task == Task::Classification { vec![0, 2] } else { (0..batch.node_count()).map(|i| i % 3).collect() };
            m.supervised_loss(&batch, &labels, true).unwrap()
        };
        let grads = f.tape.param_grads(&f.tape.backward(loss).unwrap(), &m.store);
        for id in m.store.trainable_ids() {
            assert!(grads[id].iter().any(|g| g.abs() > 0.0), "{:?}: {}", task, m.store.entry(id).name);
        }
    }
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    for task in [Task::Classification, Task::Segmentation] {
        let mut m = UvNet::new(tiny(task, 3), 10).unwrap();
        let (a, b) = (cube(), cylinder());
        let batch = m.batch(&[&a, &b], None).unwrap();
        let labels: Vec<usize> = if task == Task::Classification { vec![1, 2] } else { (0..batch.node_count()).map(|i| (i * 7) % 3).collect() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let coords = sample_coords(&m.store, 3, &mut rng);
        let config = m.config.clone();
        let encoder = m.encoder.clone();
        let head = m.head.clone();
        let report = grad_check(&mut m.store, &coords, |store| {
            let mut probe = UvNet { config: config.clone(), store: store.clone(), encoder: encoder.clone(), head: head.clone() };
            let (f, l) = probe.supervised_loss(&batch, &labels, true)?;
            Ok((f.tape, l))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{task:?} {report:?}");
    }
}

#[test]
fn input_gradient_matches_finite_differences() {
    let mut m = UvNet::new(tiny(Task::Classification, 2), 12).unwrap();
    let (a, b) = (cube(), cylinder());
    let mut batch = m.batch(&[&a, &b], None).unwrap();
    let loss_of = |m: &mut UvNet, batch: &GraphBatch| {
        let mut f = m.forward(batch, false).unwrap();
        let g = f.tape.sum(f.encoded.graphs);
        (f, g)
    };
    let (f, l) = loss_of(&mut m, &batch);
    let grad = f.tape.backward(l).unwrap().of(f.encoded.surface_input.unwrap(), &f.tape);
    let base = batch.surface().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let i = rng.random_range(0..base.len());
        let mut eval = |delta: f64| {
            let mut t = base.clone();
            t.data[i] += delta;
            batch.set_surface(t).unwrap();
            let (f, l) = loss_of(&mut m, &batch);
            f.tape.value(l).item()
        };
        let numeric = (eval(1e-6) - eval(-1e-6)) / 2e-6;
        assert!(relative_error(grad[i], numeric) < 1e-4, "{} vs {numeric}", grad[i]);
    }
}

#[test]
fn checkpoint_round_trip_reproduces_outputs() {
    let mut m = UvNet::new(tiny(Task::Segmentation, 4), 3).unwrap();
    let g = cylinder();
    let batch = m.batch(&[&g], None).unwrap();
    m.forward(&batch, true).unwrap(); // move the running statistics
    let mut buf = Vec::new();
    m.save(&mut buf).unwrap();
    let mut back = UvNet::load(&mut buf.as_slice()).unwrap();
    assert_eq!(back.config, m.config);
    let fa = m.forward(&batch, false).unwrap();
    let fb = back.forward(&batch, false).unwrap();
    assert_eq!(fa.tape.value(fa.output), fb.tape.value(fb.output));

    let mut other = UvNet::new(tiny(Task::Classification, 4), 0).unwrap();
    assert!(other.load_encoder(&m) > 10);
    assert_eq!(other.store.value(other.store.id("gin1.eps").unwrap()), m.store.value(m.store.id("gin1.eps").unwrap()));
}

#[test]
fn curve_reversal_augmentation_flips_some_links() {
    let m = UvNet::new(tiny(Task::Classification, 2), 0).unwrap();
    let g = cube();
    let plain = m.batch(&[&g], None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let aug = m.batch(&[&g], Some(&mut rng)).unwrap();
    assert_ne!(plain.curve().data, aug.curve().data);
    assert_eq!(plain.link_ends, aug.link_ends);
}
