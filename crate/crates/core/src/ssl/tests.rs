use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::model::ModelConfig;
use crate::nn::{grad_check, sample_coords};
use crate::sampler::{sample_graph, SamplingConfig};
use crate::synth::{gen_dataset, GenConfig, Family};

fn tiny_clr() -> ModelConfig {
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
    .with_task(Task::Contrastive, 0)
}

fn cube() -> FaceAdjacencyGraph {
    sample_graph(&crate::brep::primitives::unit_cube(), &SamplingConfig::with_resolution(4, 4)).unwrap()
}

fn octagon_prism() -> FaceAdjacencyGraph {
    let mut cfg = GenConfig::new(2, 1, vec![Family::Polygon { sides: 8 }]);
    cfg.sampling = SamplingConfig::with_resolution(4, 4);
    gen_dataset(&cfg).unwrap().records.remove(0).graph
}

fn toy(per_class: usize) -> Dataset {
    let mut cfg = GenConfig::four_shapes(5, per_class);
    cfg.sampling = SamplingConfig::with_resolution(4, 4);
    gen_dataset(&cfg).unwrap()
}

#[test]
fn identity_and_cube_patch() {
    let g = cube();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(ViewTransform::Identity.apply(&g, &mut rng).unwrap(), g);
    for _ in 0..10 {
        let p = ViewTransform::ConnectedPatch { hops: 2 }.apply(&g, &mut rng).unwrap();
        assert_eq!((p.node_count(), p.link_count()), (6, 12));
        let p1 = ViewTransform::ConnectedPatch { hops: 1 }.apply(&g, &mut rng).unwrap();
        assert_eq!(p1.node_count(), 5);
    }
}

#[test]
fn drop_nodes_keeps_sixty_percent_on_average() {
    let g = octagon_prism();
    assert_eq!(g.node_count(), 10);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let trials = 1000;
    let total: usize = (0..trials).map(|_| ViewTransform::DropNodes { p: 0.4 }.apply(&g, &mut rng).unwrap().node_count()).sum();
    // 4.9 standard errors of the Binomial(10, 0.6) mean.
    let mean = total as f64 / trials as f64;
    assert!((mean - 6.0).abs() < 0.24, "{mean}");
}

#[test]
fn views_are_nonempty_subgraphs() {
    let g = octagon_prism();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..300 {
        let t = ViewTransform::sample(&mut rng);
        let v = t.apply(&g, &mut rng).unwrap();
        assert!(v.node_count() >= 1 && v.node_count() <= g.node_count());
        assert!(v.link_count() <= g.link_count());
        // Every kept node is an original face, every kept link an original edge.
        assert!(v.nodes.iter().all(|n| g.nodes.iter().any(|m| m.face == n.face)));
        for l in &v.links {
            let faces = [v.nodes[l.ends[0]].face, v.nodes[l.ends[1]].face];
            assert!(g.links.iter().any(|o| o.edge == l.edge && {
                let f = [g.nodes[o.ends[0]].face, g.nodes[o.ends[1]].face];
                f == faces || f == [faces[1], faces[0]]
            }));
        }
    }
    let single = g.induced(&[true, false, false, false, false, false, false, false, false, false]);
    for _ in 0..50 {
        assert_eq!(ViewTransform::DropNodes { p: 0.99 }.apply(&single, &mut rng).unwrap().node_count(), 1);
    }
}

#[test]
fn identity_frequency_of_first_view() {
    let g = cube();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let (mut first, mut second) = (0, 0);
    for _ in 0..n {
        let p = sample_view_pair(&g, &mut rng).unwrap();
        first += (p.transforms[0] == ViewTransform::Identity) as usize;
        second += (p.transforms[1] == ViewTransform::Identity) as usize;
    }
    assert!((first as f64 / n as f64 - 0.1).abs() < 0.01, "{first}");
    assert_eq!(second, 0);
    let a = sample_view_pair(&g, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = sample_view_pair(&g, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!((a.transforms, a.views), (b.transforms, b.views));
}

fn loss_of(rows: &[[f64; 3]], tau: f64) -> Result<f64> {
    let mut t = Tape::new();
    let z = t.leaf(Tensor::matrix(rows.len(), 3, rows.iter().flatten().copied().collect()));
    let l = nt_xent(&mut t, z, tau)?;
    Ok(t.value(l).item())
}

#[test]
fn nt_xent_closed_forms() {
    let same = [[1.0, 2.0, 3.0]; 4];
    assert!((loss_of(&same, 0.5).unwrap() - 3f64.ln()).abs() < 1e-12);
    // Positives identical, the other two rows orthogonal: −ln(e² / (e² + 2)).
    let ortho = [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
    assert!((loss_of(&ortho, 0.5).unwrap() - 0.239_544_766_221_884_5).abs() < 1e-12);
    // Scale of z does not matter.
    let scaled = ortho.map(|r| r.map(|x| 7.0 * x));
    assert!((loss_of(&scaled, 0.5).unwrap() - 0.239_544_766_221_884_5).abs() < 1e-12);
}

#[test]
fn nt_xent_monotone_and_pair_order_invariant() {
    let base = [[1.0, 0.2, 0.0], [0.3, 1.0, 0.1], [0.0, 0.4, 1.0], [0.5, 0.0, 0.8]];
    let mut closer = base;
    closer[1] = [0.9, 0.5, 0.05];
    assert!(loss_of(&closer, 0.5).unwrap() < loss_of(&base, 0.5).unwrap());
    let swapped = [base[2], base[3], base[0], base[1]];
    assert!((loss_of(&swapped, 0.5).unwrap() - loss_of(&base, 0.5).unwrap()).abs() < 1e-12);
    let within = [base[1], base[0], base[3], base[2]];
    assert!((loss_of(&within, 0.5).unwrap() - loss_of(&base, 0.5).unwrap()).abs() < 1e-12);
    assert!(matches!(loss_of(&base[..2], 0.5), Err(Error::Contract(_))));
    assert!(loss_of(&base[..3], 0.5).is_err());
}

#[test]
fn contrastive_loss_gradients() {
    let model = UvNet::new(tiny_clr(), 4).unwrap();
    let (a, b) = (cube(), octagon_prism());
    let batch = model.batch(&[&a, &b, &b, &a], None).unwrap();
    let mut store = model.store.clone();
    let coords = sample_coords(&store, 2, &mut ChaCha8Rng::seed_from_u64(1));
    let mut probe = model.clone();
    let report = grad_check(&mut store, &coords, |s| {
        probe.store = s.clone();
        let mut f = probe.forward(&batch, false)?;
        let l = nt_xent(&mut f.tape, f.output, 0.5)?;
        Ok((f.tape, l))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn projection_head_is_deterministic() {
    let mut m = UvNet::new(tiny_clr(), 8).unwrap();
    let g = cube();
    let batch = m.batch(&[&g], None).unwrap();
    let a = m.forward(&batch, false).unwrap();
    let b = m.forward(&batch, false).unwrap();
    assert_eq!(a.tape.value(a.output), b.tape.value(b.output));
    assert_eq!(a.tape.value(a.output).dims2(), (1, 5));
}

#[test]
fn clr_training_is_deterministic_and_learns() {
    let ds = toy(3);
    let cfg = ClrConfig { epochs: 30, batch_size: 6, lr: 3e-3, seed: 1, ..Default::default() };
    let mut a = UvNet::new(tiny_clr(), 1).unwrap();
    let ha = train_clr(&mut a, &ds, &cfg, |_| Ok(())).unwrap();
    let mut b = UvNet::new(tiny_clr(), 1).unwrap();
    let hb = train_clr(&mut b, &ds, &cfg, |_| Ok(())).unwrap();
    assert_eq!(ha, hb);
    let tail = ha[25..].iter().map(|e| e.loss).sum::<f64>() / 5.0;
    assert!(tail < ha[0].uniform_baseline && tail < ha[0].loss, "{ha:?}");
    let mut c = UvNet::new(tiny_clr(), 1).unwrap();
    let big = ClrConfig { batch_size: 64, ..cfg.clone() };
    assert!(matches!(train_clr(&mut c, &ds, &big, |_| Ok(())), Err(Error::Config(_))));
    let mut wrong = UvNet::new(tiny_clr().with_task(Task::Classification, 4), 1).unwrap();
    assert!(matches!(train_clr(&mut wrong, &ds, &cfg, |_| Ok(())), Err(Error::Config(_))));
}

fn index_of(vectors: Vec<Vec<f64>>) -> EmbeddingIndex {
    let dim = vectors[0].len();
    EmbeddingIndex {
        format_version: EMBEDDING_INDEX_VERSION,
        dim,
        model_hash: String::new(),
        entries: vectors.into_iter().enumerate().map(|(id, vector)| EmbeddingEntry { id, class: 0, vector }).collect(),
    }
}

#[test]
fn retrieval_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vectors: Vec<Vec<f64>> = (0..1000).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let index = index_of(vectors.clone());
    for q in [0, 17, 999] {
        let hits = retrieve(&vectors[q], &index, 10).unwrap();
        assert_eq!((hits[0].id, hits[0].distance), (q, 0.0));
        let mut oracle: Vec<(f64, usize)> = vectors.iter().enumerate().map(|(i, v)| (v.iter().zip(&vectors[q]).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i)).collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        assert_eq!(hits.iter().map(|h| h.id).collect::<Vec<_>>(), oracle[..10].iter().map(|o| o.1).collect::<Vec<_>>());
    }
    let two = index_of(vec![vec![0.0, 0.0], vec![3.0, 0.0]]);
    assert_eq!(retrieve(&[1.0, 0.0], &two, 1).unwrap()[0].id, 0);
    assert_eq!(retrieve(&[1.0, 0.0], &two, 5).unwrap().len(), 2);
    // Exact ties resolve to the lower id.
    let tied = index_of(vec![vec![1.0], vec![-1.0]]);
    assert_eq!(retrieve(&[0.0], &tied, 1).unwrap()[0].id, 0);
    assert!(retrieve(&[0.0, 0.0, 0.0], &two, 1).is_err());
}

#[test]
fn embedding_index_round_trip() {
    let ds = toy(1);
    let mut m = UvNet::new(tiny_clr(), 2).unwrap();
    let index = EmbeddingIndex::build(&mut m, &ds, 3).unwrap();
    assert_eq!(index.entries.len(), 4);
    assert!(index.entries.iter().all(|e| e.vector.len() == 12));
    let path = std::env::temp_dir().join(format!("uvnet-index-{}.json", std::process::id()));
    index.save(&path).unwrap();
    assert_eq!(EmbeddingIndex::load(&path).unwrap(), index);
    std::fs::remove_file(&path).unwrap();
    let hits = retrieve(index.vector(2).unwrap(), &index, 1).unwrap();
    assert_eq!(hits[0].id, 2);
}

#[test]
fn ami_matches_reference_values() {
    // Values from scikit-learn's adjusted_mutual_info_score (arithmetic mean).
    let cases: [(&[usize], &[usize], f64); 4] = [
        (&[0, 0, 0, 0, 0, 0, 0, 1, 1, 1], &[0, 0, 0, 0, 0, 0, 1, 1, 1, 1], 0.555_222_558_132_565_9),
        (&[0, 0, 1, 1], &[0, 1, 0, 1], -0.499_999_999_999_999_44),
        (&[0, 0, 0, 1, 1, 1, 2, 2], &[1, 1, 0, 0, 0, 2, 2, 2], 0.319_672_650_569_646_94),
        (&[0, 1, 2, 0, 1, 2, 0, 1, 2, 3], &[0, 0, 1, 1, 2, 2, 3, 3, 0, 1], -0.291_897_469_969_174_76),
    ];
    for (t, p, want) in cases {
        let got = adjusted_mutual_info(t, p).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
    assert!((adjusted_mutual_info(&[0, 0, 1, 1, 2], &[5, 5, 3, 3, 9]).unwrap() - 1.0).abs() < 1e-12);
    assert!(adjusted_mutual_info(&[1, 1, 1], &[0, 1, 2]).is_err());
}

fn blobs(seed: u64, per: usize, spread: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).unwrap();
    let centres = [[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..per {
            x.push(centre.iter().map(|v| v + noise.sample(&mut rng)).collect());
            y.push(c);
        }
    }
    (x, y)
}

#[test]
fn separated_blobs_are_recovered() {
    let (x, y) = blobs(5, 40, 0.5);
    let km = kmeans(&x, 4, KMEANS_RESTARTS, 0).unwrap();
    assert!(adjusted_mutual_info(&y, &km.assignment).unwrap() > 0.99);
    let report = evaluate_embeddings(&x, &y, 4, 0).unwrap();
    assert!(report.ami > 0.99 && report.probe_accuracy > 0.99, "{report:?}");
    assert!(kmeans(&x, 0, 1, 0).is_err());
}

#[test]
fn random_labels_have_ami_near_zero() {
    let (x, _) = blobs(6, 50, 0.5);
    let km = kmeans(&x, 4, KMEANS_RESTARTS, 1).unwrap();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let random: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..4)).collect();
        let ami = adjusted_mutual_info(&random, &km.assignment).unwrap();
        assert!(ami.abs() < 0.05, "seed {seed}: {ami}");
    }
}
