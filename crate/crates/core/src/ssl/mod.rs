//! Contrastive self-supervision: graph view transforms, NT-Xent, the
//! contrastive trainer, nearest-neighbour retrieval and embedding quality.

mod eval;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use eval::{adjusted_mutual_info, evaluate_embeddings, kmeans, linear_probe, EvalReport, KMeans, KMEANS_RESTARTS};

use crate::brep::FaceAdjacencyGraph;
use crate::dataset::{config_hash, Dataset};
use crate::error::{Error, Result};
use crate::model::{Task, UvNet};
use crate::nn::{Adam, Tape, Tensor, Var};

pub const DEFAULT_DROP_PROB: f64 = 0.4;
pub const IDENTITY_PROB: f64 = 0.1;
pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const EMBEDDING_INDEX_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewTransform {
    Identity,
    /// A random seed face and everything within `hops` links of it.
    ConnectedPatch { hops: usize },
    DropNodes { p: f64 },
    DropEdges { p: f64 },
}

impl ViewTransform {
    /// One of the three non-identity transforms, uniformly; patches use 1 or 2 hops.
    pub fn sample(rng: &mut impl Rng) -> Self {
        match rng.random_range(0..3) {
            0 => Self::ConnectedPatch { hops: rng.random_range(1..=2) },
            1 => Self::DropNodes { p: DEFAULT_DROP_PROB },
            _ => Self::DropEdges { p: DEFAULT_DROP_PROB },
        }
    }

    pub fn apply(&self, g: &FaceAdjacencyGraph, rng: &mut impl Rng) -> Result<FaceAdjacencyGraph> {
        apply_transform(g, self, rng)
    }
}

pub fn apply_transform(g: &FaceAdjacencyGraph, t: &ViewTransform, rng: &mut impl Rng) -> Result<FaceAdjacencyGraph> {
    if g.node_count() == 0 {
        return Err(Error::Contract("cannot transform an empty graph".into()));
    }
    Ok(match *t {
        ViewTransform::Identity => g.clone(),
        ViewTransform::ConnectedPatch { hops } => g.n_hop_subgraph(rng.random_range(0..g.node_count()), hops),
        ViewTransform::DropNodes { p } => loop {
            let keep: Vec<bool> = (0..g.node_count()).map(|_| !rng.random_bool(p)).collect();
            if keep.iter().any(|&k| k) {
                break g.induced(&keep);
            }
        },
        ViewTransform::DropEdges { p } => {
            let keep: Vec<bool> = (0..g.link_count()).map(|_| !rng.random_bool(p)).collect();
            g.with_links(&keep)
        }
    })
}

/// Two augmented views of one graph.
#[derive(Clone, Debug)]
pub struct ViewPair {
    pub transforms: [ViewTransform; 2],
    pub views: [FaceAdjacencyGraph; 2],
}

/// Samples `T1, T2` independently; `T1` is replaced by the identity with
/// probability [`IDENTITY_PROB`].
pub fn sample_view_pair(g: &FaceAdjacencyGraph, rng: &mut impl Rng) -> Result<ViewPair> {
    let t1 = ViewTransform::sample(rng);
    let t2 = ViewTransform::sample(rng);
    let t1 = if rng.random_bool(IDENTITY_PROB) { ViewTransform::Identity } else { t1 };
    let first = t1.apply(g, rng)?;
    let second = t2.apply(g, rng)?;
    Ok(ViewPair { transforms: [t1, t2], views: [first, second] })
}

/// NT-Xent over `2N` rows of `z`, where rows `2i` and `2i+1` are a positive
/// pair. Rows are L2-normalized; each anchor's softmax runs over the other
/// `2N − 1` rows.
pub fn nt_xent(tape: &mut Tape, z: Var, tau: f64) -> Result<Var> {
    let (rows, _) = tape.value(z).dims2();
    if rows % 2 != 0 || rows < 4 {
        return Err(Error::Contract(format!("NT-Xent needs 2N rows with N >= 2, got {rows}")));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature {tau} must be positive")));
    }
    let zn = tape.row_normalize(z);
    let sim = tape.matmul_t(zn, zn, false, true)?;
    let sim = tape.scale(sim, 1.0 / tau);
    let mut mask = Tensor::zeros(vec![rows, rows]);
    for i in 0..rows {
        mask.data[i * rows + i] = -1e30;
    }
    let logits = tape.add_const(sim, &mask)?;
    let positives: Vec<usize> = (0..rows).map(|i| i ^ 1).collect();
    tape.cross_entropy(logits, &positives)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClrConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub temperature: f64,
}

impl Default for ClrConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 32, lr: 1e-3, seed: 0, temperature: DEFAULT_TEMPERATURE }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClrEpoch {
    pub epoch: usize,
    pub loss: f64,
    /// `ln(2N − 1)`: the loss of a model that cannot tell views apart.
    pub uniform_baseline: f64,
}

fn views_for(ds: &Dataset, positions: &[usize], seed: u64, salt: u64) -> Result<Vec<FaceAdjacencyGraph>> {
    let mut out = Vec::with_capacity(2 * positions.len());
    for &i in positions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(i as u64);
        let pair = sample_view_pair(&ds.records[i].graph, &mut rng)?;
        let [a, b] = pair.views;
        out.push(a);
        out.push(b);
    }
    Ok(out)
}

/// Trains encoder and projection head on NT-Xent. Views are a pure function
/// of (seed, epoch, record), so runs replay exactly.
pub fn train_clr(model: &mut UvNet, ds: &Dataset, cfg: &ClrConfig, mut on_epoch: impl FnMut(&ClrEpoch) -> Result<()>) -> Result<Vec<ClrEpoch>> {
    if model.config.task != Task::Contrastive {
        return Err(Error::Config("contrastive training needs a model built for the contrastive task".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size < 2 || !(cfg.lr > 0.0) {
        return Err(Error::Config("epochs must be positive, batch size at least 2, lr positive".into()));
    }
    if ds.len() < cfg.batch_size {
        return Err(Error::Config(format!("dataset of {} records is smaller than the batch size {}", ds.len(), cfg.batch_size)));
    }
    let mut adam = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut baseline_sum, mut steps) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size).filter(|c| c.len() >= 2) {
            let views = views_for(ds, chunk, cfg.seed, epoch as u64)?;
            let refs: Vec<&FaceAdjacencyGraph> = views.iter().collect();
            let batch = model.batch(&refs, None)?;
            let mut f = model.forward(&batch, true)?;
            let loss = nt_xent(&mut f.tape, f.output, cfg.temperature)?;
            let grads = f.tape.param_grads(&f.tape.backward(loss)?, &model.store);
            adam.step(&mut model.store, &grads);
            loss_sum += f.tape.value(loss).item();
            baseline_sum += ((2 * chunk.len() - 1) as f64).ln();
            steps += 1;
        }
        let e = ClrEpoch { epoch, loss: loss_sum / steps as f64, uniform_baseline: baseline_sum / steps as f64 };
        log::info!("clr epoch {epoch}: loss {:.4} (uniform {:.4})", e.loss, e.uniform_baseline);
        on_epoch(&e)?;
        history.push(e);
    }
    Ok(history)
}

/// Mean cosine similarity of projected positive pairs and of all other
/// (negative) pairs, over fresh views drawn with `seed`.
pub fn pair_cosines(model: &mut UvNet, ds: &Dataset, batch_size: usize, seed: u64) -> Result<(f64, f64)> {
    let positions: Vec<usize> = (0..ds.len()).collect();
    let (mut pos, mut npos, mut neg, mut nneg) = (0.0, 0usize, 0.0, 0usize);
    for chunk in positions.chunks(batch_size.max(2)) {
        let views = views_for(ds, chunk, seed, u64::MAX)?;
        let refs: Vec<&FaceAdjacencyGraph> = views.iter().collect();
        let batch = model.batch(&refs, None)?;
        let f = model.forward(&batch, false)?;
        let z = f.tape.value(f.output);
        let unit: Vec<Vec<f64>> = (0..z.rows()).map(|r| normalized(z.row(r))).collect();
        for i in 0..unit.len() {
            for j in i + 1..unit.len() {
                let c: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
                if j == (i ^ 1) {
                    pos += c;
                    npos += 1;
                } else {
                    neg += c;
                    nneg += 1;
                }
            }
        }
    }
    Ok((pos / npos.max(1) as f64, neg / nneg.max(1) as f64))
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter().map(|x| x / n).collect()
}

/// Versioned table of shape embeddings keyed by record id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingIndex {
    pub format_version: u32,
    pub dim: usize,
    pub model_hash: String,
    pub entries: Vec<EmbeddingEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub id: usize,
    pub class: usize,
    pub vector: Vec<f64>,
}

impl EmbeddingIndex {
    /// Embeds every record of `ds` with the model's encoder (evaluation mode).
    pub fn build(model: &mut UvNet, ds: &Dataset, batch_size: usize) -> Result<Self> {
        let mut entries = Vec::with_capacity(ds.len());
        for chunk in ds.records.chunks(batch_size.max(1)) {
            let graphs: Vec<&FaceAdjacencyGraph> = chunk.iter().map(|r| &r.graph).collect();
            let batch = model.batch(&graphs, None)?;
            for (r, vector) in chunk.iter().zip(model.embed(&batch)?) {
                entries.push(EmbeddingEntry { id: r.id, class: r.class, vector });
            }
        }
        let model_hash = config_hash(&serde_json::to_value(&model.config)?);
        Ok(Self { format_version: EMBEDDING_INDEX_VERSION, dim: model.config.graph_dim, model_hash, entries })
    }

    pub fn vector(&self, id: usize) -> Option<&[f64]> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.vector.as_slice())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let idx: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if idx.format_version != EMBEDDING_INDEX_VERSION {
            return Err(Error::Format(format!("embedding index version {} unsupported", idx.format_version)));
        }
        if idx.entries.iter().any(|e| e.vector.len() != idx.dim) {
            return Err(Error::Format("embedding dimension mismatch".into()));
        }
        Ok(idx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: usize,
    pub distance: f64,
}

/// The `k` nearest entries by Euclidean distance, ties broken by id.
/// `k` larger than the index is clamped.
pub fn retrieve(query: &[f64], index: &EmbeddingIndex, k: usize) -> Result<Vec<Hit>> {
    if query.len() != index.dim {
        return Err(Error::Shape(format!("query has {} dims, index {}", query.len(), index.dim)));
    }
    if k > index.entries.len() {
        log::warn!("k = {k} exceeds index size {}; clamping", index.entries.len());
    }
    let mut hits: Vec<Hit> = index
        .entries
        .iter()
        .map(|e| Hit { id: e.id, distance: e.vector.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() })
        .collect();
    hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    hits.truncate(k);
    Ok(hits)
}

#[cfg(test)]
mod tests;
