//! The UV-Net model: grid CNNs, edge-conditioned message passing, max-pool
//! readout, task heads and ablation variants.

mod batch;
mod config;
mod encoder;
mod orbit;

use std::io::{Read, Write};
use std::path::Path;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use batch::GraphBatch;
pub use config::{ChannelMode, ModelConfig, Task, Variant};
pub use encoder::{Encoded, Encoder, GridCnn};
pub use orbit::{grid_symmetry_orbit, GridSymmetry};

use crate::error::{Error, Result};
use crate::nn::{read_checkpoint, write_checkpoint, FcBlock, Linear, ParamStore, Session, Tape, Var};

#[derive(Clone, Debug)]
enum Head {
    /// Shape embedding → FC block → class logits.
    Classifier { hidden: FcBlock, out: Linear },
    /// `[shape embedding, node embedding]` per node → FC block → face logits.
    Segmenter { hidden: FcBlock, out: Linear },
    /// Three linear layers with ReLU in between.
    Projection { l1: Linear, l2: Linear, l3: Linear },
}

impl Head {
    fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> Self {
        let (g, d) = (cfg.graph_dim, cfg.embed_dim);
        match cfg.task {
            Task::Classification => Self::Classifier {
                hidden: FcBlock::new(store, rng, "head.hidden", g, cfg.head_hidden),
                out: Linear::new(store, rng, "head.out", cfg.head_hidden, cfg.num_classes, true),
            },
            Task::Segmentation => Self::Segmenter {
                hidden: FcBlock::new(store, rng, "head.hidden", g + d, cfg.head_hidden),
                out: Linear::new(store, rng, "head.out", cfg.head_hidden, cfg.num_classes, true),
            },
            Task::Contrastive => Self::Projection {
                l1: Linear::new(store, rng, "proj.0", g, g, true),
                l2: Linear::new(store, rng, "proj.1", g, g, true),
                l3: Linear::new(store, rng, "proj.2", g, cfg.projection_dim, true),
            },
        }
    }

    fn forward(&self, s: &mut Session, batch: &GraphBatch, enc: &Encoded) -> Result<Var> {
        match self {
            Self::Classifier { hidden, out } => {
                let y = hidden.forward(s, enc.graphs)?;
                out.forward(s, y)
            }
            Self::Segmenter { hidden, out } => {
                let per_node = s.tape.gather_rows(enc.graphs, Rc::new(batch.node_graph.clone()))?;
                let cat = s.tape.concat_cols(per_node, enc.nodes)?;
                let y = hidden.forward(s, cat)?;
                out.forward(s, y)
            }
            Self::Projection { l1, l2, l3 } => {
                let y = l1.forward(s, enc.graphs)?;
                let y = s.tape.relu(y);
                let y = l2.forward(s, y)?;
                let y = s.tape.relu(y);
                l3.forward(s, y)
            }
        }
    }
}

/// A finished forward pass: the tape plus the handles into it.
pub struct Forward {
    pub tape: Tape,
    pub encoded: Encoded,
    /// Class logits per graph, face logits per node, or projections per graph.
    pub output: Var,
}

/// Encoder, task head and their parameters.
#[derive(Clone, Debug)]
pub struct UvNet {
    pub config: ModelConfig,
    pub store: ParamStore,
    encoder: Encoder,
    head: Head,
}

impl UvNet {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, &mut rng, &config);
        let head = Head::new(&mut store, &mut rng, &config);
        Ok(Self { config, store, encoder, head })
    }

    pub fn parameter_count(&self) -> usize {
        self.store.trainable_count()
    }

    pub fn batch(&self, graphs: &[&crate::brep::FaceAdjacencyGraph], reverse: Option<&mut ChaCha8Rng>) -> Result<GraphBatch> {
        GraphBatch::new(graphs, self.config.channels, reverse)
    }

    pub fn forward(&mut self, batch: &GraphBatch, train: bool) -> Result<Forward> {
        if batch.channels != self.config.channels {
            return Err(Error::Shape(format!("batch channels {:?}, model expects {:?}", batch.channels, self.config.channels)));
        }
        let mut s = Session::new(&mut self.store, train);
        let encoded = self.encoder.forward(&mut s, batch)?;
        let output = self.head.forward(&mut s, batch, &encoded)?;
        Ok(Forward { tape: s.tape, encoded, output })
    }

    /// Mean cross-entropy over graphs (classification) or nodes (segmentation).
    pub fn supervised_loss(&mut self, batch: &GraphBatch, labels: &[usize], train: bool) -> Result<(Forward, Var)> {
        let expected = match self.config.task {
            Task::Classification => batch.graph_count,
            Task::Segmentation => batch.node_count(),
            Task::Contrastive => return Err(Error::Config("contrastive models have no supervised loss".into())),
        };
        if labels.len() != expected {
            return Err(Error::Config(format!("{} labels for {expected} targets", labels.len())));
        }
        let mut f = self.forward(batch, train)?;
        let loss = f.tape.cross_entropy(f.output, labels)?;
        Ok((f, loss))
    }

    /// Class predictions (argmax of the output rows) in evaluation mode.
    pub fn predict(&mut self, batch: &GraphBatch) -> Result<Vec<usize>> {
        let f = self.forward(batch, false)?;
        Ok(argmax_rows(f.tape.value(f.output)))
    }

    /// Shape embeddings `[graphs, graph_dim]` in evaluation mode.
    pub fn embed(&mut self, batch: &GraphBatch) -> Result<Vec<Vec<f64>>> {
        let f = self.forward(batch, false)?;
        let t = f.tape.value(f.encoded.graphs);
        Ok((0..t.rows()).map(|r| t.row(r).to_vec()).collect())
    }

    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        write_checkpoint(w, &self.store, &serde_json::to_string(&self.config)?)
    }

    pub fn load(r: &mut impl Read) -> Result<Self> {
        let (store, meta) = read_checkpoint(r)?;
        let config = ModelConfig::from_json(&meta)?;
        let mut model = Self::new(config, 0)?;
        if store.len() != model.store.len() || model.store.load_matching(&store) != store.len() {
            return Err(Error::Format("checkpoint tensors do not match the configured model".into()));
        }
        Ok(model)
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Copies every encoder tensor of `other` (e.g. a contrastively trained
    /// model) into this one; returns how many tensors were copied.
    pub fn load_encoder(&mut self, other: &UvNet) -> usize {
        let mut head_free = other.store.clone();
        head_free.retain(|name| !name.starts_with("head.") && !name.starts_with("proj."));
        self.store.load_matching(&head_free)
    }
}

pub fn argmax_rows(t: &crate::nn::Tensor) -> Vec<usize> {
    (0..t.rows())
        .map(|r| {
            let row = t.row(r);
            (0..row.len()).fold(0, |best, i| if row[i] > row[best] { i } else { best })
        })
        .collect()
}

#[cfg(test)]
mod tests;
