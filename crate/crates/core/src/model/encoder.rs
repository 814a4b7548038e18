use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::batch::GraphBatch;
use super::config::{ModelConfig, Variant};
use super::orbit::GridSymmetry;
use crate::error::{Error, Result};
use crate::nn::{ConvBlock, FcBlock, Linear, ParamStore, Session, Tensor, Var};

/// Three same-padded convolutions, global mean pooling and a projection to
/// the embedding width. Serves surfaces (3×3 kernels) and curves (3×1).
#[derive(Clone, Debug)]
pub struct GridCnn {
    convs: [ConvBlock; 3],
    fc: FcBlock,
    pub cin: usize,
    kw: usize,
}

impl GridCnn {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, cin: usize, widths: [usize; 3], out: usize, two_d: bool) -> Self {
        let kw = if two_d { 3 } else { 1 };
        let c0 = ConvBlock::new(store, rng, &format!("{name}.conv1"), cin, widths[0], 3, kw);
        let c1 = ConvBlock::new(store, rng, &format!("{name}.conv2"), widths[0], widths[1], 3, kw);
        let c2 = ConvBlock::new(store, rng, &format!("{name}.conv3"), widths[1], widths[2], 3, kw);
        let fc = FcBlock::new(store, rng, &format!("{name}.fc"), widths[2], out);
        Self { convs: [c0, c1, c2], fc, cin, kw }
    }

    /// `x` holds `batch` grids of `h × w` rows; returns `[batch, out]`.
    pub fn forward(&self, s: &mut Session, x: Var, batch: usize, h: usize, w: usize) -> Result<Var> {
        let cols = s.tape.value(x).cols();
        if cols != self.cin {
            return Err(Error::Shape(format!("grid has {cols} channels, network expects {}", self.cin)));
        }
        if self.kw == 1 && w != 1 {
            return Err(Error::Shape("curve grids have width 1".into()));
        }
        let mut y = x;
        for c in &self.convs {
            y = c.forward(s, y, batch, h, w)?;
        }
        let pooled = s.tape.mean_blocks(y, h * w)?;
        self.fc.forward(s, pooled)
    }

    /// Elementwise max of [`Self::forward`] over the 8 layout symmetries of
    /// every grid.
    pub fn forward_orbit(&self, s: &mut Session, x: Var, batch: usize, m: usize, n: usize) -> Result<Var> {
        let syms = GridSymmetry::all();
        let mut pieces = Vec::new();
        // Square grids share one conv pass; otherwise the transposed half runs separately.
        let groups: Vec<&[GridSymmetry]> = if m == n { vec![&syms[..]] } else { vec![&syms[..4], &syms[4..]] };
        for group in groups {
            let mut idx = Vec::with_capacity(group.len() * batch * m * n);
            for sym in group {
                let order = sym.source_order(m, n);
                for b in 0..batch {
                    idx.extend(order.iter().map(|&o| b * m * n + o));
                }
            }
            let (h, w) = group[0].dims(m, n);
            let gathered = s.tape.gather_rows(x, Rc::new(idx))?;
            pieces.push(self.forward(s, gathered, group.len() * batch, h, w)?);
        }
        let stacked = match pieces[..] {
            [one] => one,
            [a, b] => concat_rows(s, a, b)?,
            _ => unreachable!(),
        };
        let seg: Vec<usize> = (0..8).flat_map(|_| 0..batch).collect();
        s.tape.segment_max(stacked, &seg, batch)
    }
}

/// Stacks the rows of `a` above those of `b`.
pub(crate) fn concat_rows(s: &mut Session, a: Var, b: Var) -> Result<Var> {
    let (ra, rb) = (s.tape.value(a).rows(), s.tape.value(b).rows());
    let n = ra + rb;
    let top = s.tape.scatter_add_rows(a, Rc::new((0..ra).collect()), n)?;
    let bottom = s.tape.scatter_add_rows(b, Rc::new((ra..n).collect()), n)?;
    s.tape.add(top, bottom)
}

/// Two FC blocks: the φ / ψ update networks.
#[derive(Clone, Debug)]
struct Mlp2 {
    a: FcBlock,
    b: FcBlock,
}

impl Mlp2 {
    fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d: usize, hidden: usize) -> Self {
        Self { a: FcBlock::new(store, rng, &format!("{name}.0"), d, hidden), b: FcBlock::new(store, rng, &format!("{name}.1"), hidden, d) }
    }

    fn forward(&self, s: &mut Session, x: Var) -> Result<Var> {
        let y = self.a.forward(s, x)?;
        self.b.forward(s, y)
    }
}

/// Index arrays for message passing over a batch, both directions of every link.
pub(crate) struct Adjacency {
    src: Rc<Vec<usize>>,
    dst: Rc<Vec<usize>>,
    link2: Rc<Vec<usize>>,
    end_a: Rc<Vec<usize>>,
    end_b: Rc<Vec<usize>>,
    nodes: usize,
}

impl Adjacency {
    pub(crate) fn of(batch: &GraphBatch) -> Self {
        let a: Vec<usize> = batch.link_ends.iter().map(|e| e[0]).collect();
        let b: Vec<usize> = batch.link_ends.iter().map(|e| e[1]).collect();
        let l = a.len();
        Self {
            src: Rc::new(a.iter().chain(&b).copied().collect()),
            dst: Rc::new(b.iter().chain(&a).copied().collect()),
            link2: Rc::new((0..l).chain(0..l).collect()),
            end_a: Rc::new(a),
            end_b: Rc::new(b),
            nodes: batch.node_count(),
        }
    }

    fn links(&self) -> usize {
        self.end_a.len()
    }
}

/// One round of edge-conditioned message passing.
#[derive(Clone, Debug)]
struct GinLayer {
    eps: usize,
    phi: Mlp2,
    /// Edge gating and edge update (absent in the face-only variant).
    edge: Option<EdgePart>,
}

#[derive(Clone, Debug)]
struct EdgePart {
    f_theta: Linear,
    /// Absent in the last layer, whose edge output nothing consumes.
    update: Option<EdgeUpdate>,
}

#[derive(Clone, Debug)]
struct EdgeUpdate {
    f_xi: Linear,
    gamma: usize,
    psi: Mlp2,
}

impl GinLayer {
    fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d: usize, with_edges: bool, update_edges: bool) -> Self {
        let eps = store.add(format!("{name}.eps"), Tensor::scalar(0.0), true);
        let phi = Mlp2::new(store, rng, &format!("{name}.phi"), d, d);
        let edge = with_edges.then(|| EdgePart {
            f_theta: Linear::new(store, rng, &format!("{name}.f_theta"), d, d, false),
            update: update_edges.then(|| EdgeUpdate {
                f_xi: Linear::new(store, rng, &format!("{name}.f_xi"), d, d, false),
                gamma: store.add(format!("{name}.gamma"), Tensor::scalar(0.0), true),
                psi: Mlp2::new(store, rng, &format!("{name}.psi"), d, d),
            }),
        });
        Self { eps, phi, edge }
    }

    /// Node update then edge update, both reading the incoming features.
    fn forward(&self, s: &mut Session, adj: &Adjacency, h: Var, e: Option<Var>) -> Result<(Var, Option<Var>)> {
        let eps = s.param(self.eps);
        let mut pre = s.tape.one_plus_scale(h, eps)?;
        if adj.links() > 0 {
            let neighbours = s.tape.gather_rows(h, adj.src.clone())?;
            let msg = match (&self.edge, e) {
                (Some(part), Some(e)) => {
                    let gate = part.f_theta.forward(s, e)?;
                    let gate = s.tape.gather_rows(gate, adj.link2.clone())?;
                    s.tape.mul(gate, neighbours)?
                }
                _ => neighbours,
            };
            let agg = s.tape.scatter_add_rows(msg, adj.dst.clone(), adj.nodes)?;
            pre = s.tape.add(pre, agg)?;
        }
        let h_next = self.phi.forward(s, pre)?;
        let e_next = match (self.edge.as_ref().and_then(|p| p.update.as_ref()), e) {
            (Some(part), Some(e)) if adj.links() > 0 => {
                let ha = s.tape.gather_rows(h, adj.end_a.clone())?;
                let hb = s.tape.gather_rows(h, adj.end_b.clone())?;
                let ends = s.tape.add(ha, hb)?;
                let x = part.f_xi.forward(s, ends)?;
                let gamma = s.param(part.gamma);
                let own = s.tape.one_plus_scale(e, gamma)?;
                let pre_e = s.tape.add(own, x)?;
                Some(part.psi.forward(s, pre_e)?)
            }
            (None, _) => None,
            (_, e) => e,
        };
        Ok((h_next, e_next))
    }
}

#[derive(Clone, Debug)]
enum Propagation {
    Gin(Vec<GinLayer>),
    /// Features-only ablation: per-node MLPs, no neighbourhood.
    Mlp(Vec<Mlp2>),
}

/// Result of encoding a batch.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    /// Final-layer node embeddings `[nodes, embed_dim]`.
    pub nodes: Var,
    /// Shape embeddings `[graphs, graph_dim]`.
    pub graphs: Var,
    /// Stacked surface input (absent for the topology-only variant).
    pub surface_input: Option<Var>,
    pub curve_input: Option<Var>,
}

/// Grid CNNs, message passing and hierarchical max-pool readout.
#[derive(Clone, Debug)]
pub struct Encoder {
    surface: Option<GridCnn>,
    curve: Option<GridCnn>,
    propagation: Propagation,
    readout: Vec<Linear>,
    variant: Variant,
    orbit: bool,
    embed_dim: usize,
    noise_seed: u64,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> Self {
        let d = cfg.embed_dim;
        let geometric = cfg.variant != Variant::TopologyOnly;
        let surface = geometric.then(|| GridCnn::new(store, rng, "surface_cnn", cfg.channels.surface_channels(), cfg.surface_widths, d, true));
        let curve = cfg.uses_curves().then(|| GridCnn::new(store, rng, "curve_cnn", cfg.channels.curve_channels(), cfg.curve_widths, d, false));
        let propagation = match cfg.variant {
            Variant::FeaturesOnly => {
                Propagation::Mlp((0..cfg.graph_layers).map(|k| Mlp2::new(store, rng, &format!("mlp{k}"), d, cfg.mlp_hidden)).collect())
            }
            v => {
                let edges = matches!(v, Variant::Full | Variant::TopologyOnly);
                let last = cfg.graph_layers - 1;
                Propagation::Gin((0..cfg.graph_layers).map(|k| GinLayer::new(store, rng, &format!("gin{k}"), d, edges, edges && k < last)).collect())
            }
        };
        let readout = (0..cfg.graph_layers).map(|k| Linear::new(store, rng, &format!("readout{k}"), d, cfg.graph_dim, true)).collect();
        Self { surface, curve, propagation, readout, variant: cfg.variant, orbit: cfg.orbit_pooling, embed_dim: d, noise_seed: cfg.noise_seed }
    }

    /// Standard normal features, fixed per (seed, kind, index within graph).
    fn noise(&self, locals: &[usize], kind: u64) -> Tensor {
        let d = self.embed_dim;
        let mut data = Vec::with_capacity(locals.len() * d);
        for &i in locals {
            let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
            rng.set_stream((kind << 32) | i as u64);
            data.extend((0..d).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
        }
        Tensor::matrix(locals.len(), d, data)
    }

    pub fn forward(&self, s: &mut Session, batch: &GraphBatch) -> Result<Encoded> {
        let (m, n) = batch.surface_dims;
        let (mut surface_input, mut curve_input) = (None, None);
        let (mut h, mut e) = match self.variant {
            Variant::TopologyOnly => {
                let h = s.input(self.noise(&batch.node_local, 0));
                let e = (batch.link_count() > 0).then(|| s.input(self.noise(&batch.link_local, 1)));
                (h, e)
            }
            _ => {
                let cnn = self.surface.as_ref().expect("geometric variants have a surface CNN");
                let x = s.input(batch.surface().clone());
                surface_input = Some(x);
                let h = if self.orbit {
                    cnn.forward_orbit(s, x, batch.node_count(), m, n)?
                } else {
                    cnn.forward(s, x, batch.node_count(), m, n)?
                };
                let e = match &self.curve {
                    Some(cnn) if batch.link_count() > 0 => {
                        let x = s.input(batch.curve().clone());
                        curve_input = Some(x);
                        Some(cnn.forward(s, x, batch.link_count(), batch.curve_len, 1)?)
                    }
                    _ => None,
                };
                (h, e)
            }
        };
        let adj = Adjacency::of(batch);
        let mut graphs: Option<Var> = None;
        let layers = self.readout.len();
        for k in 0..layers {
            (h, e) = match &self.propagation {
                Propagation::Gin(l) => l[k].forward(s, &adj, h, e)?,
                Propagation::Mlp(l) => (l[k].forward(s, h)?, e),
            };
            let pooled = s.tape.segment_max(h, &batch.node_graph, batch.graph_count)?;
            let proj = self.readout[k].forward(s, pooled)?;
            graphs = Some(match graphs {
                Some(g) => s.tape.add(g, proj)?,
                None => proj,
            });
        }
        Ok(Encoded { nodes: h, graphs: graphs.expect("at least one layer"), surface_input, curve_input })
    }
}
