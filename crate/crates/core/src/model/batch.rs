use std::cell::Cell;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ChannelMode;
use crate::brep::FaceAdjacencyGraph;
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Several graphs concatenated into one disconnected supergraph, with their
/// grids stacked as NHWC rows ready for the CNNs.
#[derive(Debug)]
pub struct GraphBatch {
    pub graph_count: usize,
    /// Graph index of every node.
    pub node_graph: Vec<usize>,
    /// Index of every node within its own graph.
    pub node_local: Vec<usize>,
    /// First node of every graph, plus the total at the end.
    pub node_offsets: Vec<usize>,
    /// Global node indices of every link's endpoints.
    pub link_ends: Vec<[usize; 2]>,
    pub link_local: Vec<usize>,
    pub surface_dims: (usize, usize),
    pub curve_len: usize,
    pub channels: ChannelMode,
    surface: Tensor,
    curve: Tensor,
    curve_reads: Cell<usize>,
}

impl GraphBatch {
    /// Stacks the graphs in order. Every node needs a surface grid and every
    /// link a curve grid, all of one resolution; grids carrying normals or
    /// tangents are reduced when `channels` is [`ChannelMode::Xyz`].
    /// With `reverse`, each link's grid is reversed with probability ½.
    pub fn new(graphs: &[&FaceAdjacencyGraph], channels: ChannelMode, mut reverse: Option<&mut ChaCha8Rng>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let sc = channels.surface_channels();
        let cc = channels.curve_channels();
        let mut b = Self {
            graph_count: graphs.len(),
            node_graph: Vec::new(),
            node_local: Vec::new(),
            node_offsets: vec![0],
            link_ends: Vec::new(),
            link_local: Vec::new(),
            surface_dims: (0, 0),
            curve_len: 0,
            channels,
            surface: Tensor::zeros(vec![0, sc]),
            curve: Tensor::zeros(vec![0, cc]),
            curve_reads: Cell::new(0),
        };
        let mut sdata = Vec::new();
        let mut cdata = Vec::new();
        for (gi, g) in graphs.iter().enumerate() {
            if g.nodes.is_empty() {
                return Err(Error::Contract(format!("graph {gi} has no nodes")));
            }
            let base = b.node_graph.len();
            for (li, node) in g.nodes.iter().enumerate() {
                let grid = node.grid.as_ref().ok_or_else(|| Error::Contract(format!("graph {gi} node {li} has no surface grid")))?;
                let grid = match (grid.channels, sc) {
                    (c, s) if c == s => grid.clone(),
                    (7, 4) => grid.xyz_only(),
                    (c, s) => return Err(Error::Shape(format!("surface grid has {c} channels, model needs {s}"))),
                };
                let dims = (grid.m(), grid.n());
                if b.node_graph.is_empty() {
                    b.surface_dims = dims;
                } else if dims != b.surface_dims {
                    return Err(Error::Shape(format!("surface grid {dims:?} differs from {:?}", b.surface_dims)));
                }
                sdata.extend_from_slice(&grid.data);
                b.node_graph.push(gi);
                b.node_local.push(li);
            }
            for (li, link) in g.links.iter().enumerate() {
                let grid = link.grid.as_ref().ok_or_else(|| Error::Contract(format!("graph {gi} link {li} has no curve grid")))?;
                if grid.channels != cc && !(grid.channels == 6 && cc == 3) {
                    return Err(Error::Shape(format!("curve grid has {} channels, model needs {cc}", grid.channels)));
                }
                if b.link_ends.is_empty() {
                    b.curve_len = grid.len();
                } else if grid.len() != b.curve_len {
                    return Err(Error::Shape(format!("curve grid length {} differs from {}", grid.len(), b.curve_len)));
                }
                let flip = reverse.as_deref_mut().is_some_and(|r| r.random_bool(0.5));
                let grid = if flip { grid.reversed() } else { grid.clone() };
                for k in 0..grid.len() {
                    cdata.extend_from_slice(&grid.data[k * grid.channels..k * grid.channels + cc]);
                }
                if link.ends.iter().any(|&e| e >= g.nodes.len()) {
                    return Err(Error::Contract(format!("graph {gi} link {li} references a missing node")));
                }
                b.link_ends.push([base + link.ends[0], base + link.ends[1]]);
                b.link_local.push(li);
            }
            b.node_offsets.push(b.node_graph.len());
        }
        let rows = sdata.len() / sc;
        b.surface = Tensor::matrix(rows, sc, sdata);
        let rows = cdata.len() / cc;
        b.curve = Tensor::matrix(rows, cc, cdata);
        Ok(b)
    }

    pub fn node_count(&self) -> usize {
        self.node_graph.len()
    }

    pub fn link_count(&self) -> usize {
        self.link_ends.len()
    }

    /// Stacked surface grids `[nodes·M·N, channels]`.
    pub fn surface(&self) -> &Tensor {
        &self.surface
    }

    /// Stacked curve grids `[links·M, channels]`; every call is counted.
    pub fn curve(&self) -> &Tensor {
        self.curve_reads.set(self.curve_reads.get() + 1);
        &self.curve
    }

    pub fn curve_reads(&self) -> usize {
        self.curve_reads.get()
    }

    /// Replaces the stacked surface data (same shape), e.g. for input
    /// perturbation experiments.
    pub fn set_surface(&mut self, t: Tensor) -> Result<()> {
        if t.shape != self.surface.shape {
            return Err(Error::Shape(format!("surface {:?} expected {:?}", t.shape, self.surface.shape)));
        }
        self.surface = t;
        Ok(())
    }
}
