use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{validate, Solid};
use crate::error::Result;
use crate::sampler::{CurveUVGrid, SurfaceUVGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub face: usize,
    pub grid: Option<SurfaceUVGrid>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphLink {
    /// Node indices; the order carries no meaning.
    pub ends: [usize; 2],
    pub edge: usize,
    pub grid: Option<CurveUVGrid>,
}

/// Undirected multigraph: one node per face, one link per edge shared by two
/// distinct faces. Seam edges (both uses on one face) get no link.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FaceAdjacencyGraph {
    pub nodes: Vec<GraphNode>,
    pub links: Vec<GraphLink>,
}

impl FaceAdjacencyGraph {
    /// Walks face → loop → halfedge → twin → neighbouring face, emitting each
    /// edge once (from its lower-indexed halfedge).
    pub fn from_solid(solid: &Solid) -> Result<Self> {
        validate(solid).into_result()?;
        let nodes = (0..solid.faces.len()).map(|face| GraphNode { face, grid: None }).collect();
        let mut links = Vec::new();
        for (fi, face) in solid.faces.iter().enumerate() {
            for lp in &face.loops {
                for &he in &lp.halfedges {
                    let h = &solid.halfedges[he];
                    let other = solid.halfedges[h.twin].face;
                    if he < h.twin && other != fi {
                        links.push(GraphLink { ends: [fi, other], edge: h.edge, grid: None });
                    }
                }
            }
        }
        Ok(Self { nodes, links })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Per-node incident link indices.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.nodes.len()];
        for (i, l) in self.links.iter().enumerate() {
            inc[l.ends[0]].push(i);
            inc[l.ends[1]].push(i);
        }
        inc
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.incidence().iter().map(Vec::len).collect()
    }

    /// Subgraph induced by the nodes with `keep[v]`; nodes keep their
    /// relative order and links among kept nodes are retained.
    pub fn induced(&self, keep: &[bool]) -> Self {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if keep[i] {
                remap[i] = nodes.len();
                nodes.push(n.clone());
            }
        }
        let links = self
            .links
            .iter()
            .filter(|l| keep[l.ends[0]] && keep[l.ends[1]])
            .map(|l| GraphLink { ends: [remap[l.ends[0]], remap[l.ends[1]]], ..l.clone() })
            .collect();
        Self { nodes, links }
    }

    /// Same nodes, only the links with `keep[i]`.
    pub fn with_links(&self, keep: &[bool]) -> Self {
        let links = self.links.iter().zip(keep).filter(|(_, &k)| k).map(|(l, _)| l.clone()).collect();
        Self { nodes: self.nodes.clone(), links }
    }

    /// Induced subgraph on all nodes within `n` hops of `seed`.
    pub fn n_hop_subgraph(&self, seed: usize, n: usize) -> Self {
        let mut keep = vec![false; self.nodes.len()];
        for v in n_hop_nodes(self, seed, n) {
            keep[v] = true;
        }
        self.induced(&keep)
    }

    /// Applies a node relabelling: node `i` of the result is node `perm[i]`
    /// of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let nodes = perm.iter().map(|&old| self.nodes[old].clone()).collect();
        let links = self
            .links
            .iter()
            .map(|l| GraphLink { ends: [inverse[l.ends[0]], inverse[l.ends[1]]], ..l.clone() })
            .collect();
        Self { nodes, links }
    }
}

/// Sorted node indices within graph distance `n` of `seed` (breadth-first).
pub fn n_hop_nodes(graph: &FaceAdjacencyGraph, seed: usize, n: usize) -> Vec<usize> {
    let inc = graph.incidence();
    let mut dist = vec![usize::MAX; graph.nodes.len()];
    dist[seed] = 0;
    let mut queue = VecDeque::from([seed]);
    while let Some(v) = queue.pop_front() {
        if dist[v] == n {
            continue;
        }
        for &li in &inc[v] {
            let l = &graph.links[li];
            let w = if l.ends[0] == v { l.ends[1] } else { l.ends[0] };
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (0..graph.nodes.len()).filter(|&v| dist[v] != usize::MAX).collect()
}
