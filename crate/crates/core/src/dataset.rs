//! Dataset container: a binary record file plus a JSON index.
//!
//! Container layout (little endian):
//!
//! ```text
//! magic "UVND" | version u32 | record_count u32
//! record_count × {
//!     meta_len u32 | meta (UTF-8 JSON: ids, labels, topology, grid shapes, solid)
//!     per node: u_params f64 × M | v_params f64 × N | samples f64 × M·N·C
//!     per link: params f64 × L | samples f64 × L·C
//! }
//! ```
//!
//! The index (`<name>.json`) lists every record with its byte offset and
//! length, plus the sampling and generation configuration.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::brep::{FaceAdjacencyGraph, GraphLink, GraphNode, Solid};
use crate::error::{Error, Result};
use crate::sampler::{CurveUVGrid, SamplingConfig, SurfaceUVGrid};
use crate::synth::ExtrusionSpec;

const MAGIC: &[u8; 4] = b"UVND";
pub const DATASET_FORMAT_VERSION: u32 = 1;

/// One labelled solid.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub id: usize,
    pub class: usize,
    pub family: String,
    /// Graph with sampled grids on every node and link.
    pub graph: FaceAdjacencyGraph,
    /// Per-node segmentation label.
    pub face_labels: Vec<usize>,
    pub hash: String,
    pub spec: Option<ExtrusionSpec>,
    /// The normalized source solid, kept so the set can be resampled.
    pub solid: Option<Solid>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub sampling: SamplingConfig,
    pub class_names: Vec<String>,
    pub segment_names: Vec<String>,
    /// Free-form generation configuration, echoed into the index.
    pub config: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct RecordMeta {
    id: usize,
    class: usize,
    family: String,
    face_labels: Vec<usize>,
    hash: String,
    spec: Option<ExtrusionSpec>,
    solid: Option<Solid>,
    faces: Vec<usize>,
    links: Vec<LinkMeta>,
    surface: Option<GridShape>,
    curve: Option<GridShape>,
    surface_flagged: Vec<Vec<usize>>,
    curve_flagged: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct LinkMeta {
    ends: [usize; 2],
    edge: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct GridShape {
    m: usize,
    n: usize,
    channels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: usize,
    pub class: usize,
    pub family: String,
    pub nodes: usize,
    pub links: usize,
    pub hash: String,
    pub offset: u64,
    pub length: u64,
}

/// The JSON index written next to a container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub format_version: u32,
    pub container: String,
    pub record_count: usize,
    pub sampling: SamplingConfig,
    pub class_names: Vec<String>,
    pub segment_names: Vec<String>,
    pub config: serde_json::Value,
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    pub records: Vec<IndexEntry>,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn encode_record(r: &Record) -> Result<Vec<u8>> {
    let g = &r.graph;
    let mut surface = None;
    let mut grids = Vec::new();
    let mut surface_flagged = Vec::new();
    for (i, node) in g.nodes.iter().enumerate() {
        let grid = node.grid.as_ref().ok_or_else(|| Error::Contract(format!("record {} node {i} has no grid", r.id)))?;
        let shape = GridShape { m: grid.m(), n: grid.n(), channels: grid.channels };
        if *surface.get_or_insert(shape) != shape {
            return Err(Error::Shape(format!("record {} mixes surface grid shapes", r.id)));
        }
        put_f64s(&mut grids, &grid.u_params);
        put_f64s(&mut grids, &grid.v_params);
        put_f64s(&mut grids, &grid.data);
        surface_flagged.push(grid.flagged.clone());
    }
    let mut curve = None;
    let mut curve_flagged = Vec::new();
    for (i, link) in g.links.iter().enumerate() {
        let grid = link.grid.as_ref().ok_or_else(|| Error::Contract(format!("record {} link {i} has no grid", r.id)))?;
        let shape = GridShape { m: grid.len(), n: 1, channels: grid.channels };
        if *curve.get_or_insert(shape) != shape {
            return Err(Error::Shape(format!("record {} mixes curve grid shapes", r.id)));
        }
        put_f64s(&mut grids, &grid.params);
        put_f64s(&mut grids, &grid.data);
        curve_flagged.push(grid.flagged.clone());
    }
    let meta = RecordMeta {
        id: r.id,
        class: r.class,
        family: r.family.clone(),
        face_labels: r.face_labels.clone(),
        hash: r.hash.clone(),
        spec: r.spec.clone(),
        solid: r.solid.clone(),
        faces: g.nodes.iter().map(|n| n.face).collect(),
        links: g.links.iter().map(|l| LinkMeta { ends: l.ends, edge: l.edge }).collect(),
        surface,
        curve,
        surface_flagged,
        curve_flagged,
    };
    let meta = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(4 + meta.len() + grids.len());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&grids);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Format("truncated record".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn decode_record(buf: &[u8]) -> Result<Record> {
    let mut c = Cursor { buf, pos: 0 };
    let meta_len = u32::from_le_bytes(c.take(4)?.try_into().unwrap()) as usize;
    let meta: RecordMeta = serde_json::from_slice(c.take(meta_len)?).map_err(|e| Error::Format(format!("record metadata: {e}")))?;
    let mut nodes = Vec::with_capacity(meta.faces.len());
    for (i, &face) in meta.faces.iter().enumerate() {
        let s = meta.surface.ok_or_else(|| Error::Format("missing surface grid shape".into()))?;
        let u_params = c.f64s(s.m)?;
        let v_params = c.f64s(s.n)?;
        let data = c.f64s(s.m * s.n * s.channels)?;
        let flagged = meta.surface_flagged.get(i).cloned().unwrap_or_default();
        nodes.push(GraphNode { face, grid: Some(SurfaceUVGrid { u_params, v_params, channels: s.channels, data, flagged }) });
    }
    let mut links = Vec::with_capacity(meta.links.len());
    for (i, l) in meta.links.iter().enumerate() {
        let s = meta.curve.ok_or_else(|| Error::Format("missing curve grid shape".into()))?;
        let params = c.f64s(s.m)?;
        let data = c.f64s(s.m * s.channels)?;
        let flagged = meta.curve_flagged.get(i).cloned().unwrap_or_default();
        links.push(GraphLink { ends: l.ends, edge: l.edge, grid: Some(CurveUVGrid { params, channels: s.channels, data, flagged }) });
    }
    if c.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes in record {}", buf.len() - c.pos, meta.id)));
    }
    Ok(Record {
        id: meta.id,
        class: meta.class,
        family: meta.family,
        graph: FaceAdjacencyGraph { nodes, links },
        face_labels: meta.face_labels,
        hash: meta.hash,
        spec: meta.spec,
        solid: meta.solid,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len().max(self.records.iter().map(|r| r.class + 1).max().unwrap_or(0))
    }

    /// Writes the container and returns its index.
    pub fn write_container(&self, w: &mut impl Write, container_name: &str) -> Result<DatasetIndex> {
        w.write_all(MAGIC)?;
        w.write_all(&DATASET_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.records.len() as u32).to_le_bytes())?;
        let mut offset = 12u64;
        let mut entries = Vec::with_capacity(self.records.len());
        for r in &self.records {
            let bytes = encode_record(r)?;
            w.write_all(&bytes)?;
            entries.push(IndexEntry {
                id: r.id,
                class: r.class,
                family: r.family.clone(),
                nodes: r.graph.node_count(),
                links: r.graph.link_count(),
                hash: r.hash.clone(),
                offset,
                length: bytes.len() as u64,
            });
            offset += bytes.len() as u64;
        }
        Ok(DatasetIndex {
            format_version: DATASET_FORMAT_VERSION,
            container: container_name.to_string(),
            record_count: self.records.len(),
            sampling: self.sampling,
            class_names: self.class_names.clone(),
            segment_names: self.segment_names.clone(),
            config: self.config.clone(),
            config_hash: config_hash(&self.config),
            records: entries,
        })
    }

    /// Reads a container using its index.
    pub fn read_container(r: &mut impl Read, index: &DatasetIndex) -> Result<Self> {
        if index.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {}", index.format_version)));
        }
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() < 12 || &buf[..4] != MAGIC {
            return Err(Error::Format("not a dataset container (bad magic)".into()));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        let count = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        if version != DATASET_FORMAT_VERSION || count != index.record_count || count != index.records.len() {
            return Err(Error::Format("container header disagrees with index".into()));
        }
        let mut records = Vec::with_capacity(count);
        for e in &index.records {
            let (start, end) = (e.offset as usize, (e.offset + e.length) as usize);
            if end > buf.len() || start > end {
                return Err(Error::Format(format!("record {} lies outside the container", e.id)));
            }
            let rec = decode_record(&buf[start..end])?;
            if rec.id != e.id || rec.class != e.class {
                return Err(Error::Format(format!("record {} disagrees with its index entry", e.id)));
            }
            records.push(rec);
        }
        Ok(Self {
            records,
            sampling: index.sampling,
            class_names: index.class_names.clone(),
            segment_names: index.segment_names.clone(),
            config: index.config.clone(),
        })
    }

    /// Writes `<prefix>.uvnd` and `<prefix>.json`; returns the index path.
    pub fn save(&self, prefix: &Path) -> Result<PathBuf> {
        let container = prefix.with_extension("uvnd");
        let index_path = prefix.with_extension("json");
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let name = container.file_name().and_then(|n| n.to_str()).ok_or_else(|| Error::Config("bad dataset path".into()))?.to_string();
        let mut w = std::io::BufWriter::new(std::fs::File::create(&container)?);
        let index = self.write_container(&mut w, &name)?;
        w.flush()?;
        std::fs::write(&index_path, serde_json::to_string_pretty(&index)? + "\n")?;
        Ok(index_path)
    }

    /// Loads from an index path (or a prefix; `.json` is appended when missing).
    pub fn load(path: &Path) -> Result<Self> {
        let index_path = if path.extension().is_some_and(|e| e == "json") { path.to_path_buf() } else { path.with_extension("json") };
        let text = std::fs::read_to_string(&index_path)
            .map_err(|e| Error::Config(format!("cannot read dataset index {}: {e}", index_path.display())))?;
        let index: DatasetIndex = serde_json::from_str(&text).map_err(|e| Error::Format(format!("dataset index: {e}")))?;
        let container = index_path.parent().unwrap_or(Path::new(".")).join(&index.container);
        let mut r = std::io::BufReader::new(std::fs::File::open(&container)?);
        Self::read_container(&mut r, &index)
    }

    /// The sub-dataset with the given record positions.
    pub fn subset(&self, positions: &[usize]) -> Self {
        Self { records: positions.iter().map(|&i| self.records[i].clone()).collect(), ..self.clone_meta() }
    }

    fn clone_meta(&self) -> Self {
        Self {
            records: Vec::new(),
            sampling: self.sampling,
            class_names: self.class_names.clone(),
            segment_names: self.segment_names.clone(),
            config: self.config.clone(),
        }
    }

    /// Re-samples every record from its stored solid.
    pub fn resampled(&self, sampling: &SamplingConfig) -> Result<Self> {
        sampling.validate()?;
        let mut out = self.clone_meta();
        out.sampling = *sampling;
        for r in &self.records {
            let solid = r.solid.as_ref().ok_or_else(|| Error::Config(format!("record {} carries no solid to resample", r.id)))?;
            out.records.push(Record { graph: crate::sampler::sample_graph(solid, sampling)?, ..r.clone() });
        }
        Ok(out)
    }
}
