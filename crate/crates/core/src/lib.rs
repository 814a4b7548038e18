//! UV-Net toolkit: B-rep solids to UV-grid + face-adjacency-graph
//! representation, a small reverse-mode autodiff engine, the UV-Net encoder
//! with classification/segmentation heads, contrastive self-supervision and
//! synthetic extrusion datasets.

pub mod brep;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod model;
pub mod nn;
pub mod sampler;
pub mod ssl;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
