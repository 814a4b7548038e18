use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which geometric channels the grids carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Surface xyz + mask (4), curve xyz (3).
    Xyz,
    /// Surface xyz + normal + mask (7), curve xyz + tangent (6).
    XyzNormals,
}

impl ChannelMode {
    pub fn surface_channels(self) -> usize {
        match self {
            Self::Xyz => 4,
            Self::XyzNormals => 7,
        }
    }

    pub fn curve_channels(self) -> usize {
        match self {
            Self::Xyz => 3,
            Self::XyzNormals => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Surface + curve CNNs with edge-conditioned message passing.
    Full,
    /// No curve CNN, no edge gating, no edge update.
    FaceOnly,
    /// Per-node MLP in place of message passing (no topology).
    FeaturesOnly,
    /// Seeded Gaussian noise in place of grid features (no geometry).
    TopologyOnly,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "face_only" => Ok(Self::FaceOnly),
            "features_only" => Ok(Self::FeaturesOnly),
            "topology_only" => Ok(Self::TopologyOnly),
            other => Err(Error::Config(format!("unknown model variant '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Segmentation,
    /// Encoder + projection head for contrastive training.
    Contrastive,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" | "classify" => Ok(Self::Classification),
            "segmentation" | "segment" => Ok(Self::Segmentation),
            "contrastive" | "clr" => Ok(Self::Contrastive),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// Model configuration; serialized as the model config JSON and embedded in
/// checkpoint metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub channels: ChannelMode,
    /// Message-passing rounds.
    pub graph_layers: usize,
    /// Output widths of the three surface convolutions.
    pub surface_widths: [usize; 3],
    /// Output widths of the three curve convolutions.
    pub curve_widths: [usize; 3],
    /// Node / edge embedding width.
    pub embed_dim: usize,
    /// Shape embedding width.
    pub graph_dim: usize,
    /// Hidden width of the classification / segmentation MLP.
    pub head_hidden: usize,
    /// Hidden width of the features-only replacement MLP.
    pub mlp_hidden: usize,
    /// Projection head output width (contrastive task).
    pub projection_dim: usize,
    pub variant: Variant,
    /// Max-pool the surface CNN over the 8 grid symmetries.
    pub orbit_pooling: bool,
    pub task: Task,
    pub num_classes: usize,
    /// Seed of the topology-only input noise.
    pub noise_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: ChannelMode::XyzNormals,
            graph_layers: 2,
            surface_widths: [64, 128, 256],
            curve_widths: [64, 128, 256],
            embed_dim: 64,
            graph_dim: 128,
            head_hidden: 64,
            mlp_hidden: 192,
            projection_dim: 64,
            variant: Variant::Full,
            orbit_pooling: false,
            task: Task::Classification,
            num_classes: 2,
            noise_seed: 0,
        }
    }
}

impl ModelConfig {
    /// Narrow CNNs for single-core experiments; everything else as default.
    pub fn desk() -> Self {
        Self { surface_widths: [16, 32, 64], curve_widths: [16, 32, 64], ..Self::default() }
    }

    pub fn with_task(mut self, task: Task, num_classes: usize) -> Self {
        self.task = task;
        self.num_classes = num_classes;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let widths = self.surface_widths.iter().chain(&self.curve_widths);
        if widths.chain([&self.embed_dim, &self.graph_dim, &self.head_hidden, &self.mlp_hidden, &self.projection_dim]).any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.graph_layers == 0 {
            return Err(Error::Config("graph_layers must be at least 1".into()));
        }
        if self.task != Task::Contrastive && self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes must be at least 2, got {}", self.num_classes)));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn uses_curves(&self) -> bool {
        self.variant == Variant::Full
    }
}
