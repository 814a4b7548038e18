//! Synthetic labelled B-rep corpora: random profile extrusions along
//! directions drawn from a spherical cap, per-face segmentation labels,
//! face-count-binned splits and duplicate hashes.

mod extrude;
mod profile;

use std::f64::consts::{FRAC_PI_4, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use extrude::extrude;
pub use profile::{loop_outline, signed_area, Family, Point2, Profile, ProfileSegment};

use crate::brep::{self, bounding_box, normalize, Solid};
use crate::dataset::{Dataset, Record};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::sampler::{sample_face, sample_graph, SamplingConfig};

/// Sweep direction and height, plus the cap-sampling variates that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrusionSpec {
    pub direction: Vec3,
    pub height: f64,
    pub xi1: f64,
    pub xi2: f64,
    /// Cap half-angle in radians.
    pub theta: f64,
}

/// Area-uniform direction in the spherical cap of half-angle `theta` around +z.
pub fn extrusion_vector(xi1: f64, xi2: f64, theta: f64) -> Vec3 {
    let c = theta.cos();
    let z = xi1 * (1.0 - c) + c;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = TAU * xi2;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

pub const SEGMENT_NAMES: [&str; 3] = ["extrude_end", "extrude_side", "other"];
pub const LABEL_END: usize = 0;
pub const LABEL_SIDE: usize = 1;
pub const LABEL_OTHER: usize = 2;
/// `d` above this marks a cap.
pub const END_THRESHOLD: f64 = 0.5;
/// `d` below this marks a side.
pub const SIDE_THRESHOLD: f64 = 0.1;

/// Per face `d = |mean visible unit normal · e|`: caps (`d > 0.5`) are
/// ends, faces parallel to the sweep (`d < 0.1`) are sides, the rest other.
pub fn segmentation_labels(solid: &Solid, direction: &Vec3) -> Result<Vec<usize>> {
    (0..solid.faces.len())
        .map(|f| {
            let grid = sample_face(solid, f, 10, 10, true)?;
            let mut mean = Vec3::zeros();
            let mut count = 0;
            for k in 0..grid.m() {
                for l in 0..grid.n() {
                    if grid.mask(k, l) {
                        mean += grid.normal(k, l).expect("normals requested");
                        count += 1;
                    }
                }
            }
            let normal = if count > 0 {
                mean / count as f64
            } else {
                let b = &solid.faces[f].uv_bounds;
                solid.face_normal(f, b.u.mid(), b.v.mid())?
            };
            let d = normal.dot(direction).abs();
            Ok(if d > END_THRESHOLD {
                LABEL_END
            } else if d < SIDE_THRESHOLD {
                LABEL_SIDE
            } else {
                LABEL_OTHER
            })
        })
        .collect()
}

/// Surface area by midpoint quadrature on an `m × n` grid per face; each
/// cell's trimmed coverage is estimated with 4 × 4 sub-samples.
pub fn surface_area(solid: &Solid, m: usize, n: usize) -> Result<f64> {
    const SUB: usize = 4;
    let mut total = 0.0;
    for (fi, face) in solid.faces.iter().enumerate() {
        let surf = &solid.surfaces[face.surface];
        let (du, dv) = (face.uv_bounds.u.len() / m as f64, face.uv_bounds.v.len() / n as f64);
        for i in 0..m {
            for j in 0..n {
                let (u0, v0) = (face.uv_bounds.u.lo + i as f64 * du, face.uv_bounds.v.lo + j as f64 * dv);
                let mut covered = 0;
                for a in 0..SUB {
                    for b in 0..SUB {
                        let (u, v) = (u0 + (a as f64 + 0.5) * du / SUB as f64, v0 + (b as f64 + 0.5) * dv / SUB as f64);
                        covered += usize::from(crate::sampler::trimming_mask(solid, fi, u, v));
                    }
                }
                if covered == 0 {
                    continue;
                }
                let e = surf.eval(u0 + du / 2.0, v0 + dv / 2.0)?;
                total += e.du.cross(&e.dv).norm() * du * dv * covered as f64 / (SUB * SUB) as f64;
            }
        }
    }
    Ok(total)
}

/// Hash of face/edge/loop counts, sorted bounding-box extents and surface
/// area (both rounded to 1e-4). Invariant to axis permutations; apply to
/// normalized solids to remove scale.
pub fn dedup_hash(solid: &Solid) -> Result<String> {
    let mut ext: Vec<f64> = bounding_box(solid).extents().iter().copied().collect();
    ext.sort_by(f64::total_cmp);
    let area = surface_area(solid, 10, 10)?;
    let round = |x: f64| format!("{:.4}", (x * 1e4).round() / 1e4 + 0.0);
    let key = format!(
        "{}|{}|{}|{}|{}|{}|{}",
        solid.faces.len(),
        solid.edges.len(),
        solid.loop_count(),
        round(ext[0]),
        round(ext[1]),
        round(ext[2]),
        round(area)
    );
    Ok(hex::encode(Sha256::digest(key.as_bytes())))
}

/// Generation configuration; one class per family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub per_class: usize,
    pub families: Vec<Family>,
    /// Cap half-angle in degrees.
    #[serde(default = "default_theta")]
    pub theta_deg: f64,
    #[serde(default = "default_height")]
    pub height_range: [f64; 2],
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_theta() -> f64 {
    45.0
}

fn default_height() -> [f64; 2] {
    [0.3, 1.5]
}

fn default_attempts() -> usize {
    3
}

impl GenConfig {
    pub fn new(seed: u64, per_class: usize, families: Vec<Family>) -> Self {
        Self {
            seed,
            per_class,
            families,
            theta_deg: default_theta(),
            height_range: default_height(),
            sampling: SamplingConfig::default(),
            max_attempts: default_attempts(),
        }
    }

    /// Triangle / square / hexagon / holed-square prisms.
    pub fn four_shapes(seed: u64, per_class: usize) -> Self {
        Self::new(
            seed,
            per_class,
            vec![
                Family::Polygon { sides: 3 },
                Family::Polygon { sides: 4 },
                Family::Polygon { sides: 6 },
                Family::Holed { sides: 4, hole_sides: 4 },
            ],
        )
    }

    /// Twenty families: polygons, spline-sided polygons, letters and holed shapes.
    pub fn twenty_shapes(seed: u64, per_class: usize) -> Self {
        let mut f: Vec<Family> = (3..=8).map(|sides| Family::Polygon { sides }).collect();
        f.extend((3..=6).map(|sides| Family::SplinePolygon { sides }));
        f.extend(['L', 'T', 'U'].map(|letter| Family::Letter { letter }));
        f.extend([(4, 3), (4, 4), (5, 3), (5, 4), (6, 3), (6, 4), (8, 4)].map(|(sides, hole_sides)| Family::Holed { sides, hole_sides }));
        Self::new(seed, per_class, f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.per_class == 0 {
            return Err(Error::Config("need at least one family and one record per class".into()));
        }
        for f in &self.families {
            f.validate()?;
        }
        if !(self.theta_deg > 0.0 && self.theta_deg < 90.0) {
            return Err(Error::Config(format!("theta_deg must lie in (0, 90), got {}", self.theta_deg)));
        }
        let [lo, hi] = self.height_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!("bad height range [{lo}, {hi}]")));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        self.sampling.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// Draws one record; `None` after `max_attempts` failures.
fn generate_one(cfg: &GenConfig, index: usize) -> Option<Record> {
    let class = index % cfg.families.len();
    let family = &cfg.families[class];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let theta = cfg.theta_deg.to_radians();
    for attempt in 0..cfg.max_attempts {
        let profile = family.sample(&mut rng);
        let (xi1, xi2) = (rng.random::<f64>(), rng.random::<f64>());
        let height = rng.random_range(cfg.height_range[0]..=cfg.height_range[1]);
        let spec = ExtrusionSpec { direction: extrusion_vector(xi1, xi2, theta), height, xi1, xi2, theta };
        let built = (|| -> Result<Record> {
            let solid = normalize(&extrude(&profile, &spec)?)?;
            let graph = sample_graph(&solid, &cfg.sampling)?;
            if graph.node_count() < 3 || graph.nodes.iter().any(|n| n.grid.as_ref().is_some_and(|g| g.visible_count() == 0)) {
                return Err(Error::Generation("graph too small or face fully trimmed".into()));
            }
            Ok(Record {
                id: index,
                class,
                family: family.name(),
                face_labels: segmentation_labels(&solid, &spec.direction)?,
                hash: dedup_hash(&solid)?,
                graph,
                spec: Some(spec.clone()),
                solid: Some(solid),
            })
        })();
        match built {
            Ok(r) => return Some(r),
            Err(e) => log::warn!("record {index} attempt {}: {e}", attempt + 1),
        }
    }
    log::warn!("record {index} skipped after {} attempts", cfg.max_attempts);
    None
}

/// Generates `per_class` records per family, classes interleaved by record
/// index. Output is a pure function of the configuration.
pub fn gen_dataset(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let total = cfg.per_class * cfg.families.len();
    let records = (0..total).filter_map(|i| generate_one(cfg, i)).collect();
    Ok(Dataset {
        records,
        sampling: cfg.sampling,
        class_names: cfg.families.iter().map(Family::name).collect(),
        segment_names: SEGMENT_NAMES.iter().map(|s| s.to_string()).collect(),
        config: serde_json::to_value(cfg)?,
    })
}

/// Splits record positions into (train, test): records are binned by face
/// count at `F_min + 0.15·(F_max − F_min)` and `F_min + 0.30·(F_max − F_min)`,
/// and each bin is shuffled and split separately.
pub fn split_by_face_bins(face_counts: &[usize], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if face_counts.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::Config(format!("test fraction {test_fraction} outside [0, 1]")));
    }
    let lo = *face_counts.iter().min().unwrap() as f64;
    let hi = *face_counts.iter().max().unwrap() as f64;
    let (f1, f2) = (lo + 0.15 * (hi - lo), lo + 0.30 * (hi - lo));
    let mut bins: [Vec<usize>; 3] = Default::default();
    for (i, &f) in face_counts.iter().enumerate() {
        let f = f as f64;
        bins[if f < f1 { 0 } else if f < f2 { 1 } else { 2 }].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut bin in bins {
        bin.shuffle(&mut rng);
        let k = (bin.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&bin[..k]);
        train.extend_from_slice(&bin[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Random primitive solids (boxes, cylinders, cones, spheres) plus straight
/// polygon prisms, normalized. Used for sampling-error studies.
pub fn primitive_corpus(seed: u64, count: usize) -> Result<Vec<Solid>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let r = rng.random_range(0.3..1.0);
        let h = rng.random_range(0.3..2.0);
        let splits = [1, 2, 4][rng.random_range(0..3)];
        let solid = match i % 6 {
            0 => brep::primitives::box_solid(
                Vec3::new(rng.random_range(0.2..2.0), rng.random_range(0.2..2.0), rng.random_range(0.2..2.0)),
                Vec3::zeros(),
            ),
            1 => brep::primitives::cylinder(r, h, splits),
            2 => brep::primitives::cone_frustum(r, r * rng.random_range(0.2..0.9), h, splits),
            3 => brep::primitives::sphere_hemispheres(r),
            4 => brep::primitives::sphere_octants(r),
            _ => {
                let sides = rng.random_range(3..=8);
                let p = Family::Polygon { sides }.sample(&mut rng);
                let spec = ExtrusionSpec { direction: Vec3::z(), height: h, xi1: 1.0, xi2: 0.0, theta: FRAC_PI_4 };
                extrude(&p, &spec)?
            }
        };
        out.push(normalize(&solid)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
