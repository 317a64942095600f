//! Versioned on-disk formats: instance documents and experiment plans in
//! structured text (TOML), metrics and traces as CSV.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::decayspace::{Instance, QuasiMetricSpace};
use crate::error::{Error, Result};
use crate::sinrcore::QuasiLink;

pub const INSTANCE_FORMAT: &str = "decaysim/instance";
pub const PLAN_FORMAT: &str = "decaysim/plan";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SpaceBlock {
    n: usize,
    labels: Vec<String>,
    coords: Option<Vec<[f64; 2]>>,
    /// Row-major quasi-distance matrix.
    q: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkBlock {
    id: usize,
    sender: usize,
    receiver: usize,
    power: f64,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    version: u32,
    space: SpaceBlock,
    config: ScenarioConfig,
    links: Vec<LinkBlock>,
}

/// Serializes an instance to the versioned structured-text format.
pub fn instance_to_string(inst: &Instance) -> Result<String> {
    let file = InstanceFile {
        format: INSTANCE_FORMAT.to_string(),
        version: FORMAT_VERSION,
        space: SpaceBlock {
            n: inst.space.n(),
            labels: inst.space.labels().to_vec(),
            coords: inst.coords.clone(),
            q: inst.space.rows(),
        },
        config: inst.config.clone(),
        links: inst
            .links
            .iter()
            .map(|l| LinkBlock {
                id: l.id,
                sender: l.sender,
                receiver: l.receiver,
                power: l.power,
                prob: l.prob,
            })
            .collect(),
    };
    let body = toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(format!("# {INSTANCE_FORMAT} v{FORMAT_VERSION}\n{body}"))
}

/// Parses the structured-text format back into an instance. Link
/// quasi-lengths are re-derived from the matrix.
pub fn instance_from_str(text: &str) -> Result<Instance> {
    let file: InstanceFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.format != INSTANCE_FORMAT {
        return Err(Error::Parse(format!(
            "unexpected format {:?}, expected {INSTANCE_FORMAT}",
            file.format
        )));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported version {} (supported: {FORMAT_VERSION})",
            file.version
        )));
    }
    if file.space.q.len() != file.space.n {
        return Err(Error::Parse(format!(
            "matrix has {} rows for n = {}",
            file.space.q.len(),
            file.space.n
        )));
    }
    let mut space = QuasiMetricSpace::from_matrix(file.space.q)?;
    if file.space.labels.len() == file.space.n {
        space.set_labels(file.space.labels);
    }
    let links = file
        .links
        .iter()
        .map(|l| QuasiLink::from_space(l.id, l.sender, l.receiver, l.power, l.prob, &space))
        .collect();
    let inst = Instance { space, links, config: file.config, coords: file.space.coords };
    inst.validate()?;
    Ok(inst)
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<()> {
    std::fs::write(path, instance_to_string(inst)?)?;
    Ok(())
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    instance_from_str(&text)
}

/// Stable short digest of an instance's canonical serialization.
pub fn instance_digest(inst: &Instance) -> Result<String> {
    let text = instance_to_string(inst)?;
    let hash = Sha256::digest(text.as_bytes());
    Ok(hex_prefix(&hash, 16))
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        use std::fmt::Write;
        let _ = write!(s, "{b:02x}");
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

/// Which engine a plan drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanAlgorithm {
    Spaids,
    Oams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

/// One sweep row: either a file to load or generator overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanRow {
    pub label: Option<String>,
    pub file: Option<PathBuf>,
    pub n_nodes: Option<usize>,
    pub n_links: Option<usize>,
    pub sigma: Option<f64>,
}

impl PlanRow {
    pub fn label_or_default(&self, ix: usize) -> String {
        self.label.clone().unwrap_or_else(|| format!("row{ix}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub format: String,
    pub version: u32,
    pub id: String,
    pub algorithm: PlanAlgorithm,
    pub seeds: SeedRange,
    pub output_dir: Option<PathBuf>,
    pub config: ScenarioConfig,
    pub rows: Vec<PlanRow>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.format != PLAN_FORMAT {
            return Err(Error::Plan(format!(
                "unexpected format {:?}, expected {PLAN_FORMAT}",
                self.format
            )));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Plan(format!("unsupported plan version {}", self.version)));
        }
        if self.seeds.count == 0 {
            return Err(Error::Plan("seed range is empty".into()));
        }
        if self.rows.is_empty() {
            return Err(Error::Plan("plan has no rows".into()));
        }
        for row in &self.rows {
            if let Some(f) = &row.file {
                if !f.exists() {
                    return Err(Error::Plan(format!("instance file {} not found", f.display())));
                }
            }
        }
        self.config.validate()
    }
}

pub fn plan_from_str(text: &str) -> Result<ExperimentPlan> {
    let plan: ExperimentPlan = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    plan.validate()?;
    Ok(plan)
}

pub fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path)?;
    // Instance files referenced relatively resolve against the plan's parent.
    let mut plan: ExperimentPlan =
        toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(parent) = path.parent() {
        for row in &mut plan.rows {
            if let Some(f) = &row.file {
                if f.is_relative() {
                    row.file = Some(parent.join(f));
                }
            }
        }
    }
    plan.validate()?;
    Ok(plan)
}

pub fn plan_to_string(plan: &ExperimentPlan) -> Result<String> {
    let body = toml::to_string(plan).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(format!("# {PLAN_FORMAT} v{FORMAT_VERSION}\n{body}"))
}
