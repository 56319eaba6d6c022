//! Dataset manifests written by `synth` and graph-file loading.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use vesselmatch::features::FeatureManifest;
use vesselmatch::graph::{IndividualGraph, ViewAngle};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Template,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseEntry {
    pub id: String,
    pub seed: u64,
    pub split: Split,
    pub view_angle: ViewAngle,
    pub nodes: usize,
    /// Paths relative to the manifest's directory.
    pub graph: String,
    pub mask: String,
    pub intensity: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub run_config_hash: String,
    pub seed: u64,
    pub feature_manifest: FeatureManifest,
    pub cases: Vec<CaseEntry>,
}

pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    /// Accepts the dataset directory or its manifest file.
    pub fn open(path: &Path) -> anyhow::Result<Dataset> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = vesselmatch::io::read_text(&file)?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).with_context(|| format!("dataset manifest {}", file.display()))?;
        if manifest.format_version > DATASET_FORMAT_VERSION {
            bail!(vesselmatch::Error::Version {
                found: manifest.format_version,
                supported: DATASET_FORMAT_VERSION,
            });
        }
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Dataset { dir, manifest })
    }

    pub fn graphs(&self, split: Split) -> anyhow::Result<Vec<IndividualGraph>> {
        let paths: Vec<PathBuf> = self
            .manifest
            .cases
            .iter()
            .filter(|c| c.split == split)
            .map(|c| self.dir.join(&c.graph))
            .collect();
        read_graphs(&paths)
    }
}

/// Reads graph files; a graph without a case id takes its file stem.
pub fn read_graphs(paths: &[PathBuf]) -> anyhow::Result<Vec<IndividualGraph>> {
    paths
        .iter()
        .map(|p| {
            let (mut g, _) = IndividualGraph::read(p)?;
            if g.case_id.is_none() {
                g.case_id = p.file_stem().map(|s| s.to_string_lossy().into_owned());
            }
            Ok(g)
        })
        .collect()
}

/// Explicit files win; otherwise the dataset split is used.
pub fn select(
    explicit: &[PathBuf],
    dataset: Option<&Dataset>,
    split: Split,
    what: &str,
) -> crate::config::CliResult<Vec<IndividualGraph>> {
    if !explicit.is_empty() {
        return Ok(read_graphs(explicit)?);
    }
    match dataset {
        Some(d) => Ok(d.graphs(split)?),
        None => Err(crate::config::Failure::usage(format!(
            "no {what} given: pass --dataset or graph files"
        ))),
    }
}
