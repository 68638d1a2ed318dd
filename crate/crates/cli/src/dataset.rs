use std::path::{Path, PathBuf};

use fstg_core::volume::nifti;
use fstg_core::{LabelMask, Plane, Volume};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::run::Run;

/// Input files as (path, bytes), kept for the manifest.
pub type Read = Vec<(PathBuf, Vec<u8>)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub plane: Plane,
    /// NIfTI image, relative to the manifest directory.
    pub image: String,
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub id: String,
    pub views: Vec<ViewEntry>,
    pub evi: u8,
    pub mfi: u8,
    pub site: usize,
    pub split: SplitTag,
}

impl CaseEntry {
    pub fn view(&self, plane: Plane) -> Option<&ViewEntry> {
        self.views.iter().find(|v| v.plane == plane)
    }

    pub fn label(&self, task: fstg_core::metrics::Task) -> u8 {
        match task {
            fstg_core::metrics::Task::Evi => self.evi,
            fstg_core::metrics::Task::Mfi => self.mfi,
        }
    }
}

/// Per-case file paths, labels, plane tags, site and split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: u32,
    pub cases: Vec<CaseEntry>,
}

pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
}

impl DatasetManifest {
    /// Parses and checks a manifest: non-empty, binary labels, unique
    /// file-safe ids.
    pub fn parse(bytes: &[u8]) -> Result<Self, String> {
        let manifest: DatasetManifest = serde_json::from_slice(bytes).map_err(|e| e.to_string())?;
        if manifest.cases.is_empty() {
            return Err("no cases listed".into());
        }
        let mut seen = std::collections::HashSet::new();
        for c in &manifest.cases {
            if c.evi > 1 || c.mfi > 1 {
                return Err(format!("case {} has a non-binary label", c.id));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(format!("duplicate case id {}", c.id));
            }
            if c.id.contains(['/', '\\', '\t', '\n']) || c.id.is_empty() {
                return Err(format!("case id {:?} is not file-safe", c.id));
            }
        }
        Ok(manifest)
    }
}

impl Dataset {
    pub fn manifest_path(run: &Run) -> PathBuf {
        run.cfg
            .dataset_manifest
            .clone()
            .unwrap_or_else(|| run.path("phantom/manifest.json"))
    }

    pub fn load(run: &mut Run) -> CliResult<Self> {
        let path = Self::manifest_path(run);
        let bytes = run.read_noted(&path)?;
        let manifest = DatasetManifest::parse(&bytes)
            .map_err(|e| CliError::Config(format!("dataset manifest {}: {e}", path.display())))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Dataset { manifest, root })
    }

    pub fn ids(&self, splits: &[SplitTag]) -> Vec<&CaseEntry> {
        self.manifest
            .cases
            .iter()
            .filter(|c| splits.contains(&c.split))
            .collect()
    }

    /// Image and mask of one view; the mask is binarized at 0.5.
    pub fn read_view(&self, run: &Run, view: &ViewEntry) -> CliResult<(Volume, LabelMask, Read)> {
        let img_path = self.root.join(&view.image);
        let mask_path = self.root.join(&view.mask);
        let img_bytes = run.read(&img_path)?;
        let mask_bytes = run.read(&mask_path)?;
        let vol = nifti::decode(&img_bytes, view.plane)?;
        let mask = LabelMask::from_volume(&nifti::decode(&mask_bytes, view.plane)?);
        Ok((vol, mask, vec![(img_path, img_bytes), (mask_path, mask_bytes)]))
    }
}

pub fn patch_rel(harmonized: bool, id: &str, plane: Plane) -> String {
    let kind = if harmonized { "harmonized" } else { "raw" };
    format!("patches/{kind}/{id}_{plane}.fstg")
}

pub fn feature_rel(harmonized: bool) -> String {
    format!("features/{}.feat", if harmonized { "harmonized" } else { "raw" })
}

pub fn harmonizer_rel(plane: Plane) -> String {
    format!("harmonizer/{plane}.fhae")
}
