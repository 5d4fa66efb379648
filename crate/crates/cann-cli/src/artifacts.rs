//! Output-directory layout and artifact files. The directory carries a
//! schema version marker so stale artifacts from an older layout are
//! detected instead of silently mixed.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cann::eval::Model;
use cann::features::io::{read_features, FeatureTable};
use cann::features::recipe::PreprocessingRecipe;
use serde::{Deserialize, Serialize};

pub const LAYOUT_VERSION: &str = "cann-out/1";
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

/// Create the output directory (if needed) and check/write its version
/// marker.
pub fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let marker = out.join("VERSION");
    if marker.exists() {
        let existing = std::fs::read_to_string(&marker)?;
        if existing.trim() != LAYOUT_VERSION {
            bail!(
                "output directory {} uses layout '{}', this build expects '{}'; \
                 use a fresh directory",
                out.display(),
                existing.trim(),
                LAYOUT_VERSION
            );
        }
    } else {
        std::fs::write(&marker, format!("{LAYOUT_VERSION}\n"))?;
    }
    Ok(())
}

/// A fitted model with everything needed to score new data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    pub name: String,
    pub head: String,
    pub mode: String,
    pub model: Model,
    /// Embedded preprocessing recipe; present so scoring is self-contained.
    pub recipe: Option<PreprocessingRecipe>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelArtifact> {
    let text = std::fs::read_to_string(path).with_context(|| {
        format!(
            "missing model artifact {} (run fit-glm or fit-cann first)",
            path.display()
        )
    })?;
    let artifact: ModelArtifact = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse model artifact {}", path.display()))?;
    if artifact.schema_version != ARTIFACT_SCHEMA_VERSION {
        bail!(
            "model artifact {} has schema version {}, expected {}",
            path.display(),
            artifact.schema_version,
            ARTIFACT_SCHEMA_VERSION
        );
    }
    Ok(artifact)
}

pub fn features_path(out: &Path, split: &str) -> PathBuf {
    out.join(format!("features_{split}.csv"))
}

pub fn load_features(out: &Path, split: &str) -> Result<FeatureTable> {
    let path = features_path(out, split);
    if !path.exists() {
        bail!(
            "missing feature file {} (run the prepare command first)",
            path.display()
        );
    }
    Ok(read_features(&path)?)
}

pub fn load_recipe(out: &Path) -> Result<PreprocessingRecipe> {
    let path = out.join("recipe.json");
    let text = std::fs::read_to_string(&path).with_context(|| {
        format!(
            "missing preprocessing recipe {} (run the prepare command first)",
            path.display()
        )
    })?;
    Ok(serde_json::from_str(&text)?)
}
