//! On-disk documents: episodes, reports, action logs and datasets.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gen::{DifficultyParams, Split};
use crate::sim::EpisodeConfig;

/// Environment variable naming the default dataset root.
pub const DATASET_ROOT_VAR: &str = "REARRANGE_DATA";
pub const MANIFEST_FILE: &str = "manifest.json";
const EPISODE_DIR: &str = "episodes";

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{}: {cause}", path.display())]
    Io { path: PathBuf, cause: io::Error },
    #[error("{}: {cause}", path.display())]
    Parse {
        path: PathBuf,
        cause: serde_json::Error,
    },
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let text = fs::read_to_string(path).map_err(|cause| FileError::Io {
        path: path.to_path_buf(),
        cause,
    })?;
    serde_json::from_str(&text).map_err(|cause| FileError::Parse {
        path: path.to_path_buf(),
        cause,
    })
}

/// Writes pretty JSON, creating parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let io_err = |cause| FileError::Io {
        path: path.to_path_buf(),
        cause,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("documents serialise");
    text.push('\n');
    fs::write(path, text).map_err(io_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub seed: u64,
    /// Relative to the dataset directory.
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub split: Split,
    pub params: DifficultyParams,
    pub episodes: Vec<ManifestEntry>,
}

fn episode_file(ep: &EpisodeConfig) -> String {
    format!("{EPISODE_DIR}/{}.json", ep.id)
}

/// Writes a manifest plus one file per episode under `dir`.
pub fn write_dataset(
    dir: &Path,
    split: Split,
    params: &DifficultyParams,
    episodes: &[EpisodeConfig],
) -> Result<Manifest, FileError> {
    let manifest = Manifest {
        split,
        params: params.clone(),
        episodes: episodes
            .iter()
            .map(|ep| ManifestEntry {
                id: ep.id.clone(),
                seed: ep.seed,
                file: episode_file(ep),
            })
            .collect(),
    };
    for (ep, entry) in episodes.iter().zip(&manifest.episodes) {
        write_json(&dir.join(&entry.file), ep)?;
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<(Manifest, Vec<EpisodeConfig>), FileError> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let episodes = manifest
        .episodes
        .iter()
        .map(|e| read_json(&dir.join(&e.file)))
        .collect::<Result<_, _>>()?;
    Ok((manifest, episodes))
}

/// Episodes from a single episode file or a dataset directory.
pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeConfig>, FileError> {
    if path.is_dir() {
        Ok(read_dataset(path)?.1)
    } else {
        Ok(vec![read_json(path)?])
    }
}

/// `explicit`, else the dataset root from the environment, else `data`.
pub fn dataset_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATASET_ROOT_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}
