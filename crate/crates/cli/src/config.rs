use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Real,
    Mock,
}

/// Settings from the config file, all optional. Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model_dir: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    #[serde(default)]
    pub frequencies: Vec<PathBuf>,
    pub k: Option<usize>,
    pub window: Option<usize>,
    pub backend: Option<BackendKind>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: FileConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.model_dir.as_mut().map(resolve);
        config.embeddings.as_mut().map(resolve);
        config.frequencies.iter_mut().for_each(resolve);
        Ok(config)
    }
}

/// Effective settings after flags override the file.
#[derive(Debug, Clone)]
pub struct Config {
    pub model_dir: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub frequencies: Vec<PathBuf>,
    pub k: usize,
    pub window: usize,
    pub backend: BackendKind,
    pub seed: u64,
}

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_SEED: u64 = 7;
