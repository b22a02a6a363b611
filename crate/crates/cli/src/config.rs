use std::path::{Path, PathBuf};

use anyhow::Context;
use ctam_core::vit::ViTConfig;
use serde::Deserialize;

use crate::Usage;

/// Job file accepted by `--config`. Every field is optional; flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Option<String>,
    pub inputs: Option<Vec<PathBuf>>,
    pub model: Option<PathBuf>,
    pub vit: Option<ViTConfig>,
    pub preset: Option<u8>,
    pub presets: Option<Vec<u8>>,
    pub k: Option<f64>,
    pub gamma: Option<f64>,
    pub layers: Option<Vec<usize>>,
    pub levels: Option<u8>,
    pub grid: Option<String>,
    pub tiles: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub synthetic: Option<usize>,
}

impl JobConfig {
    pub fn load(path: Option<&Path>, command: &str) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(JobConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: JobConfig =
            serde_json::from_str(&text).map_err(|e| Usage(format!("config {}: {e}", path.display())))?;
        if let Some(c) = &cfg.command {
            if c != command {
                return Err(Usage(format!("config is for `{c}`, not `{command}`")).into());
            }
        }
        Ok(cfg)
    }
}

/// Parses `RxC` with both sides at least 1.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let r: usize = r.trim().parse().map_err(|_| format!("bad row count in `{s}`"))?;
    let c: usize = c.trim().parse().map_err(|_| format!("bad column count in `{s}`"))?;
    if r == 0 || c == 0 {
        return Err(format!("grid `{s}` must be at least 1x1"));
    }
    Ok((r, c))
}

pub fn grid_from(flag: Option<(usize, usize)>, file: Option<&str>) -> anyhow::Result<Option<(usize, usize)>> {
    match (flag, file) {
        (Some(g), _) => Ok(Some(g)),
        (None, Some(s)) => Ok(Some(parse_grid(s).map_err(Usage)?)),
        (None, None) => Ok(None),
    }
}
