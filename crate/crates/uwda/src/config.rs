//! Run configuration files (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use uwda_core::pipeline::RunConfig;

use crate::error::{CliError, Result};

/// Environment variable naming the config file when `--config` is absent.
pub const CONFIG_ENV: &str = "UWDA_CONFIG";

/// File picked up from the working directory when neither is given.
pub const DEFAULT_CONFIG: &str = "uwda.toml";

/// `--config` wins, then the environment, then `uwda.toml` if present.
pub fn resolve_path(flag: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = flag {
        return Some(p.to_path_buf());
    }
    if let Some(p) = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()) {
        return Some(PathBuf::from(p));
    }
    Path::new(DEFAULT_CONFIG).exists().then(|| PathBuf::from(DEFAULT_CONFIG))
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Defaults when no file is configured.
pub fn load(flag: Option<&Path>) -> Result<RunConfig> {
    match resolve_path(flag) {
        None => Ok(RunConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))?;
            parse(&text).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {}", path.display(), m)),
                other => other,
            })
        }
    }
}

pub fn to_toml(cfg: &RunConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| CliError::Config(e.to_string()))
}

/// Checks that a configured input exists before any work starts.
pub fn existing(path: &str, field: &str) -> Result<PathBuf> {
    let p = PathBuf::from(path);
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::Config(format!("{} `{}` does not exist", field, path)))
    }
}
