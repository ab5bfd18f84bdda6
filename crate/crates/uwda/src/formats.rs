//! On-disk formats: JSON-lines manifests, the split manifest, checkpoint
//! file pairs and reports.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use uwda_core::adapt::{AdaptNets, SplitResult};
use uwda_core::pipeline::{Checkpoint, CheckpointManifest, CheckpointMeta, Checkpointable};

use crate::error::{CliError, Result};

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e))?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    create_parent(path)?;
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(|e| CliError::io(path, e))?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CliError::format(path, e))?;
        writeln!(f, "{}", line).map_err(|e| CliError::io(path, e))?;
    }
    f.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CliError::format(path, format!("line {}: {}", i + 1, e)))?);
    }
    Ok(out)
}

pub const SPLIT_MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub id: String,
    pub score: f64,
}

/// Persisted easy/hard split. `threshold` is what inference routes on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub version: u32,
    pub lambda: f64,
    pub threshold: f64,
    pub easy: Vec<SplitEntry>,
    pub hard: Vec<SplitEntry>,
}

impl SplitManifest {
    /// `ids[i]` names real image `i` of the split input.
    pub fn from_split(split: &SplitResult, ids: &[String]) -> Self {
        Self {
            version: SPLIT_MANIFEST_VERSION,
            lambda: split.lambda,
            threshold: split.threshold,
            easy: split.easy.iter().map(|s| SplitEntry { id: ids[s.index].clone(), score: s.score }).collect(),
            hard: split.hard.iter().map(|s| SplitEntry { id: ids[s.index].clone(), score: s.score }).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = read_json(path)?;
        if m.version != SPLIT_MANIFEST_VERSION {
            return Err(CliError::format(path, format!("split manifest version {} (expected {})", m.version, SPLIT_MANIFEST_VERSION)));
        }
        if !m.threshold.is_finite() {
            return Err(CliError::format(path, "threshold is not finite"));
        }
        Ok(m)
    }
}

/// `stem.json` (manifest) and `stem.bin` (parameters).
pub fn checkpoint_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

pub fn write_checkpoint(stem: &Path, ckpt: &Checkpoint) -> Result<()> {
    let (json, bin) = checkpoint_paths(stem);
    write_json(&json, &ckpt.manifest)?;
    fs::write(&bin, &ckpt.blob).map_err(|e| CliError::io(&bin, e))
}

pub fn read_checkpoint(stem: &Path) -> Result<Checkpoint> {
    let (json, bin) = checkpoint_paths(stem);
    let manifest: CheckpointManifest = read_json(&json)?;
    let blob = fs::read(&bin).map_err(|e| CliError::io(&bin, e))?;
    Ok(Checkpoint { manifest, blob })
}

pub fn save_model<M: Checkpointable>(stem: &Path, model: &M, meta: CheckpointMeta) -> Result<()> {
    write_checkpoint(stem, &Checkpoint::save(model, meta))
}

/// Loads a model, naming `what` when the files are missing.
pub fn load_model<M: Checkpointable>(stem: &Path, what: &str) -> Result<M> {
    let (json, _) = checkpoint_paths(stem);
    if !json.exists() {
        return Err(uwda_core::Error::MissingModel(format!("{} checkpoint {} not found", what, json.display())).into());
    }
    Ok(read_checkpoint(stem)?.load()?)
}

/// Writes all four networks of a phase as `<dir>/<prefix>_{translator,enhancer,critic_img,critic_feat}`.
pub fn save_nets(dir: &Path, prefix: &str, nets: &AdaptNets, meta: &CheckpointMeta) -> Result<()> {
    save_model(&dir.join(format!("{}_translator", prefix)), &nets.translator, meta.clone())?;
    save_model(&dir.join(format!("{}_enhancer", prefix)), &nets.enhancer, meta.clone())?;
    save_model(&dir.join(format!("{}_critic_img", prefix)), &nets.critic_img, meta.clone())?;
    save_model(&dir.join(format!("{}_critic_feat", prefix)), &nets.critic_feat, meta.clone())
}
