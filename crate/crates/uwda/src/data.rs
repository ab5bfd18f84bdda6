//! Loading datasets from disk into the core types.

use std::path::Path;

use uwda_core::adapt::{TonedImage, TonedPair};
use uwda_core::image::normalize;
use uwda_core::synth::{classify_tone, DatasetManifest, ManifestRecord, Role, Split};
use uwda_core::{NormImage, UnitImage};

use crate::error::{CliError, Result};
use crate::formats::read_jsonl;
use crate::io::{load_dir, read_png};

pub const DATASET_MANIFEST: &str = "manifest.jsonl";

pub fn read_manifest(root: &Path) -> Result<DatasetManifest> {
    let path = root.join(DATASET_MANIFEST);
    let manifest = DatasetManifest { records: read_jsonl::<ManifestRecord>(&path)? };
    manifest.validate().map_err(|e| CliError::format(&path, e))?;
    Ok(manifest)
}

/// `(id, raw, reference)` for every pair of `split`; ids are raw paths.
pub fn load_pairs(root: &Path, split: Split) -> Result<Vec<(String, UnitImage, UnitImage, ManifestRecord)>> {
    let manifest = read_manifest(root)?;
    manifest
        .select(Role::SyntheticPair, split)
        .map(|r| {
            let reference = r.reference.as_deref().expect("validated pair record");
            Ok((r.path.clone(), read_png(&root.join(&r.path))?, read_png(&root.join(reference))?, r.clone()))
        })
        .collect()
}

pub fn training_pairs(root: &Path) -> Result<Vec<TonedPair>> {
    let pairs = load_pairs(root, Split::Train)?;
    if pairs.is_empty() {
        return Err(uwda_core::Error::EmptyDataset(format!("no training pairs under {}", root.display())).into());
    }
    Ok(pairs
        .into_iter()
        .map(|(_, x, y, r)| TonedPair { raw: normalize(&x), reference: normalize(&y), tone: r.tone })
        .collect())
}

pub fn test_pairs(root: &Path) -> Result<Vec<(String, NormImage, UnitImage)>> {
    Ok(load_pairs(root, Split::Test)?.into_iter().map(|(id, x, y, _)| (id, normalize(&x), y)).collect())
}

/// Real images with ids, normalized.
pub fn load_real(dir: &Path) -> Result<Vec<(String, NormImage)>> {
    Ok(load_dir(dir)?.into_iter().map(|(id, img)| (id, normalize(&img))).collect())
}

/// Real images tagged with their measured tone.
pub fn load_real_toned(dir: &Path) -> Result<(Vec<String>, Vec<TonedImage>)> {
    let imgs = load_dir(dir)?;
    let ids = imgs.iter().map(|(id, _)| id.clone()).collect();
    let toned = imgs.iter().map(|(_, img)| TonedImage { image: normalize(img), tone: classify_tone(img) }).collect();
    Ok((ids, toned))
}
