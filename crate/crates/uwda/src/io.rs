//! 8-bit PNG read/write and image directories.

use std::fs;
use std::path::{Path, PathBuf};

use uwda_core::image::ImageBuf;
use uwda_core::UnitImage;

use crate::error::{CliError, Result};

pub fn read_png(path: &Path) -> Result<UnitImage> {
    let img = image::open(path).map_err(|e| CliError::format(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    Ok(UnitImage::new(ImageBuf::new(h as usize, w as usize, data)?)?)
}

pub fn write_png(path: &Path, img: &UnitImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let bytes: Vec<u8> = img.data().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    let (h, w) = img.dims();
    let buf = image::RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer length matches dims");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|e| CliError::format(path, e))
}

/// PNG files directly inside `dir`, sorted by name.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// `(file stem, image)` for every PNG in `dir`.
pub fn load_dir(dir: &Path) -> Result<Vec<(String, UnitImage)>> {
    let paths = list_pngs(dir)?;
    if paths.is_empty() {
        return Err(uwda_core::Error::EmptyDataset(format!("no PNG files in {}", dir.display())).into());
    }
    paths
        .iter()
        .map(|p| Ok((p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), read_png(p)?)))
        .collect()
}
