use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::image::png_dimensions;

/// One scene folder holding `lr0.png`/`lr1.png` (low-res left/right) and
/// `hr0.png`/`hr1.png` (high-res left/right).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetEntry {
    pub scene: String,
    pub lr_left: PathBuf,
    pub lr_right: PathBuf,
    pub hr_left: PathBuf,
    pub hr_right: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetScan {
    pub entries: Vec<DatasetEntry>,
    /// One line per skipped scene.
    pub warnings: Vec<String>,
}

fn check_scene(dir: &Path, scene: &str, scale: usize) -> std::result::Result<DatasetEntry, String> {
    let entry = DatasetEntry {
        scene: scene.to_string(),
        lr_left: dir.join("lr0.png"),
        lr_right: dir.join("lr1.png"),
        hr_left: dir.join("hr0.png"),
        hr_right: dir.join("hr1.png"),
    };
    let dims = |p: &Path| {
        png_dimensions(p).map_err(|e| format!("scene `{scene}`: {e}"))
    };
    let lr0 = dims(&entry.lr_left)?;
    let lr1 = dims(&entry.lr_right)?;
    let hr0 = dims(&entry.hr_left)?;
    let hr1 = dims(&entry.hr_right)?;
    if lr0 != lr1 {
        return Err(format!("scene `{scene}`: LR left {lr0:?} and right {lr1:?} differ"));
    }
    if hr0 != hr1 {
        return Err(format!("scene `{scene}`: HR left {hr0:?} and right {hr1:?} differ"));
    }
    if hr0 != (lr0.0 * scale, lr0.1 * scale) {
        return Err(format!(
            "scene `{scene}`: HR {}x{} is not {scale}x LR {}x{}",
            hr0.0, hr0.1, lr0.0, lr0.1
        ));
    }
    Ok(entry)
}

/// Lists valid scenes under `root` in lexicographic order. Scenes with
/// missing files or inconsistent dimensions are skipped and reported.
pub fn scan_dataset(root: impl AsRef<Path>, scale: usize) -> Result<DatasetScan> {
    let root = root.as_ref();
    let mut scenes: Vec<(String, PathBuf)> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_dir()).unwrap_or(false))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
        .collect();
    scenes.sort();

    let mut scan = DatasetScan::default();
    for (scene, dir) in scenes {
        match check_scene(&dir, &scene, scale) {
            Ok(entry) => scan.entries.push(entry),
            Err(w) => scan.warnings.push(w),
        }
    }
    Ok(scan)
}
