//! Stereo datasets laid out as `left/` and `right/` directories of
//! identically named PGM frames.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePair {
    pub index: usize,
    pub stem: String,
    pub left: PathBuf,
    pub right: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub frames: Vec<FramePair>,
    /// Frames present on only one side.
    pub unpaired: Vec<String>,
}

fn pgm_names(dir: &Path) -> io::Result<Vec<String>> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.to_ascii_lowercase().ends_with(".pgm"))
        .collect();
    names.sort();
    Ok(names)
}

pub fn scan(root: &Path) -> Result<Dataset> {
    let (ldir, rdir) = (root.join("left"), root.join("right"));
    if !ldir.is_dir() || !rdir.is_dir() {
        bail!("{} must contain left/ and right/ directories", root.display());
    }
    let left = pgm_names(&ldir).with_context(|| format!("listing {}", ldir.display()))?;
    let right = pgm_names(&rdir).with_context(|| format!("listing {}", rdir.display()))?;
    let mut ds = Dataset::default();
    for name in &left {
        if right.binary_search(name).is_ok() {
            let stem = Path::new(name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| name.clone());
            ds.frames.push(FramePair {
                index: ds.frames.len(),
                stem,
                left: ldir.join(name),
                right: rdir.join(name),
            });
        } else {
            ds.unpaired.push(format!("right/{name}"));
        }
    }
    ds.unpaired.extend(
        right
            .iter()
            .filter(|n| left.binary_search(n).is_err())
            .map(|n| format!("left/{n}")),
    );
    Ok(ds)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
