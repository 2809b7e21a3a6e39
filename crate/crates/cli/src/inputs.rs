use std::path::{Path, PathBuf};

use dyntomo::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const SERIES_EXT: &str = ".dwt";
pub const RADIOGRAPH_EXT: &str = ".rad.dwt";

/// Series files (`*.dwt` but not `*.rad.dwt`) or radiograph files.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Series,
    Radiographs,
}

impl Kind {
    fn accepts(self, name: &str) -> bool {
        match self {
            Kind::Series => name.ends_with(SERIES_EXT) && !name.ends_with(RADIOGRAPH_EXT),
            Kind::Radiographs => name.ends_with(RADIOGRAPH_EXT),
        }
    }

    fn ext(self) -> &'static str {
        match self {
            Kind::Series => SERIES_EXT,
            Kind::Radiographs => RADIOGRAPH_EXT,
        }
    }
}

fn file_name(p: &Path) -> &str {
    p.file_name().and_then(|n| n.to_str()).unwrap_or("")
}

/// Expands directories, keeps files of `kind`, and sorts by file name.
pub fn collect(paths: &[PathBuf], kind: Kind) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in std::fs::read_dir(p)? {
                let path = entry?.path();
                if path.is_file() && kind.accepts(file_name(&path)) {
                    out.push(path);
                }
            }
        } else if p.is_file() {
            if !kind.accepts(file_name(p)) {
                return Err(Error::Invalid(format!("{} is not a `*{}` file", p.display(), kind.ext())));
            }
            out.push(p.clone());
        } else {
            return Err(Error::Invalid(format!("{} does not exist", p.display())));
        }
    }
    out.sort_by(|a, b| file_name(a).cmp(file_name(b)).then_with(|| a.cmp(b)));
    out.dedup();
    if out.is_empty() {
        return Err(Error::Invalid(format!("no `*{}` inputs found", kind.ext())));
    }
    Ok(out)
}

/// File name without the kind's extension.
pub fn stem(p: &Path, kind: Kind) -> String {
    let name = file_name(p);
    name.strip_suffix(kind.ext()).unwrap_or(name).to_string()
}

/// Trailing decimal number of a stem (`series_0042` -> 42).
pub fn trailing_index(stem: &str) -> Option<u64> {
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    stem[stem.len() - digits..].parse().ok()
}

/// `source` itself when it is a file, else `source/<name>`.
pub fn matching(source: &Path, name: &str) -> Result<PathBuf> {
    let p = if source.is_dir() { source.join(name) } else { source.to_path_buf() };
    if !p.is_file() {
        return Err(Error::Invalid(format!("{} does not exist", p.display())));
    }
    Ok(p)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn read_json_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}
