//! Dataset manifests: a small plain-text format listing image files with
//! their class and split. Chosen over a binary index for diff-ability and
//! hand editing.
//!
//! ```text
//! # comment lines and blanks are skipped
//! dims,64,64,1
//! path,class_id,split
//! images/maj_0.png,B,train
//! images/min_0.png,other,test
//! ```
//!
//! The first significant line fixes the target dimensions, the second is
//! the fixed column header, and each row names one image file (path
//! relative to the manifest's directory). The train split must be pure:
//! training is majority-only, so exactly one class_id may appear there.

use crate::error::{Error, Result};
use crate::image::Dims;
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Image path, relative to the manifest's directory.
    pub path: PathBuf,
    pub class_id: String,
    pub split: Split,
}

/// Validated dataset manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    dims: Dims,
    entries: Vec<ManifestEntry>,
    majority_class: String,
    /// Directory image paths resolve against.
    base_dir: PathBuf,
}

impl DatasetManifest {
    /// Builds a manifest from parts, enforcing the format's invariants:
    /// at least one entry, unique paths, and a pure train split.
    pub fn new(dims: Dims, entries: Vec<ManifestEntry>, base_dir: PathBuf) -> Result<Self> {
        let invalid = |reason: String| Error::ManifestInvalid {
            path: base_dir.clone(),
            reason,
        };
        dims.validate()?;
        if entries.is_empty() {
            return Err(invalid("no entries".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.path) {
                return Err(invalid(format!("duplicate path {}", e.path.display())));
            }
        }
        let train_classes: HashSet<&str> = entries
            .iter()
            .filter(|e| e.split == Split::Train)
            .map(|e| e.class_id.as_str())
            .collect();
        let majority_class = match train_classes.len() {
            0 => {
                return Err(invalid(
                    "no train entries; cannot fix the majority class".into(),
                ))
            }
            1 => train_classes.into_iter().next().unwrap().to_string(),
            n => {
                let mut names: Vec<&str> = train_classes.into_iter().collect();
                names.sort_unstable();
                return Err(invalid(format!(
                    "train split mixes {n} class_ids ({}); training is majority-only",
                    names.join(", ")
                )));
            }
        };
        Ok(DatasetManifest {
            dims,
            entries,
            majority_class,
            base_dir,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// The single class_id present in the train split.
    pub fn majority_class(&self) -> &str {
        &self.majority_class
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Absolute (or base-relative) location of an entry's image file.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    pub fn train_entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.split == Split::Train)
    }

    pub fn test_entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.split == Split::Test)
    }
}

/// Parses manifest text. `origin` names the source in errors; `base_dir`
/// is the directory image paths resolve against.
pub fn parse_manifest_str(text: &str, origin: &Path, base_dir: &Path) -> Result<DatasetManifest> {
    let fail = |line: usize, reason: String| Error::ManifestParse {
        path: origin.to_path_buf(),
        line,
        reason,
    };

    let mut dims: Option<Dims> = None;
    let mut header_seen = false;
    let mut entries = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if dims.is_none() {
            if fields.len() != 4 || fields[0] != "dims" {
                return Err(fail(
                    line_no,
                    format!("expected `dims,H,W,C` as the first significant line, got `{line}`"),
                ));
            }
            let parse = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|_| fail(line_no, format!("{what} `{s}` is not a count")))
            };
            dims = Some(Dims::new(
                parse(fields[1], "height")?,
                parse(fields[2], "width")?,
                parse(fields[3], "channels")?,
            ));
            continue;
        }
        if !header_seen {
            if fields != ["path", "class_id", "split"] {
                return Err(fail(
                    line_no,
                    format!("expected header `path,class_id,split`, got `{line}`"),
                ));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(fail(
                line_no,
                format!("expected 3 comma-separated fields, got {}", fields.len()),
            ));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(fail(line_no, "path and class_id must be non-empty".into()));
        }
        let split = match fields[2] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(fail(
                    line_no,
                    format!("split must be `train` or `test`, got `{other}`"),
                ))
            }
        };
        entries.push(ManifestEntry {
            path: PathBuf::from(fields[0]),
            class_id: fields[1].to_string(),
            split,
        });
    }

    let dims = dims.ok_or_else(|| Error::ManifestInvalid {
        path: origin.to_path_buf(),
        reason: "no entries".into(),
    })?;
    DatasetManifest::new(dims, entries, base_dir.to_path_buf()).map_err(|e| match e {
        // attribute invariant failures to the parsed file, not base_dir
        Error::ManifestInvalid { reason, .. } => Error::ManifestInvalid {
            path: origin.to_path_buf(),
            reason,
        },
        other => other,
    })
}

/// Reads and parses a manifest file, then checks every referenced image
/// file exists. Paths resolve against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile {
                path: path.to_path_buf(),
            }
        } else {
            Error::io(path, e)
        }
    })?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = parse_manifest_str(&text, path, base_dir)?;
    for entry in manifest.entries() {
        let target = manifest.resolve(entry);
        if !target.is_file() {
            return Err(Error::MissingFile { path: target });
        }
    }
    Ok(manifest)
}

/// Renders a manifest back to its file format.
pub fn manifest_to_string(manifest: &DatasetManifest) -> String {
    let d = manifest.dims();
    let mut out = format!(
        "dims,{},{},{}\npath,class_id,split\n",
        d.height, d.width, d.channels
    );
    for e in manifest.entries() {
        out.push_str(&format!(
            "{},{},{}\n",
            e.path.display(),
            e.class_id,
            e.split
        ));
    }
    out
}

/// SHA-256 of manifest text, hex-encoded; recorded as dataset provenance.
pub fn manifest_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
