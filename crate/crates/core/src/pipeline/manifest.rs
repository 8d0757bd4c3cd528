use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution channel a video went through before it was collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Native,
    Whatsapp,
    Youtube,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Native, Category::Whatsapp, Category::Youtube];

    pub fn name(self) -> &'static str {
        match self {
            Category::Native => "native",
            Category::Whatsapp => "whatsapp",
            Category::Youtube => "youtube",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Category::Native => "Native",
            Category::Whatsapp => "WhatsApp",
            Category::Youtube => "YouTube",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "native" => Ok(Category::Native),
            "whatsapp" => Ok(Category::Whatsapp),
            "youtube" => Ok(Category::Youtube),
            other => Err(format!("unknown category {other:?} (expected native, whatsapp or youtube)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub video_id: String,
    pub class_id: usize,
    pub category: Category,
    pub audio_path: PathBuf,
    pub frames_dir: PathBuf,
}

/// Validated list of videos. Relative paths are resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    num_classes: usize,
}

#[derive(Debug, Deserialize)]
struct Row {
    video_id: String,
    class_id: String,
    category: String,
    audio_path: String,
    frames_dir: String,
}

impl DatasetManifest {
    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn video_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.video_id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.class_id).collect()
    }

    /// Categories present, in canonical order.
    pub fn categories(&self) -> Vec<Category> {
        let present: BTreeSet<Category> = self.entries.iter().map(|e| e.category).collect();
        present.into_iter().collect()
    }

    pub fn class_ids(&self) -> Vec<String> {
        (0..self.num_classes).map(|c| c.to_string()).collect()
    }

    /// Builds and validates a manifest from in-memory entries, reporting
    /// every violation at once.
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut problems = Vec::new();
        check_entries(&entries, true, &mut problems);
        if !problems.is_empty() {
            return Err(Error::Manifest(problems));
        }
        Ok(Self::new_unchecked(entries))
    }

    fn new_unchecked(entries: Vec<ManifestEntry>) -> Self {
        let num_classes = entries.iter().map(|e| e.class_id + 1).max().unwrap_or(0);
        Self {
            entries,
            num_classes,
        }
    }

    /// CSV with absolute paths, in the same column layout as the input.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("video_id,class_id,category,audio_path,frames_dir\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.video_id,
                e.class_id,
                e.category,
                e.audio_path.display(),
                e.frames_dir.display()
            ));
        }
        out
    }
}

fn check_entries(entries: &[ManifestEntry], check_paths: bool, problems: &mut Vec<String>) {
    if entries.is_empty() {
        problems.push("manifest lists no videos".into());
        return;
    }
    let mut seen = HashSet::new();
    for e in entries {
        if !seen.insert(e.video_id.as_str()) {
            problems.push(format!("duplicate video_id {:?}", e.video_id));
        }
        if !check_paths {
            continue;
        }
        if !e.audio_path.is_file() {
            problems.push(format!("{}: audio file {} does not exist", e.video_id, e.audio_path.display()));
        }
        if !e.frames_dir.is_dir() {
            problems.push(format!("{}: frames directory {} does not exist", e.video_id, e.frames_dir.display()));
        }
    }
    let labels: BTreeSet<usize> = entries.iter().map(|e| e.class_id).collect();
    let max = *labels.iter().next_back().unwrap();
    if labels.len() != max + 1 {
        let missing: Vec<String> = (0..=max).filter(|c| !labels.contains(c)).map(|c| c.to_string()).collect();
        problems.push(format!(
            "class ids must be contiguous from 0; missing {}",
            missing.join(", ")
        ));
    }
}

/// Parses and validates a manifest CSV with header
/// `video_id,class_id,category,audio_path,frames_dir`.
pub fn validate_manifest(path: &Path) -> Result<DatasetManifest> {
    parse_manifest(path, true)
}

/// Reads a manifest copied into an artifacts directory; file existence is
/// not rechecked since extraction already happened.
pub(crate) fn read_manifest_copy(path: &Path) -> Result<DatasetManifest> {
    parse_manifest(path, false)
}

fn parse_manifest(path: &Path, check_paths: bool) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = std::path::absolute(path.parent().unwrap_or(Path::new("."))).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut problems = Vec::new();
    let mut entries = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let class_id = match row.class_id.parse::<usize>() {
            Ok(c) => c,
            Err(_) => {
                problems.push(format!("line {line}: class_id {:?} is not a non-negative integer", row.class_id));
                continue;
            }
        };
        let category = match row.category.parse::<Category>() {
            Ok(c) => c,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        if row.video_id.is_empty() || row.video_id.contains([',', '/', '\\']) {
            problems.push(format!("line {line}: video_id {:?} must be non-empty without , / or \\", row.video_id));
            continue;
        }
        entries.push(ManifestEntry {
            video_id: row.video_id,
            class_id,
            category,
            audio_path: base.join(row.audio_path),
            frames_dir: base.join(row.frames_dir),
        });
    }
    check_entries(&entries, check_paths, &mut problems);
    if !problems.is_empty() {
        return Err(Error::Manifest(problems));
    }
    Ok(DatasetManifest::new_unchecked(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(rows: &[(&str, &str)]) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("f")).unwrap();
        fs::write(dir.path().join("a.wav"), b"").unwrap();
        let mut text = String::from("video_id,class_id,category,audio_path,frames_dir\n");
        for (id, class) in rows {
            text.push_str(&format!("{id},{class},native,a.wav,f\n"));
        }
        let path = dir.path().join("manifest.csv");
        fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn well_formed_manifest() {
        let (_dir, path) = fixture(&[("v1", "0"), ("v2", "1")]);
        let m = validate_manifest(&path).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.num_classes(), 2);
        assert_eq!(m.categories(), vec![Category::Native]);
        assert!(m.entries()[0].audio_path.is_absolute());
    }

    #[test]
    fn duplicate_id_is_named() {
        let (_dir, path) = fixture(&[("v1", "0"), ("v1", "1")]);
        let err = validate_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate video_id \"v1\""), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn non_contiguous_labels() {
        let (_dir, path) = fixture(&[("v1", "0"), ("v2", "2")]);
        let err = validate_manifest(&path).unwrap_err();
        assert!(err.to_string().contains("contiguous"), "{err}");
    }

    #[test]
    fn every_violation_is_listed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(
            &path,
            "video_id,class_id,category,audio_path,frames_dir\n\
             v1,0,native,missing.wav,nodir\n\
             v1,x,native,missing.wav,nodir\n\
             v3,1,tiktok,missing.wav,nodir\n",
        )
        .unwrap();
        match validate_manifest(&path).unwrap_err() {
            Error::Manifest(problems) => {
                assert!(problems.iter().any(|p| p.contains("not a non-negative integer")));
                assert!(problems.iter().any(|p| p.contains("unknown category")));
                assert!(problems.iter().any(|p| p.contains("audio file")));
                assert!(problems.iter().any(|p| p.contains("frames directory")));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
