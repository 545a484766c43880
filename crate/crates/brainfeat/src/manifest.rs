//! Dataset manifests: `path,label,split,order_index` CSV files.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use brainfeat_core::recording::{ClassLabel, Split};
use thiserror::Error;
use walkdir::WalkDir;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: unknown label `{value}`")]
    UnknownLabel { row: usize, value: String },
    #[error("row {row}: unknown split `{value}`")]
    UnknownSplit { row: usize, value: String },
    #[error("row {row}: order_index `{value}` is not an integer")]
    BadOrderIndex { row: usize, value: String },
    #[error("duplicate path `{0}`")]
    DuplicatePath(String),
    #[error("duplicate order_index {0}")]
    DuplicateOrderIndex(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// As written in the manifest; relative paths resolve against its folder.
    pub path: String,
    pub label: ClassLabel,
    pub split: Split,
    pub order_index: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

pub const COLUMNS: [&str; 4] = ["path", "label", "split", "order_index"];

impl Manifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Recording id: the file stem of the entry path.
    pub fn recording_id(entry: &ManifestEntry) -> String {
        Path::new(&entry.path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.path.clone())
    }

    pub fn counts(&self) -> BTreeMap<(Split, ClassLabel), usize> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            *m.entry((e.split, e.label)).or_insert(0) += 1;
        }
        m
    }

    pub fn count_split(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }
}

/// Parses manifest CSV text; entries come back sorted by `order_index`.
pub fn parse_manifest<R: Read>(reader: R, base_dir: &Path) -> Result<Manifest, ManifestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut col = [0usize; 4];
    for (k, name) in COLUMNS.iter().enumerate() {
        col[k] = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(ManifestError::MissingColumn(name))?;
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |k: usize| rec.get(col[k]).unwrap_or_default().to_string();
        let path = get(0);
        let label = ClassLabel::parse(&get(1)).ok_or_else(|| ManifestError::UnknownLabel { row, value: get(1) })?;
        let split = Split::parse(&get(2)).ok_or_else(|| ManifestError::UnknownSplit { row, value: get(2) })?;
        let order_index = get(3)
            .parse::<i64>()
            .map_err(|_| ManifestError::BadOrderIndex { row, value: get(3) })?;
        if !seen.insert(path.clone()) {
            return Err(ManifestError::DuplicatePath(path));
        }
        entries.push(ManifestEntry {
            path,
            label,
            split,
            order_index,
        });
    }
    entries.sort_by_key(|e| e.order_index);
    if let Some(w) = entries.windows(2).find(|w| w[0].order_index == w[1].order_index) {
        return Err(ManifestError::DuplicateOrderIndex(w[0].order_index));
    }
    Ok(Manifest {
        entries,
        base_dir: base_dir.to_path_buf(),
    })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let file = std::fs::File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    parse_manifest(file, &base)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), ManifestError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COLUMNS)?;
    for e in entries {
        w.write_record([
            e.path.as_str(),
            e.label.as_str(),
            e.split.as_str(),
            &e.order_index.to_string(),
        ])?;
    }
    w.flush().map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Builds entries from a TUH Abnormal style tree
/// (`<root>/{train,eval}/{normal,abnormal}/.../*.edf`).
///
/// Order indices follow the sorted relative paths within each split, with
/// the development split first.
pub fn tuh_entries(root: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut found: Vec<(Split, String, ClassLabel)> = Vec::new();
    for item in WalkDir::new(root).sort_by_file_name() {
        let item = item.map_err(|e| ManifestError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        let p = item.path();
        if !p.extension().is_some_and(|x| x.eq_ignore_ascii_case("edf")) {
            continue;
        }
        let rel = p.strip_prefix(root).unwrap_or(p);
        let parts: Vec<String> = rel.iter().map(|c| c.to_string_lossy().to_ascii_lowercase()).collect();
        let split = parts.iter().find_map(|c| Split::parse(c));
        let label = parts.iter().find_map(|c| match c.as_str() {
            "normal" | "abnormal" => ClassLabel::parse(c),
            _ => None,
        });
        if let (Some(split), Some(label)) = (split, label) {
            found.push((split, rel.to_string_lossy().replace('\\', "/"), label));
        }
    }
    found.sort();
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(i, (split, path, label))| ManifestEntry {
            path,
            label,
            split,
            order_index: i as i64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Manifest, ManifestError> {
        parse_manifest(text.as_bytes(), Path::new("/data"))
    }

    #[test]
    fn four_rows_with_aliases() {
        let m = parse(
            "path,label,split,order_index\n\
             c.edf,normal,eval,3\n\
             a.edf,abnormal,dev,1\n\
             b.edf,non-pathological,development,2\n\
             d.edf,pathological,evaluation,4\n",
        )
        .unwrap();
        let paths: Vec<&str> = m.entries.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["a.edf", "b.edf", "c.edf", "d.edf"]);
        assert_eq!(m.entries[0].label, ClassLabel::Pathological);
        assert_eq!(m.count_split(Split::Development), 2);
        assert_eq!(m.count_split(Split::Evaluation), 2);
        assert_eq!(m.resolve(&m.entries[0]), PathBuf::from("/data/a.edf"));
        assert_eq!(Manifest::recording_id(&m.entries[2]), "c");
        assert_eq!(m.counts()[&(Split::Development, ClassLabel::Pathological)], 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse("path,label,split\na,normal,dev\n"),
            Err(ManifestError::MissingColumn("order_index"))
        ));
        assert!(matches!(
            parse("path,label,split,order_index\na,weird,dev,1\n"),
            Err(ManifestError::UnknownLabel { row: 1, .. })
        ));
        assert!(matches!(
            parse("path,label,split,order_index\na,normal,dev,1\na,normal,dev,2\n"),
            Err(ManifestError::DuplicatePath(_))
        ));
        assert!(matches!(
            parse("path,label,split,order_index\na,normal,dev,1\nb,normal,dev,1\n"),
            Err(ManifestError::DuplicateOrderIndex(1))
        ));
        assert!(matches!(
            parse("path,label,split,order_index\na,normal,dev,x\n"),
            Err(ManifestError::BadOrderIndex { .. })
        ));
    }
}
