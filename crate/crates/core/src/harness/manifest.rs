use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_COLUMNS: [&str; 5] = ["id", "cloud_path", "mos", "content_group", "distortion"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub cloud_path: PathBuf,
    pub mos: f64,
    pub content_group: String,
    pub distortion: String,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest is missing column {0:?}")]
    MissingColumn(&'static str),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("row {row}: {column} value {value:?} is not a finite number")]
    BadNumber { row: usize, column: &'static str, value: String },
    #[error("row {row}: id {id:?} must be non-empty and use only letters, digits, '.', '_' or '-'")]
    InvalidId { row: usize, id: String },
    #[error("row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Ids double as cache directory names.
fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Parses manifest CSV text. Rows are numbered from 1 after the header.
/// Relative cloud paths are resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|source| ManifestError::Csv { row: 0, source })?.clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or(ManifestError::MissingColumn(name))?;
    }
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| ManifestError::Csv { row, source })?;
        let field = |c: usize| record.get(cols[c]).unwrap_or("").to_string();
        let id = field(0);
        if !valid_id(&id) {
            return Err(ManifestError::InvalidId { row, id });
        }
        if !seen.insert(id.clone()) {
            return Err(ManifestError::DuplicateId(id));
        }
        let raw_mos = field(2);
        let mos = raw_mos
            .parse::<f64>()
            .ok()
            .filter(|m| m.is_finite())
            .ok_or(ManifestError::BadNumber { row, column: "mos", value: raw_mos })?;
        let path = PathBuf::from(field(1));
        let cloud_path = if path.is_absolute() { path } else { base_dir.join(path) };
        entries.push(ManifestEntry { id, cloud_path, mos, content_group: field(3), distortion: field(4) });
    }
    Ok(entries)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.into(), source })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new("")))
}

/// Writes entries as manifest CSV; cloud paths under `base_dir` are stored
/// relative to it.
pub fn write_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |source| ManifestError::Csv { row: 0, source };
    w.write_record(MANIFEST_COLUMNS).map_err(csv_err)?;
    for e in entries {
        let cloud = e.cloud_path.strip_prefix(base).unwrap_or(&e.cloud_path);
        let mos = format!("{:?}", e.mos);
        w.write_record([e.id.as_str(), &cloud.to_string_lossy(), &mos, &e.content_group, &e.distortion])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| ManifestError::Io { path: path.into(), source: e.into_error() })?;
    std::fs::write(path, bytes).map_err(|source| ManifestError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,cloud_path,mos,content_group,distortion\n";

    #[test]
    fn two_rows() {
        let text = format!("{HEADER}a,a.ply,3.5,g1,none\nb,/abs/b.ply,2,g2,noise\n");
        let e = parse_manifest(&text, Path::new("/data")).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].cloud_path, PathBuf::from("/data/a.ply"));
        assert_eq!(e[1].cloud_path, PathBuf::from("/abs/b.ply"));
        assert_eq!((e[1].mos, e[1].content_group.as_str()), (2.0, "g2"));
    }

    #[test]
    fn column_order_is_free() {
        let text = "mos,id,distortion,content_group,cloud_path\n1.5,x,d,g,x.ply\n";
        let e = parse_manifest(text, Path::new("")).unwrap();
        assert_eq!((e[0].id.as_str(), e[0].mos), ("x", 1.5));
    }

    #[test]
    fn errors() {
        let dup = format!("{HEADER}a,a.ply,1,g,n\na,b.ply,2,g,n\n");
        assert!(matches!(parse_manifest(&dup, Path::new("")), Err(ManifestError::DuplicateId(id)) if id == "a"));
        let bad = format!("{HEADER}a,a.ply,1,g,n\nb,b.ply,abc,g,n\n");
        assert!(matches!(
            parse_manifest(&bad, Path::new("")),
            Err(ManifestError::BadNumber { row: 2, column: "mos", .. })
        ));
        let nan = format!("{HEADER}a,a.ply,NaN,g,n\n");
        assert!(matches!(parse_manifest(&nan, Path::new("")), Err(ManifestError::BadNumber { row: 1, .. })));
        let missing = "id,cloud_path,content_group,distortion\na,a.ply,g,n\n";
        assert!(matches!(parse_manifest(missing, Path::new("")), Err(ManifestError::MissingColumn("mos"))));
        let unsafe_id = format!("{HEADER}../x,a.ply,1,g,n\n");
        assert!(matches!(parse_manifest(&unsafe_id, Path::new("")), Err(ManifestError::InvalidId { row: 1, .. })));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            ManifestEntry {
                id: "e0".into(),
                cloud_path: dir.path().join("clouds/e0.ply"),
                mos: 0.1 + 0.2,
                content_group: "g".into(),
                distortion: "noise_0.1".into(),
            },
            ManifestEntry {
                id: "e1".into(),
                cloud_path: "/elsewhere/e1.ply".into(),
                mos: -4.0,
                content_group: "h, quoted".into(),
                distortion: "".into(),
            },
        ];
        let path = dir.path().join("manifest.csv");
        write_manifest(&entries, &path).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().contains("clouds/e0.ply"));
        assert_eq!(load_manifest(&path).unwrap(), entries);
    }
}
