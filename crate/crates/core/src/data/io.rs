//! Dataset manifest (JSON) plus comma-delimited matrix and label files.
//!
//! ```json
//! {
//!   "name": "handwritten",
//!   "K": 10,
//!   "V": 2,
//!   "views": [{"path": "view0.csv", "dim": 240}, {"path": "view1.csv", "dim": 76}],
//!   "labels_path": "labels.csv",
//!   "normalization": {"mean": [[...], [...]], "std": [[...], [...]]}
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. Matrix files hold
//! one sample per row with no header; the label file holds one class id per line.
//! `normalization` is optional and records z-score statistics already applied
//! to, or fitted for, the listed files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Matrix, MultiViewDataset, Normalization};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub path: PathBuf,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    #[serde(rename = "K")]
    pub num_classes: usize,
    #[serde(rename = "V")]
    pub num_views: usize,
    pub views: Vec<ViewEntry>,
    pub labels_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: malformed manifest: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Reads a delimited numeric matrix with `dim` columns.
pub fn read_matrix(path: &Path, dim: usize) -> Result<Matrix> {
    let mut rdr = csv_reader(path)?;
    let mut data = Vec::new();
    let mut rows = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec =
            rec.map_err(|e| Error::Data(format!("{} row {row}: {e}", path.display())))?;
        if rec.len() != dim {
            return Err(Error::Data(format!(
                "{} row {row}: {} columns, manifest says {dim}",
                path.display(),
                rec.len()
            )));
        }
        for (col, field) in rec.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| {
                Error::Data(format!(
                    "{} row {row} column {col}: cannot parse {field:?}",
                    path.display()
                ))
            })?;
            if !x.is_finite() {
                return Err(Error::Data(format!(
                    "{} row {row} column {col}: non-finite value",
                    path.display()
                )));
            }
            data.push(x);
        }
        rows += 1;
    }
    Matrix::new(rows, dim, data)
}

fn read_labels(path: &Path, num_classes: usize) -> Result<Vec<usize>> {
    let mut rdr = csv_reader(path)?;
    let mut labels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec =
            rec.map_err(|e| Error::Data(format!("{} row {row}: {e}", path.display())))?;
        let field = rec.get(0).unwrap_or("");
        let y: usize = field.parse().map_err(|_| {
            Error::Data(format!(
                "{} row {row}: cannot parse label {field:?}",
                path.display()
            ))
        })?;
        if y >= num_classes {
            return Err(Error::Data(format!(
                "{} row {row}: label {y} outside [0, {num_classes})",
                path.display()
            )));
        }
        labels.push(y);
    }
    Ok(labels)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut buf = Vec::with_capacity(m.cols());
    for i in 0..m.rows() {
        buf.clear();
        // Display for f64 prints the shortest string that parses back exactly.
        buf.extend(m.row(i).iter().map(|x| x.to_string()));
        wtr.write_record(&buf)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Loads and validates the dataset a manifest describes.
pub fn load_dataset(manifest_path: &Path) -> Result<(MultiViewDataset, Manifest)> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    if manifest.views.len() != manifest.num_views {
        return Err(Error::Data(format!(
            "{}: V = {} but {} views are listed",
            manifest_path.display(),
            manifest.num_views,
            manifest.views.len()
        )));
    }
    let views = manifest
        .views
        .iter()
        .map(|v| read_matrix(&resolve(base, &v.path), v.dim))
        .collect::<Result<Vec<_>>>()?;
    let labels = read_labels(&resolve(base, &manifest.labels_path), manifest.num_classes)?;
    for (entry, m) in manifest.views.iter().zip(&views) {
        if m.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} has {} rows but {} has {} labels",
                entry.path.display(),
                m.rows(),
                manifest.labels_path.display(),
                labels.len()
            )));
        }
    }
    let data = MultiViewDataset::new(manifest.name.clone(), manifest.num_classes, views, labels)?;
    Ok((data, manifest))
}

/// Writes `data` as `<stem>_view<v>.csv`, `<stem>_labels.csv` and `<stem>.json` in `dir`.
/// Returns the manifest path.
pub fn write_dataset(
    dir: &Path,
    stem: &str,
    data: &MultiViewDataset,
    normalization: Option<&Normalization>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut views = Vec::with_capacity(data.num_views());
    for (v, m) in data.views().iter().enumerate() {
        let file = PathBuf::from(format!("{stem}_view{v}.csv"));
        write_matrix(&dir.join(&file), m)?;
        views.push(ViewEntry {
            path: file,
            dim: m.cols(),
        });
    }
    let labels_path = PathBuf::from(format!("{stem}_labels.csv"));
    let label_text: String = data.labels().iter().map(|y| format!("{y}\n")).collect();
    let lp = dir.join(&labels_path);
    fs::write(&lp, label_text).map_err(|e| Error::io(&lp, e))?;
    let manifest = Manifest {
        name: data.name().to_string(),
        num_classes: data.num_classes(),
        num_views: data.num_views(),
        views,
        labels_path,
        normalization: normalization.cloned(),
    };
    let path = dir.join(format!("{stem}.json"));
    manifest.write(&path)?;
    Ok(path)
}
