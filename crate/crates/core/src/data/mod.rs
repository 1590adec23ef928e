//! Multi-view datasets: in-memory representation, on-disk format, splitting,
//! long-tail subsampling, test-time corruption and a synthetic fixture.

mod fixture;
mod io;
mod noise;
mod sampling;

pub use fixture::{make_synthetic_fixture, FixtureSpec};
pub use io::{load_dataset, read_matrix, write_dataset, write_matrix, Manifest, ViewEntry};
pub use noise::{inject_conflictive, inject_gaussian, ConflictSwap, NoiseConfig};
pub use sampling::{make_long_tailed, retention_probabilities, split, DecayForm, LongTailConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} values, expected {rows} x {cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }
}

/// Aligned feature matrices (one per view) plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    name: String,
    num_classes: usize,
    views: Vec<Matrix>,
    labels: Vec<usize>,
}

impl MultiViewDataset {
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        views: Vec<Matrix>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Data(format!("need at least 2 classes, got {num_classes}")));
        }
        if views.is_empty() {
            return Err(Error::Data("dataset has no views".into()));
        }
        for (v, m) in views.iter().enumerate() {
            if m.rows() != labels.len() {
                return Err(Error::Data(format!(
                    "view {v} has {} rows but there are {} labels",
                    m.rows(),
                    labels.len()
                )));
            }
            if m.cols() == 0 {
                return Err(Error::Data(format!("view {v} has zero columns")));
            }
            if let Some(pos) = m.as_slice().iter().position(|x| !x.is_finite()) {
                return Err(Error::Data(format!(
                    "view {v} row {} column {} is not finite",
                    pos / m.cols(),
                    pos % m.cols()
                )));
            }
        }
        if let Some((row, y)) = labels.iter().enumerate().find(|(_, y)| **y >= num_classes) {
            return Err(Error::Data(format!(
                "label {y} at row {row} is outside [0, {num_classes})"
            )));
        }
        Ok(MultiViewDataset {
            name: name.into(),
            num_classes,
            views,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &Matrix {
        &self.views[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    /// Feature vectors of sample `i`, one slice per view.
    pub fn sample(&self, i: usize) -> Vec<&[f64]> {
        self.views.iter().map(|m| m.row(i)).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Sample ids of class `k`, ascending.
    pub fn class_indices(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, y)| **y == k)
            .map(|(i, _)| i)
            .collect()
    }

    /// New dataset made of the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> MultiViewDataset {
        MultiViewDataset {
            name: self.name.clone(),
            num_classes: self.num_classes,
            views: self.views.iter().map(|m| m.select_rows(indices)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Appends one sample; `features` holds one vector per view.
    pub fn push(&mut self, features: &[Vec<f64>], label: usize) -> Result<()> {
        if features.len() != self.num_views() {
            return Err(Error::invalid(format!(
                "sample has {} views, dataset has {}",
                features.len(),
                self.num_views()
            )));
        }
        for (v, (f, m)) in features.iter().zip(&self.views).enumerate() {
            if f.len() != m.cols() {
                return Err(Error::invalid(format!(
                    "view {v} vector has length {}, expected {}",
                    f.len(),
                    m.cols()
                )));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("view {v} vector is not finite")));
            }
        }
        if label >= self.num_classes {
            return Err(Error::invalid(format!("label {label} out of range")));
        }
        for (f, m) in features.iter().zip(self.views.iter_mut()) {
            m.push_row(f);
        }
        self.labels.push(label);
        Ok(())
    }

    pub(crate) fn views_mut(&mut self) -> &mut [Matrix] {
        &mut self.views
    }
}

/// Per-view z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
}

impl Normalization {
    /// Fits column means and population standard deviations on every row of `data`.
    /// Constant columns get a std of 1 so they map to zero.
    pub fn fit(data: &MultiViewDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("cannot fit normalization on an empty dataset".into()));
        }
        let n = data.len() as f64;
        let mut mean = Vec::with_capacity(data.num_views());
        let mut std = Vec::with_capacity(data.num_views());
        for m in data.views() {
            let mut mu = vec![0.0; m.cols()];
            for i in 0..m.rows() {
                for (acc, x) in mu.iter_mut().zip(m.row(i)) {
                    *acc += x;
                }
            }
            mu.iter_mut().for_each(|x| *x /= n);
            let mut var = vec![0.0; m.cols()];
            for i in 0..m.rows() {
                for ((acc, x), c) in var.iter_mut().zip(m.row(i)).zip(&mu) {
                    *acc += (x - c) * (x - c);
                }
            }
            let sd = var
                .into_iter()
                .map(|v| {
                    let s = (v / n).sqrt();
                    if s > 1e-12 {
                        s
                    } else {
                        1.0
                    }
                })
                .collect();
            mean.push(mu);
            std.push(sd);
        }
        Ok(Normalization { mean, std })
    }

    pub fn apply(&self, data: &MultiViewDataset) -> Result<MultiViewDataset> {
        if self.mean.len() != data.num_views()
            || self.mean.iter().zip(data.views()).any(|(mu, m)| mu.len() != m.cols())
        {
            return Err(Error::Data(
                "normalization statistics do not match the dataset's view shapes".into(),
            ));
        }
        let mut out = data.clone();
        for ((m, mu), sd) in out.views_mut().iter_mut().zip(&self.mean).zip(&self.std) {
            for i in 0..m.rows() {
                for ((x, c), s) in m.row_mut(i).iter_mut().zip(mu).zip(sd) {
                    *x = (*x - c) / s;
                }
            }
        }
        Ok(out)
    }
}
