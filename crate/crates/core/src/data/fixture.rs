use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Matrix, MultiViewDataset};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Gaussian-blob stand-in for a real multi-view benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub num_classes: usize,
    /// One entry per view.
    pub view_dims: Vec<usize>,
    /// Samples to draw for each class.
    pub class_counts: Vec<usize>,
    /// Distance between the two closest class means within each view, in
    /// units of the unit-variance per-feature noise.
    pub separation: f64,
    pub seed: u64,
}

/// Draws per-class Gaussian blobs, independently per view.
///
/// Each view gets its own random class means, rescaled so the nearest pair of
/// means sits exactly `separation` apart. Samples add standard normal noise
/// to their class mean. Rows are grouped by class, class 0 first.
pub fn make_synthetic_fixture(spec: &FixtureSpec) -> Result<MultiViewDataset> {
    let k = spec.num_classes;
    if k < 2 {
        return Err(Error::invalid("fixture needs at least 2 classes"));
    }
    if spec.view_dims.is_empty() || spec.view_dims.contains(&0) {
        return Err(Error::invalid("fixture needs at least one view, each with dim > 0"));
    }
    if spec.class_counts.len() != k {
        return Err(Error::invalid(format!(
            "{} class counts given for {k} classes",
            spec.class_counts.len()
        )));
    }
    if !(spec.separation.is_finite() && spec.separation >= 0.0) {
        return Err(Error::invalid("separation must be finite and >= 0"));
    }

    let labels: Vec<usize> = spec
        .class_counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();

    let mut views = Vec::with_capacity(spec.view_dims.len());
    for (v, &dim) in spec.view_dims.iter().enumerate() {
        let mut rng = stream_rng(spec.seed, Stream::Fixture, v as u64);
        let mut means: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let mut closest = f64::INFINITY;
        for a in 0..k {
            for b in a + 1..k {
                let d = means[a]
                    .iter()
                    .zip(&means[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                closest = closest.min(d);
            }
        }
        let scale = if closest > 0.0 { spec.separation / closest } else { 0.0 };
        means.iter_mut().flatten().for_each(|x| *x *= scale);

        let mut data = Vec::with_capacity(labels.len() * dim);
        for &y in &labels {
            for mu in &means[y] {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + z);
            }
        }
        views.push(Matrix::new(labels.len(), dim, data)?);
    }
    MultiViewDataset::new(format!("fixture-k{k}-v{}", spec.view_dims.len()), k, views, labels)
}
