//! Per-view evidential networks and the training loop.
//!
//! Each view has a one-hidden-layer perceptron `x -> relu(W1 x + b1) -> relu(W2 h + b2)`
//! whose rectified output is the view's evidence. Sample-level joint evidence
//! is the group-consensus fold of the view evidences, which equals their mean,
//! so the joint loss term sends `1/V` of its evidence gradient to each view.

mod checkpoint;
mod optim;

pub use checkpoint::{Checkpoint, CheckpointMeta, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use optim::{train, EarlyStop, Optimizer, TrainConfig, TrainState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::fold_evidence;
use crate::data::MultiViewDataset;
use crate::error::{check_len, Error, Result};
use crate::loss::{total_and_grad, LossConfig};
use crate::opinion::{BaseRates, Evidence, Opinion};
use crate::rng::{stream_rng, Stream};

/// Parameters of one view's evidential perceptron, stored flat as
/// `[W1 (hidden x input) | b1 | W2 (classes x hidden) | b2]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewNetwork {
    pub view: usize,
    pub input_dim: usize,
    pub hidden: usize,
    pub num_classes: usize,
    params: Vec<f64>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
struct Cache {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    e: Vec<f64>,
}

impl ViewNetwork {
    pub fn param_count(input_dim: usize, hidden: usize, num_classes: usize) -> usize {
        hidden * input_dim + hidden + num_classes * hidden + num_classes
    }

    /// All-zero parameters.
    pub fn zeros(view: usize, input_dim: usize, hidden: usize, num_classes: usize) -> Self {
        ViewNetwork {
            view,
            input_dim,
            hidden,
            num_classes,
            params: vec![0.0; Self::param_count(input_dim, hidden, num_classes)],
        }
    }

    /// Uniform fan-in initialization: every weight and bias of a layer is drawn
    /// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init<R: Rng>(
        view: usize,
        input_dim: usize,
        hidden: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(view, input_dim, hidden, num_classes);
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        let split = hidden * input_dim + hidden;
        for (i, p) in net.params.iter_mut().enumerate() {
            let bound = if i < split { b1 } else { b2 };
            *p = rng.random_range(-bound..=bound);
        }
        net
    }

    pub fn from_params(
        view: usize,
        input_dim: usize,
        hidden: usize,
        num_classes: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        check_len(
            Self::param_count(input_dim, hidden, num_classes),
            params.len(),
            "network parameter vector",
        )?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(ViewNetwork {
            view,
            input_dim,
            hidden,
            num_classes,
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.input_dim;
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.num_classes * self.hidden;
        (w1, b1, w2)
    }

    fn forward_cached(&self, x: &[f64], cache: &mut Cache) {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let p = &self.params;
        cache.z1.clear();
        cache.a1.clear();
        for j in 0..self.hidden {
            let row = &p[j * self.input_dim..(j + 1) * self.input_dim];
            let z = p[o_b1 + j] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
            cache.z1.push(z);
            cache.a1.push(z.max(0.0));
        }
        cache.z2.clear();
        cache.e.clear();
        for k in 0..self.num_classes {
            let row = &p[o_w2 + k * self.hidden..o_w2 + (k + 1) * self.hidden];
            let z = p[o_b2 + k] + row.iter().zip(&cache.a1).map(|(w, a)| w * a).sum::<f64>();
            cache.z2.push(z);
            cache.e.push(z.max(0.0));
        }
    }

    /// Accumulates parameter gradients given `d loss / d evidence`.
    fn backward_cached(&self, x: &[f64], cache: &Cache, de: &[f64], grad: &mut [f64]) {
        let (o_b1, o_w2, o_b2) = self.offsets();
        let p = &self.params;
        let mut da1 = vec![0.0; self.hidden];
        for k in 0..self.num_classes {
            if cache.z2[k] <= 0.0 {
                continue;
            }
            let dz = de[k];
            grad[o_b2 + k] += dz;
            let base = o_w2 + k * self.hidden;
            for j in 0..self.hidden {
                grad[base + j] += dz * cache.a1[j];
                da1[j] += dz * p[base + j];
            }
        }
        for j in 0..self.hidden {
            if cache.z1[j] <= 0.0 {
                continue;
            }
            let dz = da1[j];
            grad[o_b1 + j] += dz;
            let base = j * self.input_dim;
            for (g, xi) in grad[base..base + self.input_dim].iter_mut().zip(x) {
                *g += dz * xi;
            }
        }
    }

    /// Evidence for one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<Evidence> {
        check_len(self.input_dim, x.len(), "network input")?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("network input must be finite"));
        }
        let mut cache = Cache::default();
        self.forward_cached(x, &mut cache);
        Evidence::new(cache.e)
    }
}

/// Whether the batch objective averages or sums per-sample losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

/// Training objective: joint-evidence loss plus optional per-view losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub loss: LossConfig,
    pub per_view_terms: bool,
    pub reduction: Reduction,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            loss: LossConfig::default(),
            per_view_terms: true,
            reduction: Reduction::Mean,
        }
    }
}

/// Output of [`MultiViewModel::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub decision: usize,
    pub joint: Opinion,
    pub joint_evidence: Evidence,
    pub per_view: Vec<Opinion>,
}

/// One network per view sharing a class count.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewModel {
    nets: Vec<ViewNetwork>,
    num_classes: usize,
    base_rates: BaseRates,
}

/// Per-view parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub per_view: Vec<Vec<f64>>,
}

impl MultiViewModel {
    pub fn new(nets: Vec<ViewNetwork>, num_classes: usize) -> Result<Self> {
        if nets.is_empty() {
            return Err(Error::invalid("a model needs at least one view network"));
        }
        if let Some(n) = nets.iter().find(|n| n.num_classes != num_classes) {
            return Err(Error::invalid(format!(
                "view {} network outputs {} classes, model has {num_classes}",
                n.view, n.num_classes
            )));
        }
        Ok(MultiViewModel {
            nets,
            num_classes,
            base_rates: BaseRates::uniform(num_classes)?,
        })
    }

    /// Fresh seeded networks, one per view dimension.
    pub fn init(view_dims: &[usize], hidden: usize, num_classes: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        let nets = view_dims
            .iter()
            .enumerate()
            .map(|(v, &d)| {
                let mut rng = stream_rng(seed, Stream::Init, v as u64);
                ViewNetwork::init(v, d, hidden, num_classes, &mut rng)
            })
            .collect();
        Self::new(nets, num_classes)
    }

    pub fn with_base_rates(mut self, base_rates: BaseRates) -> Result<Self> {
        check_len(self.num_classes, base_rates.num_classes(), "model base rates")?;
        self.base_rates = base_rates;
        Ok(self)
    }

    pub fn nets(&self) -> &[ViewNetwork] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [ViewNetwork] {
        &mut self.nets
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_views(&self) -> usize {
        self.nets.len()
    }

    pub fn base_rates(&self) -> &BaseRates {
        &self.base_rates
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.nets.iter().map(|n| n.input_dim).collect()
    }

    /// Checks that `data` has the views and classes this model was built for.
    pub fn check_compatible(&self, data: &MultiViewDataset) -> Result<()> {
        if data.num_classes() != self.num_classes || data.view_dims() != self.view_dims() {
            return Err(Error::Checkpoint(format!(
                "model expects K = {} and view dims {:?}, dataset has K = {} and {:?}",
                self.num_classes,
                self.view_dims(),
                data.num_classes(),
                data.view_dims()
            )));
        }
        Ok(())
    }

    pub fn view_evidence(&self, views: &[&[f64]]) -> Result<Vec<Evidence>> {
        check_len(self.nets.len(), views.len(), "sample views")?;
        self.nets.iter().zip(views).map(|(n, x)| n.forward(x)).collect()
    }

    /// Joint decision, joint opinion and per-view opinions for one sample.
    pub fn predict(&self, views: &[&[f64]]) -> Result<Prediction> {
        let evidences = self.view_evidence(views)?;
        let joint_evidence = fold_evidence(&evidences)?;
        let joint = joint_evidence.to_opinion(&self.base_rates)?;
        let per_view = evidences
            .iter()
            .map(|e| e.to_opinion(&self.base_rates))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prediction {
            decision: joint.decision(),
            joint,
            joint_evidence,
            per_view,
        })
    }

    /// Objective value and gradients over the rows `batch` of `data`.
    pub fn backward(
        &self,
        data: &MultiViewDataset,
        batch: &[usize],
        objective: &Objective,
    ) -> Result<(f64, Gradients)> {
        self.check_compatible(data)?;
        if batch.is_empty() {
            return Err(Error::invalid("backward needs a nonempty batch"));
        }
        let mut grads = Gradients {
            per_view: self.nets.iter().map(|n| vec![0.0; n.params.len()]).collect(),
        };
        let total = self.accumulate(data, batch, objective, Some(&mut grads))?;
        let scale = match objective.reduction {
            Reduction::Mean => 1.0 / batch.len() as f64,
            Reduction::Sum => 1.0,
        };
        if scale != 1.0 {
            grads.per_view.iter_mut().flatten().for_each(|g| *g *= scale);
        }
        Ok((total * scale, grads))
    }

    /// Objective value only.
    pub fn objective(
        &self,
        data: &MultiViewDataset,
        batch: &[usize],
        objective: &Objective,
    ) -> Result<f64> {
        self.check_compatible(data)?;
        if batch.is_empty() {
            return Err(Error::invalid("objective needs a nonempty batch"));
        }
        let total = self.accumulate(data, batch, objective, None)?;
        Ok(match objective.reduction {
            Reduction::Mean => total / batch.len() as f64,
            Reduction::Sum => total,
        })
    }

    /// Summed per-sample loss; adds unscaled gradients when `grads` is given.
    fn accumulate(
        &self,
        data: &MultiViewDataset,
        batch: &[usize],
        objective: &Objective,
        mut grads: Option<&mut Gradients>,
    ) -> Result<f64> {
        let v_count = self.nets.len();
        let k = self.num_classes;
        let inv_v = 1.0 / v_count as f64;
        let lambda = objective.loss.lambda();
        let mut caches = vec![Cache::default(); v_count];
        let mut joint_alpha = vec![0.0; k];
        let mut joint_grad = vec![0.0; k];
        let mut view_alpha = vec![0.0; k];
        let mut view_grads = vec![vec![0.0; k]; v_count];
        let mut total = 0.0;

        for &i in batch {
            let y = data.labels()[i];
            let evidences = self
                .nets
                .iter()
                .zip(caches.iter_mut())
                .enumerate()
                .map(|(v, (net, cache))| {
                    net.forward_cached(data.view(v).row(i), cache);
                    Evidence::new(cache.e.clone())
                })
                .collect::<Result<Vec<_>>>();
            // overflowing activations surface as a non-finite objective
            let Ok(evidences) = evidences else {
                return Ok(f64::NAN);
            };
            let joint = fold_evidence(&evidences)?;
            for (a, m) in joint_alpha.iter_mut().zip(joint.masses()) {
                *a = m + 1.0;
            }
            joint_grad.iter_mut().for_each(|g| *g = 0.0);
            let want_grad = grads.is_some();
            total += total_and_grad(&joint_alpha, y, lambda, want_grad.then_some(&mut joint_grad[..]));

            for (v, vg) in view_grads.iter_mut().enumerate() {
                vg.iter_mut().for_each(|g| *g = 0.0);
                if objective.per_view_terms {
                    for (a, m) in view_alpha.iter_mut().zip(&caches[v].e) {
                        *a = m + 1.0;
                    }
                    total += total_and_grad(&view_alpha, y, lambda, want_grad.then_some(&mut vg[..]));
                }
            }

            if let Some(g) = grads.as_deref_mut() {
                for (v, net) in self.nets.iter().enumerate() {
                    let de: Vec<f64> = joint_grad
                        .iter()
                        .zip(&view_grads[v])
                        .map(|(j, own)| j * inv_v + own)
                        .collect();
                    net.backward_cached(data.view(v).row(i), &caches[v], &de, &mut g.per_view[v]);
                }
            }
        }
        Ok(total)
    }
}
