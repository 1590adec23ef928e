#![allow(dead_code)]

use mvtrust::data::{Matrix, MultiViewDataset};
use mvtrust::loss::LossConfig;
use mvtrust::network::{MultiViewModel, Objective, Reduction, ViewNetwork};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;

/// Small random model and batch: d_v <= 4, h <= 5, K <= 3, V <= 3.
pub fn random_tiny_case<R: Rng>(rng: &mut R) -> (MultiViewModel, MultiViewDataset, Objective) {
    let k = rng.random_range(2..=3);
    let v = rng.random_range(1..=3);
    let h = rng.random_range(1..=5);
    let n = rng.random_range(1..=6);
    let dims: Vec<usize> = (0..v).map(|_| rng.random_range(1..=4)).collect();
    let nets = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let count = ViewNetwork::param_count(d, h, k);
            // biases pushed positive so most units are active and gradients are nonzero
            let params = (0..count).map(|_| rng.random_range(-1.0..1.0) + 0.3).collect();
            ViewNetwork::from_params(i, d, h, k, params).unwrap()
        })
        .collect();
    let model = MultiViewModel::new(nets, k).unwrap();
    let views = dims
        .iter()
        .map(|&d| {
            let data = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
            Matrix::new(n, d, data).unwrap()
        })
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
    let data = MultiViewDataset::new("tiny", k, views, labels).unwrap();
    let objective = Objective {
        loss: LossConfig::new(10, rng.random_range(0..15)).unwrap(),
        per_view_terms: rng.random_bool(0.5),
        reduction: if rng.random_bool(0.5) { Reduction::Mean } else { Reduction::Sum },
    };
    (model, data, objective)
}

/// Sign pattern of every hidden and output pre-activation, computed
/// independently of the library's forward pass.
fn activation_pattern(model: &MultiViewModel, data: &MultiViewDataset) -> Vec<bool> {
    let mut out = Vec::new();
    for (v, net) in model.nets().iter().enumerate() {
        let (d, h, k) = (net.input_dim, net.hidden, net.num_classes);
        let p = net.params();
        let (w1, b1, w2, b2) = (0, h * d, h * d + h, h * d + h + k * h);
        for i in 0..data.len() {
            let x = data.view(v).row(i);
            let mut a = vec![0.0; h];
            for j in 0..h {
                let z = p[b1 + j] + (0..d).map(|c| p[w1 + j * d + c] * x[c]).sum::<f64>();
                out.push(z > 0.0);
                a[j] = z.max(0.0);
            }
            for c in 0..k {
                let z = p[b2 + c] + (0..h).map(|j| p[w2 + c * h + j] * a[j]).sum::<f64>();
                out.push(z > 0.0);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Parameters whose perturbation crossed a rectifier kink, where central
    /// differences do not estimate the derivative.
    pub skipped: usize,
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compares analytic gradients of the full batch objective with central differences.
pub fn gradient_check(model: &MultiViewModel, data: &MultiViewDataset, objective: &Objective) -> GradCheck {
    let batch: Vec<usize> = (0..data.len()).collect();
    let (_, grads) = model.backward(data, &batch, objective).unwrap();
    let base_pattern = activation_pattern(model, data);
    let mut result = GradCheck::default();
    for v in 0..model.num_views() {
        for p in 0..model.nets()[v].params().len() {
            let eval = |delta: f64| {
                let mut m = model.clone();
                m.nets_mut()[v].params_mut()[p] += delta;
                let pattern = activation_pattern(&m, data);
                (m.objective(data, &batch, objective).unwrap(), pattern)
            };
            let (fp, pp) = eval(FD_STEP);
            let (fm, pm) = eval(-FD_STEP);
            if pp != base_pattern || pm != base_pattern {
                result.skipped += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            let err = rel_err(grads.per_view[v][p], numeric);
            result.max_rel_err = result.max_rel_err.max(err);
            result.checked += 1;
        }
    }
    result
}
