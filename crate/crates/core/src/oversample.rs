//! Uncertainty-weighted pseudo-sample generation for minority classes.
//!
//! Neighbors are found in joint-evidence space; each view then mixes the
//! center with its neighbors using weights that favor low uncertainty entropy.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::fold_evidence;
use crate::data::MultiViewDataset;
use crate::error::{check_len, Error, Result};
use crate::opinion::{BaseRates, Evidence, Opinion};
use crate::rng::{stream_rng, Stream};

/// Entropies are clamped to this floor before the inverse transform.
pub const ENTROPY_FLOOR: f64 = 1e-8;

pub const DEFAULT_NEIGHBORS: usize = 3;

/// Euclidean distance between two evidence vectors.
pub fn evidence_distance(a: &Evidence, b: &Evidence) -> Result<f64> {
    check_len(a.num_classes(), b.num_classes(), "evidence distance")?;
    Ok(a.masses()
        .iter()
        .zip(b.masses())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// A center and its nearest class-mates, closest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub center: usize,
    pub neighbors: Vec<usize>,
    pub distances: Vec<f64>,
}

/// The `r` members of `pool` (excluding `center`) closest to `center` in
/// joint-evidence space; ties go to the lower sample id.
///
/// `joint` is indexed by sample id.
pub fn find_neighbors(center: usize, pool: &[usize], joint: &[Evidence], r: usize) -> Result<NeighborSet> {
    if r == 0 {
        return Err(Error::invalid("neighbor count must be positive"));
    }
    if !pool.contains(&center) {
        return Err(Error::invalid(format!("center {center} is not in the class pool")));
    }
    let ec = joint
        .get(center)
        .ok_or_else(|| Error::invalid(format!("no joint evidence for sample {center}")))?;
    let mut scored = Vec::with_capacity(pool.len());
    for &id in pool.iter().filter(|&&id| id != center) {
        let e = joint
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no joint evidence for sample {id}")))?;
        scored.push((evidence_distance(ec, e)?, id));
    }
    if r > scored.len() {
        return Err(Error::InsufficientNeighbors {
            requested: r,
            available: scored.len(),
        });
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(r);
    Ok(NeighborSet {
        center,
        neighbors: scored.iter().map(|s| s.1).collect(),
        distances: scored.iter().map(|s| s.0).collect(),
    })
}

/// Midpoint of two evidence vectors.
pub fn integrate_evidence(center: &Evidence, other: &Evidence) -> Result<Evidence> {
    check_len(center.num_classes(), other.num_classes(), "integrate evidence")?;
    Evidence::new(
        center
            .masses()
            .iter()
            .zip(other.masses())
            .map(|(a, b)| 0.5 * a + 0.5 * b)
            .collect(),
    )
}

/// `H = -exp(u) * log(b_y + u * a_y)`: cross-entropy of the projected
/// probability against the true class, inflated by the opinion's uncertainty.
pub fn uncertainty_entropy(o: &Opinion, label: usize) -> Result<f64> {
    if label >= o.num_classes() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            o.num_classes()
        )));
    }
    let p = o.beliefs()[label] + o.uncertainty() * o.base_rates().rates()[label];
    if p <= 0.0 {
        return Err(Error::DegenerateOpinion(format!(
            "projected probability of the true class is {p}"
        )));
    }
    Ok((-o.uncertainty().exp() * p.ln()).max(0.0))
}

/// Monotonically decreasing map from entropy to unnormalized weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightTransform {
    /// `F(x) = 1 / max(x, ENTROPY_FLOOR)`.
    #[default]
    Inverse,
}

impl WeightTransform {
    pub fn apply(&self, h: f64) -> f64 {
        match self {
            WeightTransform::Inverse => 1.0 / h.max(ENTROPY_FLOOR),
        }
    }
}

/// Mixing weights for one view: slot 0 is the center, slot `r` the r-th neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborWeights(Vec<f64>);

impl NeighborWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be a nonempty nonnegative vector"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {sum}, expected 1")));
        }
        Ok(NeighborWeights(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

/// Normalized `F(H)` over the given entropies.
pub fn weights_from_entropies(entropies: &[f64], transform: WeightTransform) -> Result<NeighborWeights> {
    if entropies.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
        return Err(Error::invalid("entropies must be finite and nonnegative"));
    }
    let raw: Vec<f64> = entropies.iter().map(|&h| transform.apply(h)).collect();
    let total: f64 = raw.iter().sum();
    NeighborWeights::new(raw.into_iter().map(|f| f / total).collect())
}

/// Weights for one view. The center's entropy comes from its own evidence;
/// neighbor `r` uses the midpoint of the center's and the neighbor's evidence.
///
/// `view_evidence` is this view's evidence indexed by sample id.
pub fn neighbor_weights(
    set: &NeighborSet,
    view_evidence: &[Evidence],
    label: usize,
    base_rates: &BaseRates,
    transform: WeightTransform,
) -> Result<NeighborWeights> {
    let get = |id: usize| {
        view_evidence
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no view evidence for sample {id}")))
    };
    let ec = get(set.center)?;
    let mut entropies = Vec::with_capacity(set.neighbors.len() + 1);
    entropies.push(uncertainty_entropy(&ec.to_opinion(base_rates)?, label)?);
    for &id in &set.neighbors {
        let mixed = integrate_evidence(ec, get(id)?)?;
        entropies.push(uncertainty_entropy(&mixed.to_opinion(base_rates)?, label)?);
    }
    weights_from_entropies(&entropies, transform)
}

/// `R + 1` weights from normalized i.i.d. uniforms.
pub fn random_weights_ablation<G: Rng>(r: usize, rng: &mut G) -> Result<NeighborWeights> {
    if r == 0 {
        return Err(Error::invalid("neighbor count must be positive"));
    }
    loop {
        let raw: Vec<f64> = (0..=r).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return NeighborWeights::new(raw.into_iter().map(|x| x / total).collect());
        }
    }
}

/// A synthetic sample and how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    pub label: usize,
    pub views: Vec<Vec<f64>>,
    pub center: usize,
    pub neighbors: Vec<usize>,
    /// One weight vector per view.
    pub weights: Vec<Vec<f64>>,
}

/// Convex combination of the center and its neighbors, view by view.
pub fn synthesize(
    set: &NeighborSet,
    weights: &[NeighborWeights],
    data: &MultiViewDataset,
) -> Result<PseudoSample> {
    check_len(data.num_views(), weights.len(), "per-view weights")?;
    let members: Vec<usize> = std::iter::once(set.center).chain(set.neighbors.iter().copied()).collect();
    if let Some(&bad) = members.iter().find(|&&i| i >= data.len()) {
        return Err(Error::invalid(format!("sample {bad} is out of range")));
    }
    let mut views = Vec::with_capacity(data.num_views());
    for (v, w) in weights.iter().enumerate() {
        check_len(members.len(), w.weights().len(), "neighbor weights")?;
        let m = data.view(v);
        let mut x = vec![0.0; m.cols()];
        for (&id, &wr) in members.iter().zip(w.weights()) {
            for (acc, f) in x.iter_mut().zip(m.row(id)) {
                *acc += wr * f;
            }
        }
        views.push(x);
    }
    Ok(PseudoSample {
        label: data.labels()[set.center],
        views,
        center: set.center,
        neighbors: set.neighbors.clone(),
        weights: weights.iter().map(|w| w.weights().to_vec()).collect(),
    })
}

/// Per-sample evidence keyed by sample id: joint evidence drives the
/// neighbor search, per-view evidence drives the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEvidence {
    joint: Vec<Evidence>,
    views: Vec<Vec<Evidence>>,
}

impl SampleEvidence {
    /// `views[v][i]` is view `v`'s evidence for sample `i`.
    pub fn new(views: Vec<Vec<Evidence>>) -> Result<Self> {
        let n = views.first().map_or(0, Vec::len);
        if views.iter().any(|v| v.len() != n) {
            return Err(Error::invalid("every view needs evidence for every sample"));
        }
        let joint = (0..n)
            .map(|i| fold_evidence(&views.iter().map(|v| v[i].clone()).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        Ok(SampleEvidence { joint, views })
    }

    pub fn joint(&self) -> &[Evidence] {
        &self.joint
    }

    pub fn view(&self, v: usize) -> &[Evidence] {
        &self.views[v]
    }

    pub fn len(&self) -> usize {
        self.joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.is_empty()
    }
}

/// How per-view mixing weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    #[default]
    Uncertainty,
    /// Ablation: weights drawn uniformly at random.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceConfig {
    pub neighbors: usize,
    pub transform: WeightTransform,
    pub scheme: WeightScheme,
    pub seed: u64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        BalanceConfig {
            neighbors: DEFAULT_NEIGHBORS,
            transform: WeightTransform::Inverse,
            scheme: WeightScheme::Uncertainty,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassBalance {
    pub samples: Vec<PseudoSample>,
    /// Neighbor count actually used (reduced for small classes).
    pub neighbors_used: usize,
    pub warnings: Vec<String>,
}

/// Generates pseudo-samples for class `class` until it holds `target` samples.
/// Centers are drawn uniformly from the real samples of the class; pseudo-samples
/// are never reused as centers or neighbors.
pub fn balance_class(
    data: &MultiViewDataset,
    class: usize,
    target: usize,
    evidence: &SampleEvidence,
    base_rates: &BaseRates,
    cfg: &BalanceConfig,
) -> Result<ClassBalance> {
    check_len(data.len(), evidence.len(), "sample evidence")?;
    if cfg.neighbors == 0 {
        return Err(Error::Config("neighbor count R must be positive".into()));
    }
    let pool = data.class_indices(class);
    let mut warnings = Vec::new();
    if target <= pool.len() {
        return Ok(ClassBalance {
            samples: Vec::new(),
            neighbors_used: cfg.neighbors.min(pool.len().saturating_sub(1)),
            warnings,
        });
    }
    if pool.len() < 2 {
        return Err(Error::UnbalanceableClass {
            class,
            count: pool.len(),
        });
    }
    let r = cfg.neighbors.min(pool.len() - 1);
    if r < cfg.neighbors {
        warnings.push(format!(
            "class {class} has {} samples; neighbor count reduced from {} to {r}",
            pool.len(),
            cfg.neighbors
        ));
    }

    let mut center_rng = stream_rng(cfg.seed, Stream::Oversample, class as u64);
    let mut weight_rng = stream_rng(cfg.seed, Stream::RandomWeights, class as u64);
    let mut samples = Vec::with_capacity(target - pool.len());
    while pool.len() + samples.len() < target {
        let center = pool[center_rng.random_range(0..pool.len())];
        let set = find_neighbors(center, &pool, evidence.joint(), r)?;
        let weights = (0..data.num_views())
            .map(|v| match cfg.scheme {
                WeightScheme::Uncertainty => {
                    neighbor_weights(&set, evidence.view(v), class, base_rates, cfg.transform)
                }
                WeightScheme::Random => random_weights_ablation(r, &mut weight_rng),
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(synthesize(&set, &weights, data)?);
    }
    Ok(ClassBalance {
        samples,
        neighbors_used: r,
        warnings,
    })
}

/// Result of balancing every class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BalanceReport {
    pub target: usize,
    pub samples: Vec<PseudoSample>,
    pub pseudo_counts: Vec<usize>,
    pub unbalanceable: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Raises every class to `target` (default: the largest class count).
/// Classes with fewer than two samples are skipped and reported.
pub fn balance_all(
    data: &MultiViewDataset,
    evidence: &SampleEvidence,
    base_rates: &BaseRates,
    cfg: &BalanceConfig,
    target: Option<usize>,
) -> Result<BalanceReport> {
    let counts = data.class_counts();
    let target = target.unwrap_or_else(|| counts.iter().copied().max().unwrap_or(0));
    let mut report = BalanceReport {
        target,
        pseudo_counts: vec![0; data.num_classes()],
        ..BalanceReport::default()
    };
    for class in 0..data.num_classes() {
        match balance_class(data, class, target, evidence, base_rates, cfg) {
            Ok(b) => {
                report.pseudo_counts[class] = b.samples.len();
                report.samples.extend(b.samples);
                report.warnings.extend(b.warnings);
            }
            Err(Error::UnbalanceableClass { class, count }) => {
                report.unbalanceable.push(class);
                report.warnings.push(format!(
                    "class {class} has {count} sample(s) and cannot be oversampled"
                ));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// `data` followed by the pseudo-samples as extra rows.
pub fn augment(data: &MultiViewDataset, samples: &[PseudoSample]) -> Result<MultiViewDataset> {
    let mut out = data.clone();
    for s in samples {
        out.push(&s.views, s.label)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct ProvenanceRecord<'a> {
    row: usize,
    label: usize,
    center: usize,
    neighbors: &'a [usize],
    weights: &'a [Vec<f64>],
}

/// One JSON object per line per pseudo-sample. `first_row` is the row index
/// the first pseudo-sample occupies in the augmented dataset.
pub fn write_provenance(path: &Path, samples: &[PseudoSample], first_row: usize) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (i, s) in samples.iter().enumerate() {
        let rec = ProvenanceRecord {
            row: first_row + i,
            label: s.label,
            center: s.center,
            neighbors: &s.neighbors,
            weights: &s.weights,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic_fixture, FixtureSpec, Matrix};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ev(m: &[f64]) -> Evidence {
        Evidence::new(m.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(evidence_distance(&ev(&[3.0, 4.0]), &ev(&[0.0, 0.0])).unwrap(), 5.0);
        assert_eq!(evidence_distance(&ev(&[1.0, 2.0, 3.0]), &ev(&[1.0, 2.0, 3.5])).unwrap(), 0.5);
        assert_eq!(evidence_distance(&ev(&[2.0, 7.0]), &ev(&[2.0, 7.0])).unwrap(), 0.0);
        assert!(evidence_distance(&ev(&[1.0, 2.0]), &ev(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn neighbor_examples() {
        let joint = vec![ev(&[0.0, 0.0]), ev(&[1.0, 0.0]), ev(&[5.0, 0.0])];
        let s = find_neighbors(0, &[0, 1, 2], &joint, 1).unwrap();
        assert_eq!(s.neighbors, vec![1]);
        assert_eq!(s.distances, vec![1.0]);

        let s = find_neighbors(2, &[0, 2], &joint, 1).unwrap();
        assert_eq!(s.neighbors, vec![0]);

        // ids 1 and 2 both sit at distance 1 from id 0
        let joint = vec![ev(&[1.0, 1.0]), ev(&[2.0, 1.0]), ev(&[1.0, 2.0]), ev(&[9.0, 9.0])];
        let s = find_neighbors(0, &[3, 2, 1, 0], &joint, 2).unwrap();
        assert_eq!(s.neighbors, vec![1, 2]);

        assert!(matches!(
            find_neighbors(0, &[0, 1], &joint, 2),
            Err(Error::InsufficientNeighbors { requested: 2, available: 1 })
        ));
        assert!(find_neighbors(0, &[1, 2], &joint, 1).is_err());
    }

    #[test]
    fn integrate_examples() {
        assert_eq!(integrate_evidence(&ev(&[4.0, 0.0]), &ev(&[0.0, 2.0])).unwrap().masses(), &[2.0, 1.0]);
        assert_eq!(integrate_evidence(&ev(&[0.0, 0.0]), &ev(&[6.0, 2.0])).unwrap().masses(), &[3.0, 1.0]);
        assert_eq!(integrate_evidence(&ev(&[1.5, 3.0]), &ev(&[1.5, 3.0])).unwrap().masses(), &[1.5, 3.0]);
    }

    fn opinion(b: &[f64], u: f64) -> Opinion {
        Opinion::new(b.to_vec(), u, BaseRates::uniform(b.len()).unwrap()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let h = uncertainty_entropy(&opinion(&[0.8, 0.2], 0.0), 0).unwrap();
        assert!((h - 0.2231435513142097).abs() < 1e-12);
        let h = uncertainty_entropy(&opinion(&[0.4, 0.1], 0.5), 0).unwrap();
        assert!((h - 0.7102409568158579).abs() < 1e-12);
        let h = uncertainty_entropy(&opinion(&[1.0, 0.0], 0.0), 0).unwrap();
        assert_eq!(h, 0.0);
        assert!(matches!(
            uncertainty_entropy(&opinion(&[1.0, 0.0], 0.0), 1),
            Err(Error::DegenerateOpinion(_))
        ));
    }

    #[test]
    fn weight_examples() {
        let w = weights_from_entropies(&[0.7, 0.7], WeightTransform::Inverse).unwrap();
        assert_eq!(w.weights(), &[0.5, 0.5]);
        let w = weights_from_entropies(&[1.0, 1.0, 2.0], WeightTransform::Inverse).unwrap();
        for (a, b) in w.weights().iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        // a zero entropy hits the floor instead of dividing by zero
        let w = weights_from_entropies(&[0.0, 1.0], WeightTransform::Inverse).unwrap();
        assert!(w.weights()[0] > 0.999_999 && w.weights()[1] > 0.0);
    }

    #[test]
    fn center_slot_uses_its_own_evidence() {
        let view = vec![ev(&[3.0, 1.0]), ev(&[3.0, 1.0])];
        let set = NeighborSet {
            center: 0,
            neighbors: vec![1],
            distances: vec![0.0],
        };
        let w = neighbor_weights(&set, &view, 0, &BaseRates::uniform(2).unwrap(), WeightTransform::Inverse).unwrap();
        assert_eq!(w.weights(), &[0.5, 0.5]);

        // a confident neighbor pulls weight away from an unsure center
        let view = vec![ev(&[0.5, 0.5]), ev(&[20.0, 0.0])];
        let w = neighbor_weights(&set, &view, 0, &BaseRates::uniform(2).unwrap(), WeightTransform::Inverse).unwrap();
        assert!(w.weights()[1] > w.weights()[0]);
    }

    fn two_point_data() -> MultiViewDataset {
        MultiViewDataset::new(
            "pts",
            2,
            vec![
                Matrix::new(3, 2, vec![0.0, 0.0, 2.0, 4.0, 9.0, 9.0]).unwrap(),
                Matrix::new(3, 1, vec![1.0, 3.0, 5.0]).unwrap(),
            ],
            vec![0, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn synthesize_examples() {
        let data = two_point_data();
        let set = NeighborSet {
            center: 0,
            neighbors: vec![1],
            distances: vec![1.0],
        };
        let half = NeighborWeights::new(vec![0.5, 0.5]).unwrap();
        let s = synthesize(&set, &[half.clone(), half], &data).unwrap();
        assert_eq!(s.views, vec![vec![1.0, 2.0], vec![2.0]]);
        assert_eq!(s.label, 0);

        let all_center = NeighborWeights::new(vec![1.0, 0.0]).unwrap();
        let s = synthesize(&set, &[all_center.clone(), all_center], &data).unwrap();
        assert_eq!(s.views, vec![vec![0.0, 0.0], vec![1.0]]);
    }

    fn fixture(counts: Vec<usize>) -> (MultiViewDataset, SampleEvidence) {
        let data = make_synthetic_fixture(&FixtureSpec {
            num_classes: counts.len(),
            view_dims: vec![3, 2],
            class_counts: counts,
            separation: 3.0,
            seed: 12,
        })
        .unwrap();
        // stand-in evidence: rectified features padded to K
        let k = data.num_classes();
        let views = (0..data.num_views())
            .map(|v| {
                (0..data.len())
                    .map(|i| {
                        let row = data.view(v).row(i);
                        ev(&(0..k).map(|c| row[c % row.len()].abs() + c as f64 * 0.1).collect::<Vec<_>>())
                    })
                    .collect()
            })
            .collect();
        let evidence = SampleEvidence::new(views).unwrap();
        (data, evidence)
    }

    #[test]
    fn balance_class_counts() {
        let (data, evidence) = fixture(vec![10, 3, 1]);
        let rates = BaseRates::uniform(3).unwrap();
        let cfg = BalanceConfig::default();

        let b = balance_class(&data, 0, 10, &evidence, &rates, &cfg).unwrap();
        assert!(b.samples.is_empty());

        let b = balance_class(&data, 1, 5, &evidence, &rates, &cfg).unwrap();
        assert_eq!(b.samples.len(), 2);
        assert!(b.samples.iter().all(|s| s.label == 1));
        assert_eq!(b.neighbors_used, 2);
        assert_eq!(b.warnings.len(), 1);

        assert!(matches!(
            balance_class(&data, 2, 5, &evidence, &rates, &cfg),
            Err(Error::UnbalanceableClass { class: 2, count: 1 })
        ));
    }

    #[test]
    fn balance_all_equalizes_and_is_deterministic() {
        let (data, evidence) = fixture(vec![30, 18, 11, 6, 2, 1]);
        let rates = BaseRates::uniform(6).unwrap();
        for scheme in [WeightScheme::Uncertainty, WeightScheme::Random] {
            let cfg = BalanceConfig {
                scheme,
                seed: 5,
                ..BalanceConfig::default()
            };
            let report = balance_all(&data, &evidence, &rates, &cfg, None).unwrap();
            assert_eq!(report.unbalanceable, vec![5]);
            let augmented = augment(&data, &report.samples).unwrap();
            assert_eq!(augmented.class_counts(), vec![30, 30, 30, 30, 30, 1]);
            for s in &report.samples {
                assert!(s.center < data.len() && s.neighbors.iter().all(|&n| n < data.len()));
                assert!(s.neighbors.iter().all(|&n| data.labels()[n] == s.label));
            }
            assert_eq!(report, balance_all(&data, &evidence, &rates, &cfg, None).unwrap());
        }
    }

    #[test]
    fn ablation_uses_the_same_centers() {
        let (data, evidence) = fixture(vec![20, 5]);
        let rates = BaseRates::uniform(2).unwrap();
        let full = BalanceConfig::default();
        let random = BalanceConfig {
            scheme: WeightScheme::Random,
            ..full
        };
        let a = balance_class(&data, 1, 20, &evidence, &rates, &full).unwrap();
        let b = balance_class(&data, 1, 20, &evidence, &rates, &random).unwrap();
        let centers = |c: &ClassBalance| c.samples.iter().map(|s| (s.center, s.neighbors.clone())).collect::<Vec<_>>();
        assert_eq!(centers(&a), centers(&b));
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn provenance_lines() {
        let (data, evidence) = fixture(vec![8, 4]);
        let report = balance_all(&data, &evidence, &BaseRates::uniform(2).unwrap(), &BalanceConfig::default(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prov.jsonl");
        write_provenance(&path, &report.samples, data.len()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["row"], 12);
        assert_eq!(first["label"], 1);
        assert_eq!(first["weights"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn random_weights_examples() {
        let draw = |seed| random_weights_ablation(4, &mut stream_rng(seed, Stream::RandomWeights, 0)).unwrap();
        assert_eq!(draw(3), draw(3));
        assert_eq!(draw(3).weights().len(), 5);
        assert!(random_weights_ablation(0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| random_weights_ablation(1, &mut rng).unwrap().weights()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean w0 {mean}");
    }

    fn evidence_vec(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..100.0f64, k)
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in evidence_vec(4), b in evidence_vec(4), c in evidence_vec(4)) {
            let (a, b, c) = (ev(&a), ev(&b), ev(&c));
            let ab = evidence_distance(&a, &b).unwrap();
            let ba = evidence_distance(&b, &a).unwrap();
            let bc = evidence_distance(&b, &c).unwrap();
            let ac = evidence_distance(&a, &c).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(evidence_distance(&a, &a).unwrap(), 0.0);
            prop_assert!(ac <= ab + bc + 1e-9);
            if a != b {
                prop_assert!(ab > 0.0);
            }
        }

        #[test]
        fn weights_are_probability_vectors(h in proptest::collection::vec(0.0..50.0f64, 1..10)) {
            let w = weights_from_entropies(&h, WeightTransform::Inverse).unwrap();
            let sum: f64 = w.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(w.weights().iter().all(|x| *x >= 0.0));
        }

        #[test]
        fn lower_entropy_gets_more_weight(
            h in proptest::collection::vec(0.01..50.0f64, 2..8),
            slot in 0usize..8,
            shrink in 0.01..0.99f64,
        ) {
            let slot = slot % h.len();
            let before = weights_from_entropies(&h, WeightTransform::Inverse).unwrap();
            let mut lowered = h.clone();
            lowered[slot] *= shrink;
            let after = weights_from_entropies(&lowered, WeightTransform::Inverse).unwrap();
            prop_assert!(after.weights()[slot] > before.weights()[slot]);
        }

        #[test]
        fn pseudo_features_stay_in_the_hull(seed in 0u64..500) {
            let (data, evidence) = fixture(vec![12, 5]);
            let cfg = BalanceConfig { seed, ..BalanceConfig::default() };
            let b = balance_class(&data, 1, 12, &evidence, &BaseRates::uniform(2).unwrap(), &cfg).unwrap();
            for s in &b.samples {
                let members: Vec<usize> = std::iter::once(s.center).chain(s.neighbors.iter().copied()).collect();
                for (v, x) in s.views.iter().enumerate() {
                    for (j, xj) in x.iter().enumerate() {
                        let col = members.iter().map(|&i| data.view(v).row(i)[j]);
                        let lo = col.clone().fold(f64::INFINITY, f64::min);
                        let hi = col.fold(f64::NEG_INFINITY, f64::max);
                        prop_assert!(*xj >= lo - 1e-12 && *xj <= hi + 1e-12);
                    }
                }
            }
        }
    }
}
