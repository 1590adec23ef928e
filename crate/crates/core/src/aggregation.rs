//! Group-consensus aggregation of per-view opinions.
//!
//! Views are folded left to right. At step `V` the accumulated group result
//! of the first `V-1` views is weighted by `(V-1)/V` and the incoming view by
//! `1/V`, so the group dominates each merge. Unrolled, the fold is the
//! arithmetic mean of the view evidences.
//!
//! Two routes are provided: the evidence-space fold, which the rest of the
//! crate uses, and the opinion-space closed form over `(b, u)` pairs. They are
//! algebraically identical; the evidence route avoids dividing by small
//! uncertainties when evidence is large.

use crate::error::{check_len, Error, Result};
use crate::opinion::{BaseRates, Evidence, Opinion};

/// Merge weights for one fold step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationWeights {
    pub group_weight: f64,
    pub individual_weight: f64,
}

impl AggregationWeights {
    /// Weights for merging the `views`-th view into the group of `views - 1`.
    pub fn for_views(views: usize) -> Result<Self> {
        if views < 2 {
            return Err(Error::invalid("a merge step needs at least 2 views"));
        }
        let individual_weight = 1.0 / views as f64;
        Ok(AggregationWeights {
            group_weight: 1.0 - individual_weight,
            individual_weight,
        })
    }

    /// Weights when the group already holds `group_count` views.
    pub fn for_group_count(group_count: usize) -> Result<Self> {
        if group_count == 0 {
            return Err(Error::invalid("group_count must be >= 1"));
        }
        Self::for_views(group_count + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// 1-based number of views folded so far.
    pub step: usize,
    pub opinion: Opinion,
    pub evidence: Evidence,
}

/// Intermediate results of the sequential fold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointOpinionTrace {
    pub per_step: Vec<TraceStep>,
}

pub fn fuse_pair_evidence(
    group: &Evidence,
    group_count: usize,
    individual: &Evidence,
) -> Result<Evidence> {
    check_len(group.num_classes(), individual.num_classes(), "fused evidence")?;
    let w = AggregationWeights::for_group_count(group_count)?;
    Evidence::new(
        group
            .masses()
            .iter()
            .zip(individual.masses())
            .map(|(g, i)| w.group_weight * g + w.individual_weight * i)
            .collect(),
    )
}

/// Closed-form merge of two opinions with arbitrary weights summing to one.
///
/// `u = uA uB / (gB uA + gA uB)`, `b_k = (gA bA_k uB + gB bB_k uA) / (gB uA + gA uB)`.
pub fn fuse_weighted_opinion(
    a: &Opinion,
    gamma_a: f64,
    b: &Opinion,
    gamma_b: f64,
) -> Result<Opinion> {
    check_len(a.num_classes(), b.num_classes(), "fused opinions")?;
    if a.base_rates() != b.base_rates() {
        return Err(Error::invalid("fused opinions must share base rates"));
    }
    if !(gamma_a > 0.0 && gamma_b > 0.0) || (gamma_a + gamma_b - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "fusion weights must be positive and sum to 1, got {gamma_a} and {gamma_b}"
        )));
    }
    let (ua, ub) = (a.uncertainty(), b.uncertainty());
    if ua <= 0.0 || ub <= 0.0 {
        return Err(Error::DegenerateOpinion(
            "opinion fusion requires nonzero uncertainty on both sides".into(),
        ));
    }
    let denom = gamma_b * ua + gamma_a * ub;
    let beliefs = a
        .beliefs()
        .iter()
        .zip(b.beliefs())
        .map(|(ba, bb)| ((gamma_a * ba * ub + gamma_b * bb * ua) / denom).clamp(0.0, 1.0))
        .collect();
    let u = (ua * ub / denom).clamp(0.0, 1.0);
    Opinion::new(beliefs, u, a.base_rates().clone())
}

pub fn fuse_pair_opinion(
    group: &Opinion,
    group_count: usize,
    individual: &Opinion,
) -> Result<Opinion> {
    let w = AggregationWeights::for_group_count(group_count)?;
    fuse_weighted_opinion(group, w.group_weight, individual, w.individual_weight)
}

fn shared_base_rates(opinions: &[Opinion]) -> Result<&BaseRates> {
    let first = opinions
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty set of views"))?;
    for o in &opinions[1..] {
        check_len(first.num_classes(), o.num_classes(), "aggregated views")?;
        if o.base_rates() != first.base_rates() {
            return Err(Error::invalid("aggregated views must share base rates"));
        }
    }
    Ok(first.base_rates())
}

/// Left fold in evidence space over a sequence of view evidences.
pub fn fold_evidence(evidences: &[Evidence]) -> Result<Evidence> {
    let (first, rest) = evidences
        .split_first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty set of views"))?;
    let mut acc = first.clone();
    for (i, e) in rest.iter().enumerate() {
        acc = fuse_pair_evidence(&acc, i + 1, e)?;
    }
    Ok(acc)
}

/// Aggregates `V` view opinions into the joint opinion, recording every step.
///
/// The fold runs in evidence space. A single view is returned unchanged.
pub fn aggregate_views(opinions: &[Opinion]) -> Result<(Opinion, JointOpinionTrace)> {
    let base_rates = shared_base_rates(opinions)?;
    let mut trace = JointOpinionTrace::default();
    let mut group_e = opinions[0].to_evidence()?;
    trace.per_step.push(TraceStep {
        step: 1,
        opinion: opinions[0].clone(),
        evidence: group_e.clone(),
    });
    for (i, o) in opinions.iter().enumerate().skip(1) {
        group_e = fuse_pair_evidence(&group_e, i, &o.to_evidence()?)?;
        trace.per_step.push(TraceStep {
            step: i + 1,
            opinion: group_e.to_opinion(base_rates)?,
            evidence: group_e.clone(),
        });
    }
    let joint = trace.per_step.last().map(|s| s.opinion.clone()).unwrap();
    Ok((joint, trace))
}

/// Same fold computed entirely with the opinion-space closed form.
pub fn aggregate_views_opinion_space(opinions: &[Opinion]) -> Result<Opinion> {
    shared_base_rates(opinions)?;
    let mut acc = opinions[0].clone();
    for (i, o) in opinions.iter().enumerate().skip(1) {
        acc = fuse_pair_opinion(&acc, i, o)?;
    }
    Ok(acc)
}

/// Evidence of the joint opinion.
pub fn joint_evidence(opinions: &[Opinion]) -> Result<Evidence> {
    aggregate_views(opinions)?.0.to_evidence()
}
