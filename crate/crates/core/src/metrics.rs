//! Similarity between policies.
//!
//! Syntactic similarity compares rule structure bottom-up; semantic
//! similarity is the Jaccard index of the granted requests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::features::ExtractionLimits;
use crate::miner::merge_and_simplify;
use crate::model::{meaning, AclPolicy, AtomicCondition, ClassModel, ObjectModel, Path, Policy, Rule};

/// `|S1 ∩ S2| / |S1 ∪ S2|`, with two empty sets counting as identical.
pub fn jaccard<T: Ord>(s1: &BTreeSet<T>, s2: &BTreeSet<T>) -> f64 {
    let union = s1.union(s2).count();
    if union == 0 {
        return 1.0;
    }
    s1.intersection(s2).count() as f64 / union as f64
}

/// Jaccard extended to single values: 1 if equal, 0 otherwise.
pub fn jaccard_value<T: PartialEq>(v1: &T, v2: &T) -> f64 {
    if v1 == v2 {
        1.0
    } else {
        0.0
    }
}

pub fn syn_sim_atomic_condition(ac1: &AtomicCondition, ac2: &AtomicCondition) -> f64 {
    if ac1.path != ac2.path {
        return 0.0;
    }
    (jaccard_value(&ac1.negated, &ac2.negated) + jaccard_value(&ac1.path, &ac2.path) + jaccard(&ac1.value, &ac2.value))
        / 3.0
}

pub fn syn_condition_sets(s1: &BTreeSet<AtomicCondition>, s2: &BTreeSet<AtomicCondition>) -> f64 {
    let paths: BTreeSet<&Path> = s1.iter().chain(s2).map(|c| &c.path).collect();
    if paths.is_empty() {
        return 1.0;
    }
    let sum: f64 = s1.iter().flat_map(|a| s2.iter().map(move |b| syn_sim_atomic_condition(a, b))).sum();
    sum / paths.len() as f64
}

pub fn syn_rule(r1: &Rule, r2: &Rule) -> f64 {
    let parts = [
        jaccard_value(&r1.subject_type, &r2.subject_type),
        syn_condition_sets(&r1.subject_condition, &r2.subject_condition),
        jaccard_value(&r1.resource_type, &r2.resource_type),
        syn_condition_sets(&r1.resource_condition, &r2.resource_condition),
        jaccard(&r1.constraint, &r2.constraint),
        jaccard(&r1.actions, &r2.actions),
    ];
    parts.iter().sum::<f64>() / parts.len() as f64
}

/// The most similar rule of `among` and its score.
pub fn best_match<'a>(rule: &Rule, among: &'a [Rule]) -> Option<(&'a Rule, f64)> {
    among
        .iter()
        .map(|r| (r, syn_rule(rule, r)))
        .fold(None, |best, (r, s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((r, s)),
        })
}

/// Average over the rules of `p1` of their best match in `p2`. Not
/// symmetric.
pub fn syn_policy(p1: &[Rule], p2: &[Rule]) -> f64 {
    if p1.is_empty() {
        return if p2.is_empty() { 1.0 } else { 0.0 };
    }
    if p2.is_empty() {
        return 0.0;
    }
    p1.iter().map(|r| best_match(r, p2).map_or(0.0, |(_, s)| s)).sum::<f64>() / p1.len() as f64
}

pub fn semantic_similarity(cm: &ClassModel, om: &ObjectModel, p1: &[Rule], p2: &[Rule]) -> f64 {
    jaccard(&meaning(cm, om, p1), &meaning(cm, om, p2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleMatch {
    pub rule: String,
    pub best_match: Option<String>,
    pub score: f64,
}

/// Comparison of a mined policy with a reference policy.
///
/// `syntactic` averages over the reference rules, so it measures how well
/// each intended rule was recovered; rules the miner adds to cover requests
/// hidden by unknown values only show up in `syntactic_mined_to_reference`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub syntactic: f64,
    pub syntactic_mined_to_reference: f64,
    pub semantic: f64,
    /// Best mined match for each reference rule.
    pub per_rule_best_match: Vec<RuleMatch>,
    pub wsc_mined: usize,
    pub wsc_reference: usize,
}

impl SimilarityReport {
    pub fn compute(cm: &ClassModel, om: &ObjectModel, mined: &[Rule], reference: &[Rule]) -> Self {
        let per_rule_best_match = reference
            .iter()
            .map(|r| {
                let best = best_match(r, mined);
                RuleMatch {
                    rule: r.to_string(),
                    best_match: best.map(|(b, _)| b.to_string()),
                    score: best.map_or(0.0, |(_, s)| s),
                }
            })
            .collect();
        SimilarityReport {
            syntactic: syn_policy(reference, mined),
            syntactic_mined_to_reference: syn_policy(mined, reference),
            semantic: semantic_similarity(cm, om, mined, reference),
            per_rule_best_match,
            wsc_mined: crate::model::wsc_policy(mined),
            wsc_reference: crate::model::wsc_policy(reference),
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "syntactic similarity  {:.4} (mined to reference {:.4})\nsemantic similarity   {:.4}\nWSC mined / reference {} / {}\n",
            self.syntactic, self.syntactic_mined_to_reference, self.semantic, self.wsc_mined, self.wsc_reference
        );
        for m in &self.per_rule_best_match {
            out.push_str(&format!(
                "{:.3}  {}\n       mined: {}\n",
                m.score,
                m.rule,
                m.best_match.as_deref().unwrap_or("-")
            ));
        }
        out
    }
}

/// The reference after the same merging and simplification the miner
/// applies, judged against its own meaning.
pub fn simplify_reference(cm: &ClassModel, om: &ObjectModel, reference: &Policy, limits: &ExtractionLimits) -> Policy {
    let acl = AclPolicy::new(cm.clone(), om.clone(), meaning(cm, om, &reference.rules));
    Policy::new(merge_and_simplify(reference.rules.clone(), &acl, limits, &mut |_, _| {}).rules)
}

/// Compares a mined policy with the simplified reference.
pub fn evaluate(cm: &ClassModel, om: &ObjectModel, mined: &Policy, reference: &Policy) -> SimilarityReport {
    let simplified = simplify_reference(cm, om, reference, &ExtractionLimits::default());
    SimilarityReport::compute(cm, om, &mined.rules, &simplified.rules)
}
