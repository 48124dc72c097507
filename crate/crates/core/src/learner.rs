//! Learning a DNF formula in Kleene logic that exactly characterizes the
//! T-labeled vectors of a dataset.
//!
//! The loop repeatedly grows a multi-way tree on the rows not yet covered,
//! turns every path to a T leaf into a conjunction, and then gets rid of the
//! `f = U` conditions those paths contain: each one is dropped if the rest of
//! the conjunction stays valid, otherwise replaced by some other literal that
//! keeps it valid without losing coverage. Conjunctions that cannot be
//! cleaned are discarded and their `f = U` features blacklisted for later
//! rounds. Whatever is still uncovered after `max_iter` rounds gets one
//! conjunction per vector.

use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{build_tree_on, extract_true_paths};
use crate::tvl::{
    conjunction_valid, covers, eval_conjunction, eval_disjuncts, remove_redundant, valid, Conjunction,
    DnfFormula, FeatureId, FeatureVector, LabeledDataset, Literal, Polarity, TruthValue,
};

/// Order in which replacement literals for an `f = U` condition are tried.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReplacementOrder {
    /// Positive literals before negative ones, then ascending cost, then
    /// ascending feature index.
    #[default]
    PositiveFirstByCost,
    /// Ascending feature index, positive before negative per feature.
    ByIndex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub max_iter: usize,
    pub replacement_order: ReplacementOrder,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            max_iter: 5,
            replacement_order: ReplacementOrder::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnResult {
    pub formula: DnfFormula,
    /// Some vectors had to be covered one at a time.
    pub used_fallback: bool,
    pub blacklisted: BTreeSet<FeatureId>,
    pub iterations: usize,
}

/// Outcome of cleaning one path conjunction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Elimination {
    Clean(Conjunction),
    /// Features of the `f = U` conditions left over; to be blacklisted.
    Failed(BTreeSet<FeatureId>),
}

/// Supplies the conjunction used to cover row `i` one at a time.
pub type FallbackFn<'a> = dyn Fn(usize, &LabeledDataset) -> Conjunction + 'a;

/// Formula learner with optional reserved features and per-row fallback.
pub struct Learner<'a> {
    cfg: &'a LearnerConfig,
    reserved: BTreeSet<FeatureId>,
    fallback: Option<&'a FallbackFn<'a>>,
}

impl<'a> Learner<'a> {
    pub fn new(cfg: &'a LearnerConfig) -> Self {
        Learner { cfg, reserved: BTreeSet::new(), fallback: None }
    }

    /// Features that trees and replacements must never use (they may still
    /// appear in fallback conjunctions).
    pub fn reserve(mut self, features: impl IntoIterator<Item = FeatureId>) -> Self {
        self.reserved.extend(features);
        self
    }

    pub fn with_fallback(mut self, f: &'a FallbackFn<'a>) -> Self {
        self.fallback = Some(f);
        self
    }

    pub fn learn(&self, data: &LabeledDataset) -> Result<LearnResult> {
        let max_iter = self.cfg.max_iter.max(1);
        let mut formula: BTreeSet<Conjunction> = BTreeSet::new();
        let mut blacklist: BTreeSet<FeatureId> = BTreeSet::new();
        let mut iterations = 0;

        let covered = |d: &BTreeSet<Conjunction>, v: &FeatureVector| eval_disjuncts(d.iter(), v).is_true();
        let uncovered = |d: &BTreeSet<Conjunction>| {
            data.rows.iter().any(|r| r.label.is_true() && !covered(d, &r.values))
        };

        while uncovered(&formula) && iterations < max_iter {
            let remaining: Vec<usize> = (0..data.rows.len())
                .filter(|&i| {
                    let r = &data.rows[i];
                    !(r.label.is_true() && covered(&formula, &r.values))
                })
                .collect();
            let excluded: BTreeSet<FeatureId> = blacklist.union(&self.reserved).copied().collect();
            let tree = build_tree_on(data, &remaining, &excluded);
            let mut paths = extract_true_paths(&tree);

            let (clean, mut dirty): (Vec<_>, Vec<_>) = paths.drain(..).partition(|c| !c.has_unknown_literal());
            let t_rows: Vec<usize> = remaining.iter().copied().filter(|&i| data.rows[i].label.is_true()).collect();
            let coverage = |c: &Conjunction| {
                t_rows.iter().filter(|&&i| eval_conjunction(c, &data.rows[i].values).is_true()).count()
            };
            dirty.sort_by(|a, b| coverage(b).cmp(&coverage(a)).then_with(|| a.cmp(b)));

            // D' as it evolves: clean paths, then unprocessed dirty ones, with
            // each cleaned conjunction added as soon as it is ready.
            let mut current: Vec<Conjunction> = clean;
            let mut pending: Vec<Conjunction> = dirty;
            while !pending.is_empty() {
                let c = pending.remove(0);
                let others: Vec<&Conjunction> = current.iter().chain(pending.iter()).collect();
                match eliminate_unknown_literals(&c, data, &others, &remaining, self.cfg.replacement_order, &self.reserved) {
                    Elimination::Clean(c2) => current.push(c2),
                    Elimination::Failed(fs) => blacklist.extend(fs),
                }
            }
            formula.extend(current);
            iterations += 1;
        }

        let mut used_fallback = false;
        if uncovered(&formula) {
            used_fallback = true;
            let todo: Vec<usize> = (0..data.rows.len())
                .filter(|&i| data.rows[i].label.is_true() && !covered(&formula, &data.rows[i].values))
                .collect();
            for i in todo {
                let c = match self.fallback {
                    Some(f) => f(i, data),
                    None => default_cover_conjunction(&data.rows[i].values),
                };
                if c.is_empty() {
                    warn!("row {} ({}) has no definite feature; its cover conjunction is always true", i, data.rows[i].describe());
                }
                formula.insert(c);
            }
        }

        let formula = remove_redundant(&DnfFormula::from_conjunctions(formula));
        if !valid(&formula, data) || !covers(&formula, data) || formula.has_unknown_literal() {
            let row = data
                .rows
                .iter()
                .position(|r| {
                    let v = crate::tvl::eval_dnf(&formula, &r.values);
                    v.is_true() != r.label.is_true()
                })
                .unwrap_or(0);
            return Err(Error::NonMonotonicOrInsufficientFeatures {
                row,
                provenance: data.rows.get(row).map(|r| r.describe()).unwrap_or_default(),
            });
        }
        Ok(LearnResult { formula, used_fallback, blacklisted: blacklist, iterations })
    }
}

/// Learns with the default per-vector fallback and no reserved features.
pub fn learn_formula(data: &LabeledDataset, cfg: &LearnerConfig) -> Result<LearnResult> {
    Learner::new(cfg).learn(data)
}

/// Removes or replaces every `f = U` condition of `c`.
///
/// Removal is accepted when the shortened conjunction is valid on all of
/// `data`. Otherwise each literal over a feature not used in `c` (positive
/// and negated) is tried in `order`; a replacement must be valid on `data`
/// and keep covering the T rows of `remaining` that `c` was responsible for,
/// i.e. those no conjunction in `others` covers.
pub fn eliminate_unknown_literals(
    c: &Conjunction,
    data: &LabeledDataset,
    others: &[&Conjunction],
    remaining: &[usize],
    order: ReplacementOrder,
    reserved: &BTreeSet<FeatureId>,
) -> Elimination {
    let required: Vec<usize> = remaining
        .iter()
        .copied()
        .filter(|&i| {
            let r = &data.rows[i];
            r.label.is_true()
                && eval_conjunction(c, &r.values).is_true()
                && !others.iter().any(|o| eval_conjunction(o, &r.values).is_true())
        })
        .collect();

    let mut candidates: Vec<Literal> = data
        .feature_ids()
        .filter(|f| !c.uses(*f) && !reserved.contains(f))
        .flat_map(|f| [Literal::pos(f), Literal::neg(f)])
        .collect();
    match order {
        ReplacementOrder::PositiveFirstByCost => candidates.sort_by_key(|l| {
            (l.polarity != Polarity::Positive, data.cost(l.feature), l.feature)
        }),
        ReplacementOrder::ByIndex => candidates.sort_by_key(|l| (l.feature, l.polarity)),
    }

    let mut current = c.clone();
    for fu in c.unknown_features() {
        let mut without = current.clone();
        without.remove(fu);
        if conjunction_valid(&without, data) {
            current = without;
            continue;
        }
        for lit in &candidates {
            if current.uses(lit.feature) {
                continue;
            }
            let mut replaced = without.clone();
            replaced.insert(*lit);
            if conjunction_valid(&replaced, data)
                && required.iter().all(|&i| eval_conjunction(&replaced, &data.rows[i].values).is_true())
            {
                current = replaced;
                break;
            }
        }
    }

    if current.has_unknown_literal() {
        Elimination::Failed(c.unknown_features().into_iter().collect())
    } else {
        Elimination::Clean(current)
    }
}

/// `f` for every feature that is T in `v`, `!f` for every feature that is F.
pub fn default_cover_conjunction(v: &FeatureVector) -> Conjunction {
    Conjunction::from_literals(v.0.iter().enumerate().filter_map(|(i, &t)| match t {
        TruthValue::T => Some(Literal::pos(FeatureId(i))),
        TruthValue::F => Some(Literal::neg(FeatureId(i))),
        TruthValue::U => None,
    }))
}
