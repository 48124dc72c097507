//! End-to-end policy mining.
//!
//! Phase 1 learns one formula per (subject type, resource type, action)
//! present in the authorizations and turns each disjunct into a rule.
//! Phase 2 optionally removes negation, then merges and simplifies rules
//! until nothing changes. The result grants exactly the input
//! authorizations, or mining fails.

mod generalize;
mod phase2;

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use phase2::{
    eliminate_negative_features, merge_and_simplify, merge_same_conditions, Phase2, SimplifyOutcome, Transformation,
};

use crate::error::{Error, Result};
use crate::features::{ExtractionLimits, FeatureMatrix, FeaturePayload, FeatureTable};
use crate::learner::{Learner, LearnerConfig};
use crate::model::{meaning, AclPolicy, Atom, AtomicCondition, Path, Policy, Rule, Sra};
use crate::tvl::{Conjunction, DnfFormula, Feature, LabeledDataset, Literal, Polarity};

/// How to cope with datasets the plain features cannot separate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdStrategy {
    /// Learn without id conditions; if the formula is not valid, rebuild the
    /// vectors with id conditions and learn again.
    #[default]
    RetryWithIdFeatures,
    /// Learn without id conditions, covering leftover vectors with
    /// `subject.id = s ∧ resource.id = r`.
    PerVectorIdConjunction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinerConfig {
    /// Keep negated atomics in the output. When false, negation is removed
    /// in Phase 2.
    pub allow_negation: bool,
    pub id_strategy: IdStrategy,
    pub limits: ExtractionLimits,
    pub learner: LearnerConfig,
    /// Echoed in run manifests; mining itself makes no random choices.
    pub seed: u64,
    /// Worker threads for Phase 1; 0 lets the thread pool decide.
    pub jobs: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            allow_negation: true,
            id_strategy: IdStrategy::default(),
            limits: ExtractionLimits::default(),
            learner: LearnerConfig::default(),
            seed: 0,
            jobs: 0,
        }
    }
}

/// What Phase 1 did for one (subject type, resource type, action).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskReport {
    pub subject_type: String,
    pub resource_type: String,
    pub action: String,
    /// Columns of the dataset the formula was learned from.
    pub features: Vec<Feature>,
    pub formula: DnfFormula,
    pub id_features: bool,
    pub used_fallback: bool,
    pub iterations: usize,
    /// Rows of the dataset, for debugging dumps.
    pub dataset: LabeledDataset,
}

impl TaskReport {
    /// Each disjunct as a set of literal labels, negated ones prefixed `¬`.
    pub fn formula_labels(&self) -> BTreeSet<BTreeSet<String>> {
        self.formula
            .iter()
            .map(|c| {
                c.literals()
                    .map(|l| {
                        let label = &self.features[l.feature.0].label;
                        match l.polarity {
                            Polarity::Positive => label.clone(),
                            Polarity::Negative => format!("¬{label}"),
                            Polarity::IsUnknown => format!("{label} = U"),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn formula_text(&self) -> String {
        self.formula.display(&self.dataset).to_string()
    }
}

#[derive(Clone, Debug)]
pub struct MineOutcome {
    pub policy: Policy,
    pub tasks: Vec<TaskReport>,
    /// Rules right after Phase 1.
    pub candidate_rules: Vec<Rule>,
    /// Policy WSC before Phase-2 merging and after each fixpoint round.
    pub wsc_trace: Vec<usize>,
}

/// Authorizations the rules fail to grant, and requests they wrongly grant.
pub fn consistency_gap(acl: &AclPolicy, rules: &[Rule]) -> (BTreeSet<Sra>, BTreeSet<Sra>) {
    let m = meaning(&acl.cm, &acl.om, rules);
    let missing = acl.au.difference(&m).cloned().collect();
    let extra = m.difference(&acl.au).cloned().collect();
    (missing, extra)
}

pub(crate) fn inconsistency(missing: &BTreeSet<Sra>, extra: &BTreeSet<Sra>) -> Error {
    if let Some(t) = missing.iter().next() {
        Error::Inconsistent(format!("{} authorization(s) not granted, first {t}", missing.len()))
    } else if let Some(t) = extra.iter().next() {
        Error::Inconsistent(format!("{} request(s) granted without authorization, first {t}", extra.len()))
    } else {
        Error::Inconsistent("policy differs from the authorizations".into())
    }
}

/// Converts each disjunct into a rule for `(table types, action)`.
pub fn extract_rules(formula: &DnfFormula, table: &FeatureTable, action: &str) -> Vec<Rule> {
    formula.iter().map(|c| conjunction_to_rule(c, table, action)).collect()
}

fn conjunction_to_rule(c: &Conjunction, table: &FeatureTable, action: &str) -> Rule {
    let mut rule = Rule::new(&table.subject_type, &table.resource_type, [action]);
    for Literal { feature, polarity } in c.literals() {
        let negate = match polarity {
            Polarity::Positive => false,
            Polarity::Negative => true,
            Polarity::IsUnknown => unreachable!("finished formulas have no f = U literals"),
        };
        match &table.entries[feature.0] {
            FeaturePayload::Subject(a) => {
                rule.subject_condition.insert(if negate { a.clone().negate() } else { a.clone() });
            }
            FeaturePayload::Resource(a) => {
                rule.resource_condition.insert(if negate { a.clone().negate() } else { a.clone() });
            }
            FeaturePayload::Constraint(a) => {
                rule.constraint.insert(if negate { a.clone().negate() } else { a.clone() });
            }
        }
    }
    rule
}

/// Learning tasks grouped by (subject type, resource type), actions sorted.
/// One task's report and the rules extracted from its formula.
type Learned = (TaskReport, Vec<Rule>);

fn tasks(acl: &AclPolicy) -> BTreeMap<(String, String), BTreeSet<String>> {
    let mut out: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for t in &acl.au {
        if let (Some(cs), Some(cr)) = (acl.om.class_of(&t.subject), acl.om.class_of(&t.resource)) {
            out.entry((cs.to_string(), cr.to_string())).or_default().insert(t.action.clone());
        }
    }
    out
}

struct Phase1<'a> {
    acl: &'a AclPolicy,
    cfg: &'a MinerConfig,
    naive: bool,
}

impl Phase1<'_> {
    fn matrix(&self, cs: &str, cr: &str, ids: bool) -> Result<FeatureMatrix> {
        let limits = ExtractionLimits { include_id_conditions: ids, ..self.cfg.limits };
        let table = FeatureTable::build(&self.acl.cm, &self.acl.om, cs, cr, &limits)?;
        let m = FeatureMatrix::compute(&self.acl.cm, &self.acl.om, table);
        let m = if self.naive { m.coerce_unknown_to_false() } else { m };
        Ok(m.prune_useless())
    }

    fn report(
        &self,
        m: &FeatureMatrix,
        action: &str,
        data: LabeledDataset,
        res: crate::learner::LearnResult,
        ids: bool,
    ) -> (TaskReport, Vec<Rule>) {
        let rules = extract_rules(&res.formula, &m.table, action);
        let report = TaskReport {
            subject_type: m.table.subject_type.clone(),
            resource_type: m.table.resource_type.clone(),
            action: action.to_string(),
            features: data.features.clone(),
            formula: res.formula,
            id_features: ids,
            used_fallback: res.used_fallback,
            iterations: res.iterations,
            dataset: data,
        };
        (report, rules)
    }

    /// Learns every action of one (subject type, resource type) group.
    fn group(&self, cs: &str, cr: &str, actions: &BTreeSet<String>) -> Result<Vec<Learned>> {
        let learner_cfg = &self.cfg.learner;
        let mut out = Vec::new();
        match self.cfg.id_strategy {
            IdStrategy::RetryWithIdFeatures => {
                let base = self.matrix(cs, cr, false)?;
                let mut with_ids: Option<FeatureMatrix> = None;
                for a in actions {
                    let data = base.dataset(a, self.acl);
                    match Learner::new(learner_cfg).learn(&data) {
                        Ok(res) => out.push(self.report(&base, a, data, res, false)),
                        Err(Error::NonMonotonicOrInsufficientFeatures { row, provenance }) => {
                            info!("({cs}, {cr}, {a}): formula invalid at row {row} ({provenance}); relearning with id conditions");
                            if with_ids.is_none() {
                                with_ids = Some(self.matrix(cs, cr, true)?);
                            }
                            let m = with_ids.as_ref().expect("just built");
                            let data = m.dataset(a, self.acl);
                            let res = Learner::new(learner_cfg).learn(&data).map_err(|e| {
                                Error::Inconsistent(format!("({cs}, {cr}, {a}) cannot be learned even with id conditions: {e}"))
                            })?;
                            out.push(self.report(m, a, data, res, true));
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            IdStrategy::PerVectorIdConjunction => {
                let m = self.matrix(cs, cr, true)?;
                let reserved: Vec<crate::tvl::FeatureId> = m
                    .table
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.is_id_condition())
                    .map(|(i, _)| crate::tvl::FeatureId(i))
                    .collect();
                let table = &m.table;
                let fallback = |i: usize, d: &LabeledDataset| -> Conjunction {
                    let (s, r) = d.rows[i].provenance.clone().expect("mining rows carry provenance");
                    let ids = [
                        FeaturePayload::Subject(AtomicCondition::eq(Path::id(), Atom::Obj(s))),
                        FeaturePayload::Resource(AtomicCondition::eq(Path::id(), Atom::Obj(r))),
                    ];
                    Conjunction::from_literals(
                        ids.iter().filter_map(|p| table.position(p)).map(|f| Literal::pos(crate::tvl::FeatureId(f))),
                    )
                };
                for a in actions {
                    let data = m.dataset(a, self.acl);
                    let res = Learner::new(learner_cfg)
                        .reserve(reserved.iter().copied())
                        .with_fallback(&fallback)
                        .learn(&data)
                        .map_err(|e| Error::Inconsistent(format!("({cs}, {cr}, {a}): {e}")))?;
                    let ids = res.used_fallback;
                    out.push(self.report(&m, a, data, res, ids));
                }
            }
        }
        Ok(out)
    }

    fn run(&self) -> Result<(Vec<TaskReport>, Vec<Rule>)> {
        let groups: Vec<((String, String), BTreeSet<String>)> = tasks(self.acl).into_iter().collect();
        let work = || -> Result<Vec<Vec<Learned>>> {
            groups.par_iter().map(|((cs, cr), actions)| self.group(cs, cr, actions)).collect()
        };
        let results = if self.cfg.jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.cfg.jobs)
                .build()
                .map_err(|e| Error::Usage(format!("cannot start {} worker threads: {e}", self.cfg.jobs)))?
                .install(work)?
        } else {
            work()?
        };
        let mut reports = Vec::new();
        let mut rules = Vec::new();
        for (report, rs) in results.into_iter().flatten() {
            debug!("({}, {}, {}): {}", report.subject_type, report.resource_type, report.action, report.formula_text());
            reports.push(report);
            rules.extend(rs);
        }
        Ok((reports, rules))
    }
}

/// Mines a policy whose meaning equals `acl.au`.
pub fn mine(acl: &AclPolicy, cfg: &MinerConfig) -> Result<MineOutcome> {
    mine_observed(acl, cfg, &mut |_, _| {})
}

/// [`mine`], reporting every Phase-2 transformation to `observer` together
/// with the rules after it.
pub fn mine_observed(
    acl: &AclPolicy,
    cfg: &MinerConfig,
    observer: &mut dyn FnMut(Transformation, &[Rule]),
) -> Result<MineOutcome> {
    acl.validate()?;
    let (tasks, candidate_rules) = Phase1 { acl, cfg, naive: false }.run()?;
    let mut p2 = Phase2::new(acl, &cfg.limits);
    let mut rules = candidate_rules.clone();
    if !cfg.allow_negation {
        rules = rules.into_iter().flat_map(|r| p2.eliminate_negative_features(r)).collect();
        observer(Transformation::EliminateNegation, &rules);
    }
    let out = p2.merge_and_simplify(rules, observer);
    let (missing, extra) = consistency_gap(acl, &out.rules);
    if !missing.is_empty() || !extra.is_empty() {
        return Err(inconsistency(&missing, &extra));
    }
    Ok(MineOutcome { policy: Policy::new(out.rules), tasks, candidate_rules, wsc_trace: out.wsc_trace })
}

/// Mining as if every unknown-valued feature were false.
///
/// Formulas are learned on vectors whose `U` cells are replaced by `F`, and
/// rules differing only in their actions are merged; no other
/// simplification is applied, since validity judged on the coerced vectors
/// says nothing about the real object model. The policy is returned even
/// when it is inconsistent; use [`consistency_gap`] to see where.
pub fn naive_unknown_as_false(acl: &AclPolicy, cfg: &MinerConfig) -> Result<MineOutcome> {
    acl.validate()?;
    let (tasks, candidate_rules) = Phase1 { acl, cfg, naive: true }.run()?;
    let rules = merge_same_conditions(candidate_rules.clone());
    let wsc = crate::model::wsc_policy(&rules);
    Ok(MineOutcome { policy: Policy::new(rules), tasks, candidate_rules, wsc_trace: vec![wsc] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testmodel::running_example;
    use crate::model::{AtomicConstraint, ConsOp};

    pub(crate) fn running_acl() -> AclPolicy {
        let (cm, om) = running_example();
        AclPolicy::new(
            cm,
            om,
            [
                Sra::new("CS-student-1", "CS-doc-1", "read"),
                Sra::new("CS-student-1", "CS-doc-2", "read"),
                Sra::new("EE-student-1", "CS-doc-1", "read"),
            ],
        )
    }

    fn expected_rules() -> Policy {
        Policy::new([
            Rule::new("Student", "Document", ["read"])
                .with_constraint(AtomicConstraint::new(Path::parse("dept"), ConsOp::Equal, Path::parse("dept"))),
            Rule::new("Student", "Document", ["read"])
                .with_resource(AtomicCondition::eq(Path::parse("type"), Atom::obj("Handbook"))),
        ])
        .sorted()
    }

    #[test]
    fn running_example_is_recovered() {
        let acl = running_acl();
        for allow_negation in [true, false] {
            for id_strategy in [IdStrategy::RetryWithIdFeatures, IdStrategy::PerVectorIdConjunction] {
                let cfg = MinerConfig { allow_negation, id_strategy, ..Default::default() };
                let out = mine(&acl, &cfg).unwrap();
                assert_eq!(out.policy.sorted(), expected_rules(), "{cfg:?}");
                assert_eq!(out.tasks.len(), 1);
                let t = &out.tasks[0];
                let want: BTreeSet<BTreeSet<String>> = [
                    BTreeSet::from(["resource.type = Handbook".to_string()]),
                    BTreeSet::from(["subject.dept = resource.dept".to_string()]),
                ]
                .into();
                assert_eq!(t.formula_labels(), want);
                assert!(!t.id_features && !t.used_fallback);
            }
        }
    }

    #[test]
    fn empty_authorizations_give_no_rules() {
        let mut acl = running_acl();
        acl.au.clear();
        let out = mine(&acl, &MinerConfig::default()).unwrap();
        assert!(out.policy.rules.is_empty());
        assert!(out.tasks.is_empty());
    }

    #[test]
    fn naive_baseline_denies_cs_doc_2() {
        let acl = running_acl();
        let out = naive_unknown_as_false(&acl, &MinerConfig::default()).unwrap();
        let shown: BTreeSet<String> = out.policy.rules.iter().map(|r| r.to_string()).collect();
        assert_eq!(
            shown,
            BTreeSet::from([
                "⟨Student, true, Document, resource.type = Handbook, true, {read}⟩".to_string(),
                "⟨Student, true, Document, resource.type ≠ Handbook, subject.dept = resource.dept, {read}⟩".to_string(),
            ])
        );
        let (missing, extra) = consistency_gap(&acl, &out.policy.rules);
        assert_eq!(missing, BTreeSet::from([Sra::new("CS-student-1", "CS-doc-2", "read")]));
        assert!(extra.is_empty());
    }

    #[test]
    fn extract_rules_maps_literals() {
        let acl = running_acl();
        let table = FeatureTable::build(&acl.cm, &acl.om, "Student", "Document", &ExtractionLimits::default()).unwrap();
        let f = DnfFormula::from_conjunctions([
            Conjunction::new(),
            Conjunction::from_literals([Literal::neg(crate::tvl::FeatureId(3)), Literal::pos(crate::tvl::FeatureId(0))]),
        ]);
        let rules = extract_rules(&f, &table, "read");
        assert_eq!(rules[0], Rule::new("Student", "Document", ["read"]));
        assert_eq!(
            rules[1].to_string(),
            "⟨Student, true, Document, resource.type ≠ Handbook, subject.dept = resource.dept, {read}⟩"
        );
    }

    #[test]
    fn ids_are_used_when_features_cannot_separate() {
        // Two students with identical (unknown) departments but different
        // permissions: only id conditions can tell them apart.
        let (cm, om) = running_example();
        let acl = AclPolicy::new(cm, om, [Sra::new("EE-student-1", "CS-doc-3", "read")]);
        for id_strategy in [IdStrategy::RetryWithIdFeatures, IdStrategy::PerVectorIdConjunction] {
            let cfg = MinerConfig { id_strategy, ..Default::default() };
            let out = mine(&acl, &cfg).unwrap();
            let (missing, extra) = consistency_gap(&acl, &out.policy.rules);
            assert!(missing.is_empty() && extra.is_empty());
            assert!(out.tasks[0].id_features, "{id_strategy:?}");
            assert!(out.policy.rules.iter().any(|r| r.to_string().contains(".id =")));
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let acl = running_acl();
        let a = mine(&acl, &MinerConfig { jobs: 1, ..Default::default() }).unwrap();
        let b = mine(&acl, &MinerConfig { jobs: 4, ..Default::default() }).unwrap();
        assert_eq!(a.policy, b.policy);
    }
}
