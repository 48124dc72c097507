use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::objects::{navigate, Atom, ClassModel, Multiplicity, ObjectModel, Path, PathType, Value};
use crate::error::{Error, Result};
use crate::tvl::TruthValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CondOp {
    In,
    Contains,
}

/// `path op value`, where `op` follows from the path's multiplicity:
/// `in` a set of constants for single-valued paths, `contains` a constant
/// for many-valued ones.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomicCondition {
    pub path: Path,
    pub op: CondOp,
    pub value: BTreeSet<Atom>,
    pub negated: bool,
}

impl AtomicCondition {
    /// `path = constant` for a single-valued path.
    pub fn eq(path: Path, value: Atom) -> Self {
        AtomicCondition { path, op: CondOp::In, value: BTreeSet::from([value]), negated: false }
    }

    pub fn within(path: Path, values: impl IntoIterator<Item = Atom>) -> Self {
        AtomicCondition { path, op: CondOp::In, value: values.into_iter().collect(), negated: false }
    }

    pub fn contains(path: Path, value: Atom) -> Self {
        AtomicCondition { path, op: CondOp::Contains, value: BTreeSet::from([value]), negated: false }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn positive(&self) -> Self {
        AtomicCondition { negated: false, ..self.clone() }
    }

    /// Path length plus number of constants, plus one if negated.
    pub fn wsc(&self) -> usize {
        self.path.len() + self.value.len() + usize::from(self.negated)
    }

    pub fn check(&self, cm: &ClassModel, class: &str) -> Result<()> {
        if self.path.is_empty() {
            return Err(Error::Schema("condition paths cannot be empty".into()));
        }
        if self.value.is_empty() {
            return Err(Error::Schema(format!("condition on {} has no constants", self.path)));
        }
        let info = cm.path_info(class, &self.path).map_err(|e| Error::Schema(e.to_string()))?;
        let expected = if info.multiplicity.is_many() { CondOp::Contains } else { CondOp::In };
        if self.op != expected {
            return Err(Error::Schema(format!("condition on {}.{} must use {expected:?}", class, self.path)));
        }
        if self.op == CondOp::Contains && self.value.len() != 1 {
            return Err(Error::Schema(format!("contains-condition on {} takes exactly one constant", self.path)));
        }
        for a in &self.value {
            let ok = matches!(
                (&info.ty, a),
                (PathType::Bool, Atom::Bool(_)) | (PathType::Class(_) | PathType::Id, Atom::Obj(_))
            );
            if !ok {
                return Err(Error::Schema(format!("constant {a} does not match the type of {}.{}", class, self.path)));
            }
        }
        Ok(())
    }

    /// `subject.dept = CS`, `resource.tags ∌ x`, ...
    pub fn display_from(&self, root: &str) -> String {
        let lhs = self.path.display_from(root);
        let vals: Vec<String> = self.value.iter().map(Atom::to_string).collect();
        match (self.op, self.value.len(), self.negated) {
            (CondOp::In, 1, false) => format!("{lhs} = {}", vals[0]),
            (CondOp::In, 1, true) => format!("{lhs} ≠ {}", vals[0]),
            (CondOp::In, _, false) => format!("{lhs} ∈ {{{}}}", vals.join(", ")),
            (CondOp::In, _, true) => format!("{lhs} ∉ {{{}}}", vals.join(", ")),
            (CondOp::Contains, _, false) => format!("{lhs} ∋ {}", vals.join(", ")),
            (CondOp::Contains, _, true) => format!("{lhs} ∌ {}", vals.join(", ")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsOp {
    Equal,
    In,
    Contains,
    Supseteq,
    Subseteq,
}

impl ConsOp {
    /// Operators usable between paths of the given multiplicities.
    pub fn for_multiplicities(m1: Multiplicity, m2: Multiplicity) -> &'static [ConsOp] {
        match (m1.is_many(), m2.is_many()) {
            (false, false) => &[ConsOp::Equal],
            (false, true) => &[ConsOp::In],
            (true, false) => &[ConsOp::Contains],
            (true, true) => &[ConsOp::Supseteq, ConsOp::Subseteq],
        }
    }

    fn symbol(self, negated: bool) -> &'static str {
        match (self, negated) {
            (ConsOp::Equal, false) => "=",
            (ConsOp::Equal, true) => "≠",
            (ConsOp::In, false) => "∈",
            (ConsOp::In, true) => "∉",
            (ConsOp::Contains, false) => "∋",
            (ConsOp::Contains, true) => "∌",
            (ConsOp::Supseteq, false) => "⊇",
            (ConsOp::Supseteq, true) => "⊉",
            (ConsOp::Subseteq, false) => "⊆",
            (ConsOp::Subseteq, true) => "⊈",
        }
    }
}

/// `subject.path1 op resource.path2`; either path may be empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomicConstraint {
    pub path1: Path,
    pub op: ConsOp,
    pub path2: Path,
    pub negated: bool,
}

impl AtomicConstraint {
    pub fn new(path1: Path, op: ConsOp, path2: Path) -> Self {
        AtomicConstraint { path1, op, path2, negated: false }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn positive(&self) -> Self {
        AtomicConstraint { negated: false, ..self.clone() }
    }

    pub fn wsc(&self) -> usize {
        self.path1.len() + self.path2.len() + usize::from(self.negated)
    }

    pub fn check(&self, cm: &ClassModel, st: &str, rt: &str) -> Result<()> {
        let i1 = cm.path_info(st, &self.path1).map_err(|e| Error::Schema(e.to_string()))?;
        let i2 = cm.path_info(rt, &self.path2).map_err(|e| Error::Schema(e.to_string()))?;
        if !ConsOp::for_multiplicities(i1.multiplicity, i2.multiplicity).contains(&self.op) {
            return Err(Error::Schema(format!(
                "operator {:?} does not fit the multiplicities of subject.{} and resource.{}",
                self.op, self.path1, self.path2
            )));
        }
        Ok(())
    }
}

impl fmt::Display for AtomicConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.path1.display_from("subject"),
            self.op.symbol(self.negated),
            self.path2.display_from("resource")
        )
    }
}

/// ⟨subjectType, subjectCondition, resourceType, resourceCondition,
/// constraint, actions⟩.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub subject_type: String,
    pub subject_condition: BTreeSet<AtomicCondition>,
    pub resource_type: String,
    pub resource_condition: BTreeSet<AtomicCondition>,
    pub constraint: BTreeSet<AtomicConstraint>,
    pub actions: BTreeSet<String>,
}

impl Rule {
    /// A rule granting `actions` on every pair of the two types.
    pub fn new<'a>(subject_type: &str, resource_type: &str, actions: impl IntoIterator<Item = &'a str>) -> Self {
        Rule {
            subject_type: subject_type.to_string(),
            subject_condition: BTreeSet::new(),
            resource_type: resource_type.to_string(),
            resource_condition: BTreeSet::new(),
            constraint: BTreeSet::new(),
            actions: actions.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn with_subject(mut self, c: AtomicCondition) -> Self {
        self.subject_condition.insert(c);
        self
    }

    pub fn with_resource(mut self, c: AtomicCondition) -> Self {
        self.resource_condition.insert(c);
        self
    }

    pub fn with_constraint(mut self, c: AtomicConstraint) -> Self {
        self.constraint.insert(c);
        self
    }

    pub fn wsc(&self) -> usize {
        self.subject_condition.iter().map(AtomicCondition::wsc).sum::<usize>()
            + self.resource_condition.iter().map(AtomicCondition::wsc).sum::<usize>()
            + self.constraint.iter().map(AtomicConstraint::wsc).sum::<usize>()
            + self.actions.len()
    }

    pub fn has_negation(&self) -> bool {
        self.subject_condition.iter().chain(&self.resource_condition).any(|c| c.negated)
            || self.constraint.iter().any(|c| c.negated)
    }

    pub fn atomic_count(&self) -> usize {
        self.subject_condition.len() + self.resource_condition.len() + self.constraint.len()
    }

    /// Types declared, paths well-typed, operators matching multiplicities.
    pub fn check(&self, cm: &ClassModel) -> Result<()> {
        for t in [&self.subject_type, &self.resource_type] {
            if !cm.has_class(t) {
                return Err(Error::Schema(format!("rule refers to undeclared class {t}")));
            }
        }
        if self.actions.is_empty() {
            return Err(Error::Schema("rule has no actions".into()));
        }
        for c in &self.subject_condition {
            c.check(cm, &self.subject_type)?;
        }
        for c in &self.resource_condition {
            c.check(cm, &self.resource_type)?;
        }
        for c in &self.constraint {
            c.check(cm, &self.subject_type, &self.resource_type)?;
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn conj(items: Vec<String>) -> String {
            if items.is_empty() {
                "true".to_string()
            } else {
                items.join(" ∧ ")
            }
        }
        let sc = conj(self.subject_condition.iter().map(|c| c.display_from("subject")).collect());
        let rc = conj(self.resource_condition.iter().map(|c| c.display_from("resource")).collect());
        let cons = conj(self.constraint.iter().map(|c| c.to_string()).collect());
        let acts: Vec<&str> = self.actions.iter().map(String::as_str).collect();
        write!(
            f,
            "⟨{}, {}, {}, {}, {}, {{{}}}⟩",
            self.subject_type,
            sc,
            self.resource_type,
            rc,
            cons,
            acts.join(", ")
        )
    }
}

/// A set of rules.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy {
    pub rules: Vec<Rule>,
}

impl Policy {
    pub fn new(rules: impl IntoIterator<Item = Rule>) -> Self {
        Policy { rules: rules.into_iter().collect() }
    }

    pub fn wsc(&self) -> usize {
        wsc_policy(&self.rules)
    }

    pub fn check(&self, cm: &ClassModel) -> Result<()> {
        self.rules.iter().try_for_each(|r| r.check(cm))
    }

    /// Rules in a canonical order, for comparisons that ignore ordering.
    pub fn sorted(&self) -> Policy {
        let mut rules = self.rules.clone();
        rules.sort();
        rules.dedup();
        Policy { rules }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

pub fn wsc_policy(rules: &[Rule]) -> usize {
    rules.iter().map(Rule::wsc).sum()
}

/// A (subject, resource, action) request or authorization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct Sra {
    pub subject: String,
    pub resource: String,
    pub action: String,
}

impl Sra {
    pub fn new(subject: &str, resource: &str, action: &str) -> Self {
        Sra { subject: subject.to_string(), resource: resource.to_string(), action: action.to_string() }
    }
}

impl From<(String, String, String)> for Sra {
    fn from((subject, resource, action): (String, String, String)) -> Self {
        Sra { subject, resource, action }
    }
}

impl From<Sra> for (String, String, String) {
    fn from(t: Sra) -> Self {
        (t.subject, t.resource, t.action)
    }
}

impl fmt::Display for Sra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.resource, self.action)
    }
}

/// Class model, object model and the authorizations to be explained.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AclPolicy {
    pub cm: ClassModel,
    pub om: ObjectModel,
    pub au: BTreeSet<Sra>,
}

impl AclPolicy {
    pub fn new(cm: ClassModel, om: ObjectModel, au: impl IntoIterator<Item = Sra>) -> Self {
        AclPolicy { cm, om, au: au.into_iter().collect() }
    }

    /// Validates both models and checks that every authorization refers to
    /// existing objects.
    pub fn validate(&self) -> Result<()> {
        self.cm.validate()?;
        self.om.validate(&self.cm)?;
        for t in &self.au {
            for id in [&t.subject, &t.resource] {
                if self.om.get(id).is_none() {
                    return Err(Error::Schema(format!("authorization {t} refers to missing object {id}")));
                }
            }
            if t.action.is_empty() {
                return Err(Error::Schema(format!("authorization {t} has an empty action")));
            }
        }
        Ok(())
    }

    pub fn actions(&self) -> BTreeSet<&str> {
        self.au.iter().map(|t| t.action.as_str()).collect()
    }
}

/// Truth value of a condition given the value its path navigates to.
pub fn condition_value(v: &Value, ac: &AtomicCondition) -> TruthValue {
    let base = match v {
        Value::Unknown => TruthValue::U,
        Value::None => TruthValue::F,
        Value::Atom(a) => ac.value.contains(a).into(),
        Value::Set { atoms, has_unknown } => {
            if ac.value.iter().all(|x| atoms.contains(x)) {
                TruthValue::T
            } else if *has_unknown {
                TruthValue::U
            } else {
                TruthValue::F
            }
        }
    };
    negate_if(ac.negated, base, v.involves_unknown() && !v.is_unknown())
}

/// The negation rule shared by conditions and constraints: a `T` obtained
/// from a set that also holds `unknown` negates to `U`.
fn negate_if(negated: bool, base: TruthValue, set_has_unknown: bool) -> TruthValue {
    if !negated {
        base
    } else if base == TruthValue::T && set_has_unknown {
        TruthValue::U
    } else {
        !base
    }
}

fn as_set(v: &Value) -> (BTreeSet<&Atom>, bool) {
    match v {
        Value::Atom(a) => (BTreeSet::from([a]), false),
        Value::None => (BTreeSet::new(), false),
        Value::Unknown => (BTreeSet::new(), true),
        Value::Set { atoms, has_unknown } => (atoms.iter().collect(), *has_unknown),
    }
}

/// `a ⊇ b`, certain only when the known parts decide it.
fn superset(a: &Value, b: &Value) -> TruthValue {
    if a.is_unknown() || b.is_unknown() {
        return TruthValue::U;
    }
    let (sa, ua) = as_set(a);
    let (sb, ub) = as_set(b);
    if !ub && sb.is_subset(&sa) {
        TruthValue::T
    } else if !ua && !sb.is_subset(&sa) {
        TruthValue::F
    } else {
        TruthValue::U
    }
}

fn membership(member: &Value, set: &Value) -> TruthValue {
    if member.is_unknown() || set.is_unknown() {
        return TruthValue::U;
    }
    let (s, u) = as_set(set);
    let present = matches!(member, Value::Atom(a) if s.contains(a));
    if present {
        TruthValue::T
    } else if u {
        TruthValue::U
    } else {
        TruthValue::F
    }
}

/// Truth value of a constraint given the values both paths navigate to.
pub fn constraint_value(v1: &Value, v2: &Value, op: ConsOp, negated: bool) -> TruthValue {
    let base = match op {
        ConsOp::Equal => {
            if v1.is_unknown() || v2.is_unknown() {
                TruthValue::U
            } else if matches!(v1, Value::Set { .. }) || matches!(v2, Value::Set { .. }) {
                superset(v1, v2) & superset(v2, v1)
            } else {
                (v1 == v2).into()
            }
        }
        ConsOp::In => membership(v1, v2),
        ConsOp::Contains => membership(v2, v1),
        ConsOp::Supseteq => superset(v1, v2),
        ConsOp::Subseteq => superset(v2, v1),
    };
    let set_unknown = [v1, v2].iter().any(|v| matches!(v, Value::Set { has_unknown: true, .. }));
    negate_if(negated, base, set_unknown)
}

fn multiplicity_of(cm: &ClassModel, om: &ObjectModel, o: &str, p: &Path) -> Multiplicity {
    om.class_of(o)
        .and_then(|c| cm.path_info(c, p).ok())
        .map_or(Multiplicity::One, |i| i.multiplicity)
}

pub fn tval_condition(cm: &ClassModel, om: &ObjectModel, o: &str, ac: &AtomicCondition) -> TruthValue {
    let v = navigate(om, o, &ac.path, multiplicity_of(cm, om, o, &ac.path));
    condition_value(&v, ac)
}

pub fn tval_constraint(cm: &ClassModel, om: &ObjectModel, s: &str, r: &str, ac: &AtomicConstraint) -> TruthValue {
    let v1 = navigate(om, s, &ac.path1, multiplicity_of(cm, om, s, &ac.path1));
    let v2 = navigate(om, r, &ac.path2, multiplicity_of(cm, om, r, &ac.path2));
    constraint_value(&v1, &v2, ac.op, ac.negated)
}

fn conditions_hold(cm: &ClassModel, om: &ObjectModel, o: &str, cs: &BTreeSet<AtomicCondition>) -> bool {
    cs.iter().all(|c| tval_condition(cm, om, o, c).is_true())
}

/// Whether the request is granted by the rule: types and action match and
/// every condition and constraint is exactly `T`.
pub fn satisfies(cm: &ClassModel, om: &ObjectModel, t: &Sra, rule: &Rule) -> bool {
    om.class_of(&t.subject) == Some(rule.subject_type.as_str())
        && om.class_of(&t.resource) == Some(rule.resource_type.as_str())
        && rule.actions.contains(&t.action)
        && conditions_hold(cm, om, &t.subject, &rule.subject_condition)
        && conditions_hold(cm, om, &t.resource, &rule.resource_condition)
        && rule.constraint.iter().all(|c| tval_constraint(cm, om, &t.subject, &t.resource, c).is_true())
}

/// Subject/resource pairs satisfying the rule's conditions and constraints.
pub(crate) fn rule_pairs(cm: &ClassModel, om: &ObjectModel, rule: &Rule) -> Vec<(String, String)> {
    let subjects: Vec<&String> = om
        .instances(&rule.subject_type)
        .iter()
        .filter(|s| conditions_hold(cm, om, s, &rule.subject_condition))
        .collect();
    let resources: Vec<&String> = om
        .instances(&rule.resource_type)
        .iter()
        .filter(|r| conditions_hold(cm, om, r, &rule.resource_condition))
        .collect();
    let mut out = Vec::new();
    for s in &subjects {
        for r in &resources {
            if rule.constraint.iter().all(|c| tval_constraint(cm, om, s, r, c).is_true()) {
                out.push(((*s).clone(), (*r).clone()));
            }
        }
    }
    out
}

/// All requests the rule grants.
pub fn rule_meaning(cm: &ClassModel, om: &ObjectModel, rule: &Rule) -> BTreeSet<Sra> {
    let mut out = BTreeSet::new();
    for (s, r) in rule_pairs(cm, om, rule) {
        for a in &rule.actions {
            out.insert(Sra { subject: s.clone(), resource: r.clone(), action: a.clone() });
        }
    }
    out
}

/// Union of the rules' meanings.
pub fn meaning(cm: &ClassModel, om: &ObjectModel, rules: &[Rule]) -> BTreeSet<Sra> {
    rules.iter().flat_map(|r| rule_meaning(cm, om, r)).collect()
}
