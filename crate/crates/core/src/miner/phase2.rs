//! Rule-level rewriting: negation removal, merging and simplification.
//!
//! Every rewrite is checked against the authorizations, so the union of
//! the rules' meanings never leaves `AU` and never loses a tuple it covered.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use log::trace;

use super::generalize::Grid;
use crate::features::{observed_constants, ExtractionLimits, FeatureMatrix, FeaturePayload, FeatureTable};
use crate::model::{navigate, rule_pairs, wsc_policy, AclPolicy, Atom, AtomicCondition, CondOp, Path, Rule, Sra, Value};

/// One kind of Phase-2 rewrite, reported to observers after it is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transformation {
    EliminateNegation,
    /// `p ≠ true` rewritten to `p = false` and vice versa.
    BooleanNegation,
    MergeActions,
    MergeValues,
    DropAtomic,
    ConstraintToCondition,
    /// A rule replaced by a cheaper or broader one of at most three
    /// positive features, still within `AU`.
    Generalize,
    DropCoveredRule,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplifyOutcome {
    pub rules: Vec<Rule>,
    /// Policy WSC on entry and after each round.
    pub wsc_trace: Vec<usize>,
}

type Pairs = Rc<BTreeSet<(String, String)>>;

/// Phase-2 state: the authorizations plus caches of rule meanings and
/// feature tables.
pub struct Phase2<'a> {
    acl: &'a AclPolicy,
    limits: ExtractionLimits,
    pairs: HashMap<Rule, Pairs>,
    tables: BTreeMap<(String, String), Rc<FeatureTable>>,
    grids: BTreeMap<(String, String), Rc<Grid>>,
}

fn atomics(rule: &Rule) -> Vec<FeaturePayload> {
    let mut out: Vec<FeaturePayload> = rule.subject_condition.iter().cloned().map(FeaturePayload::Subject).collect();
    out.extend(rule.resource_condition.iter().cloned().map(FeaturePayload::Resource));
    out.extend(rule.constraint.iter().cloned().map(FeaturePayload::Constraint));
    out
}

fn is_negated(a: &FeaturePayload) -> bool {
    match a {
        FeaturePayload::Subject(c) | FeaturePayload::Resource(c) => c.negated,
        FeaturePayload::Constraint(c) => c.negated,
    }
}

fn without(rule: &Rule, a: &FeaturePayload) -> Rule {
    let mut r = rule.clone();
    match a {
        FeaturePayload::Subject(c) => r.subject_condition.remove(c),
        FeaturePayload::Resource(c) => r.resource_condition.remove(c),
        FeaturePayload::Constraint(c) => r.constraint.remove(c),
    };
    r
}

fn with(mut rule: Rule, a: FeaturePayload) -> Rule {
    match a {
        FeaturePayload::Subject(c) => rule.subject_condition.insert(c),
        FeaturePayload::Resource(c) => rule.resource_condition.insert(c),
        FeaturePayload::Constraint(c) => rule.constraint.insert(c),
    };
    rule
}

fn contains(rule: &Rule, a: &FeaturePayload) -> bool {
    match a {
        FeaturePayload::Subject(c) => rule.subject_condition.contains(c),
        FeaturePayload::Resource(c) => rule.resource_condition.contains(c),
        FeaturePayload::Constraint(c) => rule.constraint.contains(c),
    }
}

/// The rule with its actions cleared, which determines its pairs.
fn condition_key(rule: &Rule) -> Rule {
    Rule { actions: BTreeSet::new(), ..rule.clone() }
}

/// Merges rules that differ only in their actions. Purely syntactic.
pub fn merge_same_conditions(rules: Vec<Rule>) -> Vec<Rule> {
    let mut groups: BTreeMap<Rule, BTreeSet<String>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rules {
        let key = condition_key(&r);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().extend(r.actions);
    }
    order
        .into_iter()
        .map(|k| {
            let actions = groups.remove(&k).expect("grouped above");
            Rule { actions, ..k }
        })
        .collect()
}

/// Rewrites every rule into negation-free rules with the same combined
/// meaning.
pub fn eliminate_negative_features(rules: Vec<Rule>, acl: &AclPolicy, limits: &ExtractionLimits) -> Vec<Rule> {
    let mut p2 = Phase2::new(acl, limits);
    rules.into_iter().flat_map(|r| p2.eliminate_negative_features(r)).collect()
}

/// Merges and simplifies until no rewrite applies.
pub fn merge_and_simplify(
    rules: Vec<Rule>,
    acl: &AclPolicy,
    limits: &ExtractionLimits,
    observer: &mut dyn FnMut(Transformation, &[Rule]),
) -> SimplifyOutcome {
    Phase2::new(acl, limits).merge_and_simplify(rules, observer)
}

impl<'a> Phase2<'a> {
    pub fn new(acl: &'a AclPolicy, limits: &ExtractionLimits) -> Self {
        Phase2 {
            acl,
            limits: ExtractionLimits { include_id_conditions: false, ..*limits },
            pairs: HashMap::new(),
            tables: BTreeMap::new(),
            grids: BTreeMap::new(),
        }
    }

    fn pairs(&mut self, rule: &Rule) -> Pairs {
        let key = condition_key(rule);
        if let Some(p) = self.pairs.get(&key) {
            return p.clone();
        }
        let p: Pairs = Rc::new(rule_pairs(&self.acl.cm, &self.acl.om, rule).into_iter().collect());
        self.pairs.insert(key, p.clone());
        p
    }

    pub fn meaning(&mut self, rule: &Rule) -> BTreeSet<Sra> {
        let pairs = self.pairs(rule);
        let mut out = BTreeSet::new();
        for (s, r) in pairs.iter() {
            for a in &rule.actions {
                out.insert(Sra::new(s, r, a));
            }
        }
        out
    }

    /// Whether everything the rule grants is authorized.
    pub fn valid(&mut self, rule: &Rule) -> bool {
        let pairs = self.pairs(rule);
        let au = &self.acl.au;
        pairs.iter().all(|(s, r)| rule.actions.iter().all(|a| au.contains(&Sra::new(s, r, a))))
    }

    /// Valid, and granting at least the pairs of `old`.
    fn valid_superset(&mut self, new: &Rule, old: &Rule) -> bool {
        self.valid(new) && self.pairs(old).is_subset(&self.pairs(new))
    }

    fn table(&mut self, rule: &Rule) -> Rc<FeatureTable> {
        let key = (rule.subject_type.clone(), rule.resource_type.clone());
        if let Some(t) = self.tables.get(&key) {
            return t.clone();
        }
        let t = FeatureTable::build(&self.acl.cm, &self.acl.om, &key.0, &key.1, &self.limits)
            .map(Rc::new)
            .unwrap_or_else(|_| Rc::new(FeatureTable { subject_type: key.0.clone(), resource_type: key.1.clone(), entries: vec![] }));
        self.tables.insert(key, t.clone());
        t
    }

    fn grid(&mut self, rule: &Rule) -> Rc<Grid> {
        let key = (rule.subject_type.clone(), rule.resource_type.clone());
        if let Some(g) = self.grids.get(&key) {
            return g.clone();
        }
        let table = (*self.table(rule)).clone();
        let g = Rc::new(Grid::new(FeatureMatrix::compute(&self.acl.cm, &self.acl.om, table)));
        self.grids.insert(key, g.clone());
        g
    }

    /// Replaces rules by cheaper ones, or equally cheap ones granting
    /// more, built from at most three positive features.
    fn generalize(&mut self, rules: &mut [Rule]) -> bool {
        let mut changed = false;
        for rule in rules.iter_mut() {
            let covered = self.pairs(rule);
            if covered.is_empty() {
                continue;
            }
            let grid = self.grid(rule);
            let bound = (rule.wsc(), covered.len() as u32);
            if let Some(atomics) = grid.cheapest_cover(self.acl, rule, &covered, bound) {
                let base = Rule { actions: rule.actions.clone(), ..Rule::new(&rule.subject_type, &rule.resource_type, []) };
                let r = atomics.into_iter().fold(base, with);
                trace!("generalized {rule} to {r}");
                *rule = r;
                changed = true;
            }
        }
        changed
    }

    /// Replaces a negated atomic, or returns `None` when no single positive
    /// replacement keeps the rule valid and its pairs covered.
    fn replace_negated(&mut self, rule: &Rule, a: &FeaturePayload) -> Option<Rule> {
        let base = without(rule, a);
        if self.valid(&base) {
            return Some(base);
        }

        let table = self.table(rule);
        let mut candidates: Vec<(usize, usize, &FeaturePayload)> = table
            .entries
            .iter()
            .enumerate()
            .filter(|(_, f)| !contains(&base, f))
            .map(|(i, f)| (f.wsc(), i, f))
            .collect();
        candidates.sort();
        for (_, _, f) in candidates {
            let r = with(base.clone(), f.clone());
            if self.valid_superset(&r, rule) {
                return Some(r);
            }
        }

        let (cond, subject_side) = match a {
            FeaturePayload::Subject(c) => (c, true),
            FeaturePayload::Resource(c) => (c, false),
            FeaturePayload::Constraint(_) => return None,
        };
        let wrap = |c: AtomicCondition| if subject_side { FeaturePayload::Subject(c) } else { FeaturePayload::Resource(c) };
        let class = if subject_side { &rule.subject_type } else { &rule.resource_type };

        if cond.op == CondOp::In {
            if let Ok(all) = observed_constants(&self.acl.cm, &self.acl.om, class, &cond.path) {
                let rest: BTreeSet<Atom> = all.difference(&cond.value).cloned().collect();
                if !rest.is_empty() {
                    let r = with(base.clone(), wrap(AtomicCondition::within(cond.path.clone(), rest)));
                    if self.valid_superset(&r, rule) {
                        return Some(r);
                    }
                }
            }
        }

        // Values actually taken by the covered objects.
        let covered: BTreeSet<String> =
            self.pairs(rule).iter().map(|(s, r)| if subject_side { s.clone() } else { r.clone() }).collect();
        if covered.is_empty() {
            return None;
        }
        let m = self.acl.cm.path_info(class, &cond.path).ok()?.multiplicity;
        if m.is_many() {
            return None;
        }
        let mut values = BTreeSet::new();
        for o in &covered {
            match navigate(&self.acl.om, o, &cond.path, m) {
                Value::Atom(x) => {
                    values.insert(x);
                }
                _ => return None,
            }
        }
        let r = with(base, wrap(AtomicCondition::within(cond.path.clone(), values)));
        self.valid_superset(&r, rule).then_some(r)
    }

    /// Negation-free rules granting exactly what `rule` grants, or more
    /// within `AU`.
    pub fn eliminate_negative_features(&mut self, rule: Rule) -> Vec<Rule> {
        if self.pairs(&rule).is_empty() {
            return vec![];
        }
        let mut current = rule;
        for a in atomics(&current).into_iter().filter(is_negated) {
            if let Some(r) = self.replace_negated(&current, &a) {
                trace!("negation {a} replaced: {r}");
                current = r;
            }
        }
        if !current.has_negation() {
            return vec![current];
        }

        // Fall back to one rule per covered subject, naming the resources.
        let pairs = self.pairs(&current);
        let mut by_subject: BTreeMap<&str, BTreeSet<Atom>> = BTreeMap::new();
        for (s, r) in pairs.iter() {
            by_subject.entry(s).or_default().insert(Atom::obj(r.as_str()));
        }
        let positive = atomics(&current).into_iter().filter(is_negated).fold(current.clone(), |r, a| without(&r, &a));
        by_subject
            .into_iter()
            .map(|(s, rs)| {
                positive
                    .clone()
                    .with_subject(AtomicCondition::eq(Path::id(), Atom::obj(s)))
                    .with_resource(AtomicCondition::within(Path::id(), rs))
            })
            .collect()
    }

    /// `p ≠ b` on a Boolean path becomes `p = ¬b` when that grants the same.
    fn boolean_negations(&mut self, rules: &mut [Rule]) -> bool {
        let mut changed = false;
        for rule in rules.iter_mut() {
            for a in atomics(rule) {
                let c = match &a {
                    FeaturePayload::Subject(c) | FeaturePayload::Resource(c) if c.negated && c.op == CondOp::In => c,
                    _ => continue,
                };
                let flipped: BTreeSet<Atom> = match c.value.iter().collect::<Vec<_>>()[..] {
                    [Atom::Bool(b)] => BTreeSet::from([Atom::Bool(!b)]),
                    _ => continue,
                };
                let replacement = AtomicCondition { value: flipped, negated: false, ..c.clone() };
                let replacement = match a {
                    FeaturePayload::Subject(_) => FeaturePayload::Subject(replacement),
                    _ => FeaturePayload::Resource(replacement),
                };
                let r = with(without(rule, &a), replacement);
                if *self.pairs(&r) == *self.pairs(rule) {
                    *rule = r;
                    changed = true;
                }
            }
        }
        changed
    }

    /// Merges two rules that differ only in the value set of one positive
    /// `in` condition, when the union stays valid.
    fn merge_values(&mut self, rules: &mut Vec<Rule>) -> bool {
        for i in 0..rules.len() {
            for j in i + 1..rules.len() {
                if let Some(m) = self.value_merge(&rules[i], &rules[j]) {
                    rules[i] = m;
                    rules.remove(j);
                    return true;
                }
            }
        }
        false
    }

    fn value_merge(&mut self, r1: &Rule, r2: &Rule) -> Option<Rule> {
        if r1.actions != r2.actions
            || r1.subject_type != r2.subject_type
            || r1.resource_type != r2.resource_type
            || r1.constraint != r2.constraint
        {
            return None;
        }
        let merged = |c1: &BTreeSet<AtomicCondition>, c2: &BTreeSet<AtomicCondition>| -> Option<BTreeSet<AtomicCondition>> {
            let d1: Vec<_> = c1.difference(c2).collect();
            let d2: Vec<_> = c2.difference(c1).collect();
            match (&d1[..], &d2[..]) {
                ([a], [b]) if a.path == b.path && a.op == CondOp::In && b.op == CondOp::In && !a.negated && !b.negated => {
                    let mut out: BTreeSet<AtomicCondition> = c1.intersection(c2).cloned().collect();
                    out.insert(AtomicCondition::within(a.path.clone(), a.value.union(&b.value).cloned()));
                    Some(out)
                }
                _ => None,
            }
        };
        let candidate = if r1.resource_condition == r2.resource_condition {
            Rule { subject_condition: merged(&r1.subject_condition, &r2.subject_condition)?, ..r1.clone() }
        } else if r1.subject_condition == r2.subject_condition {
            Rule { resource_condition: merged(&r1.resource_condition, &r2.resource_condition)?, ..r1.clone() }
        } else {
            return None;
        };
        self.valid(&candidate).then_some(candidate)
    }

    /// Greedily drops atomics, conditions first, those adding the fewest
    /// pairs first, as long as the rule stays valid.
    fn drop_atomics(&mut self, rules: &mut [Rule]) -> bool {
        let mut changed = false;
        for rule in rules.iter_mut() {
            let own = self.pairs(rule);
            let mut order: Vec<(bool, usize, FeaturePayload)> = atomics(rule)
                .into_iter()
                .map(|a| {
                    let grown = self.pairs(&without(rule, &a)).difference(&own).count();
                    (matches!(a, FeaturePayload::Constraint(_)), grown, a)
                })
                .collect();
            order.sort();
            for (_, _, a) in order {
                let r = without(rule, &a);
                if self.valid(&r) {
                    *rule = r;
                    changed = true;
                }
            }
        }
        changed
    }

    /// Replaces a constraint by a cheaper condition granting the same pairs.
    fn constraints_to_conditions(&mut self, rules: &mut [Rule]) -> bool {
        let mut changed = false;
        for rule in rules.iter_mut() {
            let table = self.table(rule);
            for c in rule.constraint.clone() {
                let own = self.pairs(rule);
                let base = without(rule, &FeaturePayload::Constraint(c.clone()));
                let mut candidates: Vec<(usize, usize, &FeaturePayload)> = table
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| !matches!(f, FeaturePayload::Constraint(_)) && f.wsc() < c.wsc())
                    .filter(|(_, f)| !contains(&base, f))
                    .map(|(i, f)| (f.wsc(), i, f))
                    .collect();
                candidates.sort();
                for (_, _, f) in candidates {
                    let r = with(base.clone(), f.clone());
                    if *self.pairs(&r) == *own {
                        *rule = r;
                        changed = true;
                        break;
                    }
                }
            }
        }
        changed
    }

    /// Removes rules whose meaning the other rules already grant, smallest
    /// meaning first.
    fn drop_covered(&mut self, rules: &mut Vec<Rule>) -> bool {
        let meanings: Vec<BTreeSet<Sra>> = rules.iter().map(|r| self.meaning(r)).collect();
        let mut count: HashMap<&Sra, usize> = HashMap::new();
        for m in &meanings {
            for t in m {
                *count.entry(t).or_default() += 1;
            }
        }
        let mut order: Vec<usize> = (0..rules.len()).collect();
        order.sort_by_key(|&i| (meanings[i].len(), i));
        let mut dropped = BTreeSet::new();
        for i in order {
            if meanings[i].iter().all(|t| count[t] >= 2) {
                for t in &meanings[i] {
                    *count.get_mut(t).expect("counted") -= 1;
                }
                dropped.insert(i);
            }
        }
        if dropped.is_empty() {
            return false;
        }
        let mut i = 0;
        rules.retain(|_| {
            i += 1;
            !dropped.contains(&(i - 1))
        });
        true
    }

    /// Applies all rewrites in rounds until a round changes nothing.
    pub fn merge_and_simplify(
        &mut self,
        mut rules: Vec<Rule>,
        observer: &mut dyn FnMut(Transformation, &[Rule]),
    ) -> SimplifyOutcome {
        let mut wsc_trace = vec![wsc_policy(&rules)];
        loop {
            let before = rules.clone();
            if self.boolean_negations(&mut rules) {
                observer(Transformation::BooleanNegation, &rules);
            }
            let merged = merge_same_conditions(rules.clone());
            if merged.len() != rules.len() {
                rules = merged;
                observer(Transformation::MergeActions, &rules);
            }
            while self.merge_values(&mut rules) {
                observer(Transformation::MergeValues, &rules);
            }
            if self.drop_atomics(&mut rules) {
                observer(Transformation::DropAtomic, &rules);
            }
            if self.generalize(&mut rules) {
                observer(Transformation::Generalize, &rules);
            }
            if self.constraints_to_conditions(&mut rules) {
                observer(Transformation::ConstraintToCondition, &rules);
            }
            if self.drop_covered(&mut rules) {
                observer(Transformation::DropCoveredRule, &rules);
            }
            wsc_trace.push(wsc_policy(&rules));
            if rules == before {
                break;
            }
        }
        rules.sort();
        SimplifyOutcome { rules, wsc_trace }
    }
}
