//! Kleene three-valued logic over labeled feature vectors.
//!
//! Truth values are ordered `F < U < T` (the *truth* ordering), so `and` is
//! `min` and `or` is `max`. The *information* ordering is a different partial
//! order in which `U` sits below both `T` and `F`; every formula is monotone
//! with respect to it, which is what makes a dataset learnable.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::{BitAnd, BitOr, Not};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TruthValue {
    F,
    U,
    T,
}

impl TruthValue {
    pub const ALL: [TruthValue; 3] = [TruthValue::T, TruthValue::F, TruthValue::U];

    /// Position used for the three children of a decision-tree node.
    pub fn index(self) -> usize {
        match self {
            TruthValue::T => 0,
            TruthValue::F => 1,
            TruthValue::U => 2,
        }
    }

    pub fn is_true(self) -> bool {
        self == TruthValue::T
    }

    pub fn as_char(self) -> char {
        match self {
            TruthValue::T => 'T',
            TruthValue::F => 'F',
            TruthValue::U => 'U',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'T' | 't' => Some(TruthValue::T),
            'F' | 'f' => Some(TruthValue::F),
            'U' | 'u' => Some(TruthValue::U),
            _ => None,
        }
    }
}

impl From<bool> for TruthValue {
    fn from(b: bool) -> Self {
        if b {
            TruthValue::T
        } else {
            TruthValue::F
        }
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Not for TruthValue {
    type Output = Self;

    fn not(self) -> Self {
        kleene_not(self)
    }
}

impl BitAnd for TruthValue {
    type Output = Self;

    fn bitand(self, rhs: Self) -> Self {
        kleene_and(self, rhs)
    }
}

impl BitOr for TruthValue {
    type Output = Self;

    fn bitor(self, rhs: Self) -> Self {
        kleene_or(self, rhs)
    }
}

pub fn kleene_not(t: TruthValue) -> TruthValue {
    match t {
        TruthValue::T => TruthValue::F,
        TruthValue::F => TruthValue::T,
        TruthValue::U => TruthValue::U,
    }
}

pub fn kleene_and(a: TruthValue, b: TruthValue) -> TruthValue {
    a.min(b)
}

pub fn kleene_or(a: TruthValue, b: TruthValue) -> TruthValue {
    a.max(b)
}

/// Information ordering: `a <= b` iff `a == b` or `a == U`.
pub fn info_leq(a: TruthValue, b: TruthValue) -> bool {
    a == b || a == TruthValue::U
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureId(pub usize);

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// Column metadata of a learning task. `cost` is the WSC of the underlying
/// condition or constraint and breaks information-gain ties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub label: String,
    pub cost: u32,
}

impl Feature {
    pub fn new(label: impl Into<String>, cost: u32) -> Self {
        Feature { label: label.into(), cost }
    }
}

/// Positional truth values over an ordered feature table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureVector(pub Vec<TruthValue>);

impl FeatureVector {
    pub fn get(&self, f: FeatureId) -> TruthValue {
        self.0[f.0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parse(s: &str) -> Option<Self> {
        s.chars().map(TruthValue::from_char).collect::<Option<Vec<_>>>().map(FeatureVector)
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            write!(f, "{}", v.as_char())?;
        }
        Ok(())
    }
}

pub fn fv_leq(v1: &FeatureVector, v2: &FeatureVector) -> Result<bool> {
    if v1.len() != v2.len() {
        return Err(Error::Usage(format!(
            "feature vectors over different tables ({} vs {} features)",
            v1.len(),
            v2.len()
        )));
    }
    Ok(v1.0.iter().zip(&v2.0).all(|(&a, &b)| info_leq(a, b)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub values: FeatureVector,
    pub label: TruthValue,
    /// (subject id, resource id) the row was generated from, when known.
    pub provenance: Option<(String, String)>,
}

impl Row {
    pub fn new(values: FeatureVector, label: TruthValue) -> Self {
        Row { values, label, provenance: None }
    }

    pub fn describe(&self) -> String {
        match &self.provenance {
            Some((s, r)) => format!("{s}, {r}"),
            None => self.values.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabeledDataset {
    pub features: Vec<Feature>,
    pub rows: Vec<Row>,
}

impl LabeledDataset {
    pub fn new(features: Vec<Feature>) -> Self {
        LabeledDataset { features, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Row) -> Result<()> {
        if row.values.len() != self.features.len() {
            return Err(Error::Usage(format!(
                "row has {} values but the table has {} features",
                row.values.len(),
                self.features.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> {
        (0..self.features.len()).map(FeatureId)
    }

    pub fn cost(&self, f: FeatureId) -> u32 {
        self.features[f.0].cost
    }

    pub fn label(&self, f: FeatureId) -> &str {
        &self.features[f.0].label
    }

    pub fn find(&self, label: &str) -> Option<FeatureId> {
        self.features.iter().position(|f| f.label == label).map(FeatureId)
    }

    /// Copy of the dataset with every `U` cell replaced by `F`.
    pub fn coerce_unknown_to_false(&self) -> LabeledDataset {
        let rows = self
            .rows
            .iter()
            .map(|r| Row {
                values: FeatureVector(
                    r.values
                        .0
                        .iter()
                        .map(|&v| if v == TruthValue::U { TruthValue::F } else { v })
                        .collect(),
                ),
                label: r.label,
                provenance: r.provenance.clone(),
            })
            .collect();
        LabeledDataset { features: self.features.clone(), rows }
    }
}

/// Returns a pair of row indices `(i, j)` with `v_i <= v_j` but
/// `label_i </= label_j`, or `None` if the dataset is monotonic.
pub fn check_monotonic(data: &LabeledDataset) -> Option<(usize, usize)> {
    for (i, a) in data.rows.iter().enumerate() {
        for (j, b) in data.rows.iter().enumerate() {
            if i == j || info_leq(a.label, b.label) {
                continue;
            }
            if a.values.0.iter().zip(&b.values.0).all(|(&x, &y)| info_leq(x, y)) {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
    /// `f = U`: a two-valued test on the tree's U edge. Not a 3VL formula;
    /// only appears inside the learner.
    IsUnknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub feature: FeatureId,
    pub polarity: Polarity,
}

impl Literal {
    pub fn pos(f: FeatureId) -> Self {
        Literal { feature: f, polarity: Polarity::Positive }
    }

    pub fn neg(f: FeatureId) -> Self {
        Literal { feature: f, polarity: Polarity::Negative }
    }

    pub fn is_unknown(f: FeatureId) -> Self {
        Literal { feature: f, polarity: Polarity::IsUnknown }
    }
}

pub fn eval_literal(l: Literal, v: &FeatureVector) -> TruthValue {
    let x = v.get(l.feature);
    match l.polarity {
        Polarity::Positive => x,
        Polarity::Negative => kleene_not(x),
        Polarity::IsUnknown => TruthValue::from(x == TruthValue::U),
    }
}

/// A set of literals with at most one literal per feature.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Conjunction(BTreeMap<FeatureId, Polarity>);

impl Conjunction {
    pub fn new() -> Self {
        Conjunction::default()
    }

    pub fn from_literals(lits: impl IntoIterator<Item = Literal>) -> Self {
        let mut c = Conjunction::new();
        for l in lits {
            c.insert(l);
        }
        c
    }

    /// Adds `l`, replacing any literal on the same feature.
    pub fn insert(&mut self, l: Literal) {
        self.0.insert(l.feature, l.polarity);
    }

    pub fn remove(&mut self, f: FeatureId) -> Option<Polarity> {
        self.0.remove(&f)
    }

    pub fn polarity(&self, f: FeatureId) -> Option<Polarity> {
        self.0.get(&f).copied()
    }

    pub fn uses(&self, f: FeatureId) -> bool {
        self.0.contains_key(&f)
    }

    pub fn literals(&self) -> impl Iterator<Item = Literal> + '_ {
        self.0.iter().map(|(&feature, &polarity)| Literal { feature, polarity })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn unknown_features(&self) -> Vec<FeatureId> {
        self.literals().filter(|l| l.polarity == Polarity::IsUnknown).map(|l| l.feature).collect()
    }

    pub fn has_unknown_literal(&self) -> bool {
        self.0.values().any(|&p| p == Polarity::IsUnknown)
    }

    /// Literal-set inclusion: every literal of `self` also occurs in `other`.
    pub fn is_subset_of(&self, other: &Conjunction) -> bool {
        self.0.len() <= other.0.len()
            && self.0.iter().all(|(f, p)| other.0.get(f) == Some(p))
    }

    pub fn display<'a>(&'a self, data: &'a LabeledDataset) -> impl fmt::Display + 'a {
        ConjunctionDisplay { conj: self, features: &data.features }
    }
}

struct ConjunctionDisplay<'a> {
    conj: &'a Conjunction,
    features: &'a [Feature],
}

impl fmt::Display for ConjunctionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conj.is_empty() {
            return write!(f, "true");
        }
        for (i, l) in self.conj.literals().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            let name = self
                .features
                .get(l.feature.0)
                .map(|x| x.label.clone())
                .unwrap_or_else(|| l.feature.to_string());
            match l.polarity {
                Polarity::Positive => write!(f, "({name})")?,
                Polarity::Negative => write!(f, "!({name})")?,
                Polarity::IsUnknown => write!(f, "({name})=U")?,
            }
        }
        Ok(())
    }
}

pub fn eval_conjunction(c: &Conjunction, v: &FeatureVector) -> TruthValue {
    // Short-circuit on F; T is the identity.
    let mut acc = TruthValue::T;
    for l in c.literals() {
        acc = kleene_and(acc, eval_literal(l, v));
        if acc == TruthValue::F {
            break;
        }
    }
    acc
}

/// A disjunction of conjunctions, kept as a set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DnfFormula {
    pub disjuncts: BTreeSet<Conjunction>,
}

impl DnfFormula {
    pub fn new() -> Self {
        DnfFormula::default()
    }

    pub fn from_conjunctions(cs: impl IntoIterator<Item = Conjunction>) -> Self {
        DnfFormula { disjuncts: cs.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.disjuncts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.disjuncts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Conjunction> {
        self.disjuncts.iter()
    }

    pub fn has_unknown_literal(&self) -> bool {
        self.disjuncts.iter().any(Conjunction::has_unknown_literal)
    }

    pub fn display<'a>(&'a self, data: &'a LabeledDataset) -> impl fmt::Display + 'a {
        FormulaDisplay { formula: self, data }
    }
}

struct FormulaDisplay<'a> {
    formula: &'a DnfFormula,
    data: &'a LabeledDataset,
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.formula.is_empty() {
            return write!(f, "false");
        }
        for (i, c) in self.formula.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            if c.len() > 1 {
                write!(f, "[{}]", c.display(self.data))?;
            } else {
                write!(f, "{}", c.display(self.data))?;
            }
        }
        Ok(())
    }
}

pub fn eval_dnf(d: &DnfFormula, v: &FeatureVector) -> TruthValue {
    eval_disjuncts(d.iter(), v)
}

pub(crate) fn eval_disjuncts<'a>(
    cs: impl IntoIterator<Item = &'a Conjunction>,
    v: &FeatureVector,
) -> TruthValue {
    let mut acc = TruthValue::F;
    for c in cs {
        acc = kleene_or(acc, eval_conjunction(c, v));
        if acc == TruthValue::T {
            break;
        }
    }
    acc
}

/// No row labeled F or U evaluates to T.
pub fn valid(d: &DnfFormula, data: &LabeledDataset) -> bool {
    data.rows.iter().all(|r| r.label.is_true() || !eval_dnf(d, &r.values).is_true())
}

/// Every row labeled T evaluates to T.
pub fn covers(d: &DnfFormula, data: &LabeledDataset) -> bool {
    data.rows.iter().all(|r| !r.label.is_true() || eval_dnf(d, &r.values).is_true())
}

pub fn conjunction_valid(c: &Conjunction, data: &LabeledDataset) -> bool {
    data.rows.iter().all(|r| r.label.is_true() || !eval_conjunction(c, &r.values).is_true())
}

/// Drops every disjunct whose literal set includes another disjunct's.
/// Equal literal sets are already collapsed by the set representation.
pub fn remove_redundant(d: &DnfFormula) -> DnfFormula {
    let all: Vec<&Conjunction> = d.disjuncts.iter().collect();
    let kept = all
        .iter()
        .filter(|c| !all.iter().any(|other| other != *c && other.is_subset_of(c)))
        .map(|c| (*c).clone());
    DnfFormula::from_conjunctions(kept)
}
