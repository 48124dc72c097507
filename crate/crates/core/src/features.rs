//! Candidate features for one (subject type, resource type) pair and the
//! three-valued feature vectors they induce over all subject/resource pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    condition_value, constraint_value, AclPolicy, Atom, AtomicCondition, AtomicConstraint, ClassModel, ConsOp,
    FieldType, ObjectModel, Path, PathType, Value,
};
use crate::tvl::{Feature, FeatureVector, LabeledDataset, Row, TruthValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionLimits {
    pub max_condition_path_len: usize,
    /// Per side of a constraint.
    pub max_constraint_path_len: usize,
    pub include_id_conditions: bool,
}

impl Default for ExtractionLimits {
    fn default() -> Self {
        ExtractionLimits { max_condition_path_len: 2, max_constraint_path_len: 3, include_id_conditions: false }
    }
}

/// What a feature tests. The variant order fixes the table order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeaturePayload {
    Constraint(AtomicConstraint),
    Subject(AtomicCondition),
    Resource(AtomicCondition),
}

impl FeaturePayload {
    pub fn wsc(&self) -> usize {
        match self {
            FeaturePayload::Constraint(c) => c.wsc(),
            FeaturePayload::Subject(c) | FeaturePayload::Resource(c) => c.wsc(),
        }
    }

    pub fn is_id_condition(&self) -> bool {
        match self {
            FeaturePayload::Subject(c) | FeaturePayload::Resource(c) => c.path.is_id(),
            FeaturePayload::Constraint(_) => false,
        }
    }
}

impl fmt::Display for FeaturePayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeaturePayload::Constraint(c) => write!(f, "{c}"),
            FeaturePayload::Subject(c) => f.write_str(&c.display_from("subject")),
            FeaturePayload::Resource(c) => f.write_str(&c.display_from("resource")),
        }
    }
}

/// Ordered, duplicate-free features for one (subject type, resource type).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureTable {
    pub subject_type: String,
    pub resource_type: String,
    pub entries: Vec<FeaturePayload>,
}

impl FeatureTable {
    pub fn build(cm: &ClassModel, om: &ObjectModel, cs: &str, cr: &str, limits: &ExtractionLimits) -> Result<Self> {
        let mut entries: BTreeSet<FeaturePayload> = BTreeSet::new();
        entries.extend(enumerate_constraint_features(cm, cs, cr, limits)?.into_iter().map(FeaturePayload::Constraint));
        entries.extend(enumerate_condition_features(cm, om, cs, limits)?.into_iter().map(FeaturePayload::Subject));
        entries.extend(enumerate_condition_features(cm, om, cr, limits)?.into_iter().map(FeaturePayload::Resource));
        Ok(FeatureTable { subject_type: cs.to_string(), resource_type: cr.to_string(), entries: entries.into_iter().collect() })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn features(&self) -> Vec<Feature> {
        self.entries.iter().map(|p| Feature::new(p.to_string(), p.wsc() as u32)).collect()
    }

    pub fn position(&self, p: &FeaturePayload) -> Option<usize> {
        self.entries.iter().position(|e| e == p)
    }
}

/// All well-typed paths of length `1..=max_len` from `start`, including the
/// one-field path `id`.
pub fn enumerate_paths(cm: &ClassModel, start: &str, max_len: usize) -> Result<Vec<Path>> {
    if !cm.has_class(start) {
        return Err(Error::Usage(format!("unknown class {start}")));
    }
    let mut out = Vec::new();
    if max_len == 0 {
        return Ok(out);
    }
    out.push(Path::id());
    let mut frontier: Vec<(Path, String)> = vec![(Path::empty(), start.to_string())];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (path, class) in &frontier {
            for (name, decl) in cm.fields(class) {
                let mut p = path.clone();
                p.0.push(name.clone());
                if let FieldType::Class(c) = &decl.ty {
                    next.push((p.clone(), c.clone()));
                }
                out.push(p);
            }
        }
        frontier = next;
    }
    out.sort();
    Ok(out)
}

/// Constants observed for the last field of `path`, over every object that
/// has that field.
pub(crate) fn observed_constants(cm: &ClassModel, om: &ObjectModel, start: &str, path: &Path) -> Result<BTreeSet<Atom>> {
    if path.is_id() {
        return Ok(om.instances(start).iter().map(|id| Atom::obj(id.as_str())).collect());
    }
    let (last, prefix) = path.0.split_last().ok_or_else(|| Error::Usage("empty condition path".into()))?;
    let owner = match cm.path_info(start, &Path(prefix.to_vec()))?.ty {
        PathType::Class(c) => c,
        _ => return Err(Error::Usage(format!("path {path} does not start at an object"))),
    };
    let mut out = BTreeSet::new();
    for id in om.instances(&owner) {
        if let Some(v) = om.get(id).and_then(|o| o.fields.get(last)) {
            out.extend(v.atoms().into_iter().cloned());
        }
    }
    Ok(out)
}

/// Positive atomic conditions on objects of `class`: `p = true` and
/// `p = false` for Boolean paths, one per observed constant otherwise.
pub fn enumerate_condition_features(
    cm: &ClassModel,
    om: &ObjectModel,
    class: &str,
    limits: &ExtractionLimits,
) -> Result<Vec<AtomicCondition>> {
    let mut out = Vec::new();
    for path in enumerate_paths(cm, class, limits.max_condition_path_len)? {
        if path.is_id() && !limits.include_id_conditions {
            continue;
        }
        let info = cm.path_info(class, &path)?;
        let constants: Vec<Atom> = match info.ty {
            PathType::Bool => vec![Atom::Bool(false), Atom::Bool(true)],
            _ => observed_constants(cm, om, class, &path)?.into_iter().collect(),
        };
        for a in constants {
            out.push(if info.multiplicity.is_many() {
                AtomicCondition::contains(path.clone(), a)
            } else {
                AtomicCondition::eq(path.clone(), a)
            });
        }
    }
    Ok(out)
}

/// Positive atomic constraints between `cs` and `cr` whose paths end in the
/// same class. Both sides empty is allowed only when the classes coincide.
pub fn enumerate_constraint_features(
    cm: &ClassModel,
    cs: &str,
    cr: &str,
    limits: &ExtractionLimits,
) -> Result<Vec<AtomicConstraint>> {
    let sides = |class: &str| -> Result<Vec<(Path, String, crate::model::Multiplicity)>> {
        let mut paths = vec![Path::empty()];
        paths.extend(enumerate_paths(cm, class, limits.max_constraint_path_len)?.into_iter().filter(|p| !p.is_id()));
        let mut out = Vec::new();
        for p in paths {
            let info = cm.path_info(class, &p)?;
            if let PathType::Class(c) = info.ty {
                out.push((p, c, info.multiplicity));
            }
        }
        Ok(out)
    };
    let left = sides(cs)?;
    let right = sides(cr)?;
    let mut out = Vec::new();
    for (p1, t1, m1) in &left {
        for (p2, t2, m2) in &right {
            if t1 != t2 {
                continue;
            }
            for &op in ConsOp::for_multiplicities(*m1, *m2) {
                out.push(AtomicConstraint::new(p1.clone(), op, p2.clone()));
            }
        }
    }
    Ok(out)
}

/// Feature values for every (subject, resource) pair of a table's types,
/// independent of the action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMatrix {
    pub table: FeatureTable,
    pub pairs: Vec<(String, String)>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn compute(cm: &ClassModel, om: &ObjectModel, table: FeatureTable) -> Self {
        let subjects = om.instances(&table.subject_type);
        let resources = om.instances(&table.resource_type);

        // Navigate every distinct path once per object.
        let mut nav_cache: BTreeMap<(bool, &Path), Vec<Value>> = BTreeMap::new();
        let cache = |subject_side: bool, p: &'_ Path| -> Vec<Value> {
            let (class, objs) =
                if subject_side { (&table.subject_type, subjects) } else { (&table.resource_type, resources) };
            let m = cm.path_info(class, p).map(|i| i.multiplicity).unwrap_or(crate::model::Multiplicity::One);
            objs.iter().map(|o| crate::model::navigate(om, o, p, m)).collect()
        };
        for e in &table.entries {
            match e {
                FeaturePayload::Subject(c) => {
                    nav_cache.entry((true, &c.path)).or_insert_with(|| cache(true, &c.path));
                }
                FeaturePayload::Resource(c) => {
                    nav_cache.entry((false, &c.path)).or_insert_with(|| cache(false, &c.path));
                }
                FeaturePayload::Constraint(c) => {
                    nav_cache.entry((true, &c.path1)).or_insert_with(|| cache(true, &c.path1));
                    nav_cache.entry((false, &c.path2)).or_insert_with(|| cache(false, &c.path2));
                }
            }
        }

        let mut pairs = Vec::with_capacity(subjects.len() * resources.len());
        let mut rows = Vec::with_capacity(subjects.len() * resources.len());
        for (si, s) in subjects.iter().enumerate() {
            for (ri, r) in resources.iter().enumerate() {
                let values = table
                    .entries
                    .iter()
                    .map(|e| match e {
                        FeaturePayload::Subject(c) => condition_value(&nav_cache[&(true, &c.path)][si], c),
                        FeaturePayload::Resource(c) => condition_value(&nav_cache[&(false, &c.path)][ri], c),
                        FeaturePayload::Constraint(c) => constraint_value(
                            &nav_cache[&(true, &c.path1)][si],
                            &nav_cache[&(false, &c.path2)][ri],
                            c.op,
                            c.negated,
                        ),
                    })
                    .collect();
                pairs.push((s.clone(), r.clone()));
                rows.push(FeatureVector(values));
            }
        }
        FeatureMatrix { table, pairs, rows }
    }

    /// Drops features with the same value in every row.
    pub fn prune_useless(mut self) -> Self {
        let Some(first) = self.rows.first() else { return self };
        let keep: Vec<bool> = (0..self.table.len())
            .map(|f| self.rows.iter().any(|r| r.0[f] != first.0[f]))
            .collect();
        let mut i = 0;
        self.table.entries.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        for r in &mut self.rows {
            let mut j = 0;
            r.0.retain(|_| {
                j += 1;
                keep[j - 1]
            });
        }
        self
    }

    /// Every `U` cell turned into `F`.
    pub fn coerce_unknown_to_false(mut self) -> Self {
        for r in &mut self.rows {
            for v in &mut r.0 {
                if *v == TruthValue::U {
                    *v = TruthValue::F;
                }
            }
        }
        self
    }

    /// Rows labeled `T` exactly when the request is authorized.
    pub fn dataset(&self, action: &str, acl: &AclPolicy) -> LabeledDataset {
        let mut d = LabeledDataset::new(self.table.features());
        for ((s, r), v) in self.pairs.iter().zip(&self.rows) {
            let t = crate::model::Sra::new(s, r, action);
            let mut row = Row::new(v.clone(), acl.au.contains(&t).into());
            row.provenance = Some((s.clone(), r.clone()));
            d.push(row).expect("rows match the table width");
        }
        d
    }
}

/// Labeled feature vectors for one (subject type, resource type, action).
pub fn build_dataset(acl: &AclPolicy, table: &FeatureTable, action: &str) -> LabeledDataset {
    FeatureMatrix::compute(&acl.cm, &acl.om, table.clone()).dataset(action, acl)
}
