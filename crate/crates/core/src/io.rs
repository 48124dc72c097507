//! JSON and CSV documents: class models, object models, authorizations,
//! policies, datasets and run manifests.
//!
//! Paths are written relative to their root object, dot-joined, with the
//! empty path as `""`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    AclPolicy, Atom, AtomicCondition, AtomicConstraint, ClassModel, CondOp, ConsOp, ObjectModel, Path, Policy, Rule, Sra,
};
use crate::tvl::{Feature, FeatureVector, LabeledDataset, Row, TruthValue};

pub fn read_json<T: DeserializeOwned>(path: &FsPath) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &FsPath, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionDoc {
    pub path: String,
    pub op: CondOp,
    pub value: BTreeSet<Atom>,
    #[serde(default)]
    pub negated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDoc {
    pub path1: String,
    pub op: ConsOp,
    pub path2: String,
    #[serde(default)]
    pub negated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RuleDoc {
    pub subject_type: String,
    #[serde(default)]
    pub subject_condition: Vec<ConditionDoc>,
    pub resource_type: String,
    #[serde(default)]
    pub resource_condition: Vec<ConditionDoc>,
    #[serde(default)]
    pub constraint: Vec<ConstraintDoc>,
    pub actions: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    pub rules: Vec<RuleDoc>,
}

fn path_text(p: &Path) -> String {
    p.0.join(".")
}

fn condition_doc(c: &AtomicCondition) -> ConditionDoc {
    ConditionDoc { path: path_text(&c.path), op: c.op, value: c.value.clone(), negated: c.negated }
}

fn condition(d: &ConditionDoc) -> AtomicCondition {
    AtomicCondition { path: Path::parse(&d.path), op: d.op, value: d.value.clone(), negated: d.negated }
}

impl From<&Rule> for RuleDoc {
    fn from(r: &Rule) -> Self {
        RuleDoc {
            subject_type: r.subject_type.clone(),
            subject_condition: r.subject_condition.iter().map(condition_doc).collect(),
            resource_type: r.resource_type.clone(),
            resource_condition: r.resource_condition.iter().map(condition_doc).collect(),
            constraint: r
                .constraint
                .iter()
                .map(|c| ConstraintDoc { path1: path_text(&c.path1), op: c.op, path2: path_text(&c.path2), negated: c.negated })
                .collect(),
            actions: r.actions.clone(),
        }
    }
}

impl From<&RuleDoc> for Rule {
    fn from(d: &RuleDoc) -> Self {
        Rule {
            subject_type: d.subject_type.clone(),
            subject_condition: d.subject_condition.iter().map(condition).collect(),
            resource_type: d.resource_type.clone(),
            resource_condition: d.resource_condition.iter().map(condition).collect(),
            constraint: d
                .constraint
                .iter()
                .map(|c| AtomicConstraint { path1: Path::parse(&c.path1), op: c.op, path2: Path::parse(&c.path2), negated: c.negated })
                .collect(),
            actions: d.actions.clone(),
        }
    }
}

impl From<&Policy> for PolicyDoc {
    fn from(p: &Policy) -> Self {
        PolicyDoc { rules: p.rules.iter().map(RuleDoc::from).collect() }
    }
}

impl From<&PolicyDoc> for Policy {
    fn from(d: &PolicyDoc) -> Self {
        Policy::new(d.rules.iter().map(Rule::from))
    }
}

pub fn policy_to_json(p: &Policy) -> Result<String> {
    to_json(&PolicyDoc::from(p))
}

pub fn policy_from_json(text: &str) -> Result<Policy> {
    let doc: PolicyDoc = serde_json::from_str(text).map_err(|e| Error::Schema(format!("policy: {e}")))?;
    Ok(Policy::from(&doc))
}

/// Reads a policy and checks it against the class model.
pub fn read_policy(path: &FsPath, cm: &ClassModel) -> Result<Policy> {
    let doc: PolicyDoc = read_json(path)?;
    let p = Policy::from(&doc);
    p.check(cm).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    Ok(p)
}

pub fn write_policy(path: &FsPath, p: &Policy) -> Result<()> {
    fs::write(path, policy_to_json(p)?)?;
    Ok(())
}

/// Reads class model, object model and authorizations and validates them
/// together.
pub fn read_acl(classmodel: &FsPath, objectmodel: &FsPath, au: &FsPath) -> Result<AclPolicy> {
    let cm: ClassModel = read_json(classmodel)?;
    let om: ObjectModel = read_json(objectmodel)?;
    let au: Vec<Sra> = read_json(au)?;
    let acl = AclPolicy::new(cm, om, au);
    acl.validate()?;
    Ok(acl)
}

pub fn read_models(classmodel: &FsPath, objectmodel: &FsPath) -> Result<(ClassModel, ObjectModel)> {
    let cm: ClassModel = read_json(classmodel)?;
    let om: ObjectModel = read_json(objectmodel)?;
    cm.validate()?;
    om.validate(&cm)?;
    Ok((cm, om))
}

/// Authorizations as a sorted array of `[subject, resource, action]`.
pub fn write_au(path: &FsPath, au: &BTreeSet<Sra>) -> Result<()> {
    write_json(path, &au.iter().collect::<Vec<_>>())
}

const LABEL_COLUMN: &str = "label";
const SUBJECT_COLUMN: &str = "subject";
const RESOURCE_COLUMN: &str = "resource";

/// Splits a header cell `name [cost]` into its parts; cost defaults to 1.
fn parse_feature_header(cell: &str) -> Result<Feature> {
    let cell = cell.trim();
    if let Some(open) = cell.rfind(" [") {
        if let Some(num) = cell[open + 2..].strip_suffix(']') {
            let cost = num.parse().map_err(|_| Error::Schema(format!("bad feature cost in header cell {cell:?}")))?;
            return Ok(Feature::new(&cell[..open], cost));
        }
    }
    Ok(Feature::new(cell, 1))
}

/// Reads a dataset: one column per feature (header `name` or
/// `name [cost]`), then a `label` column; optional leading `subject` and
/// `resource` columns are kept as provenance. Cells are `T`, `F` or `U`.
pub fn read_dataset_csv(reader: impl std::io::Read) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let with_provenance = header.len() >= 2 && header[0] == SUBJECT_COLUMN && header[1] == RESOURCE_COLUMN;
    let first = if with_provenance { 2 } else { 0 };
    if header.last().map(String::as_str) != Some(LABEL_COLUMN) || header.len() < first + 1 {
        return Err(Error::Schema(format!("dataset header must end with a {LABEL_COLUMN:?} column")));
    }
    let features =
        header[first..header.len() - 1].iter().map(|c| parse_feature_header(c)).collect::<Result<Vec<_>>>()?;
    let mut data = LabeledDataset::new(features);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |j: usize| -> Result<TruthValue> {
            let s = rec.get(j).unwrap_or("");
            let mut chars = s.chars();
            match (chars.next().and_then(TruthValue::from_char), chars.next()) {
                (Some(t), None) => Ok(t),
                _ => Err(Error::Schema(format!("row {}: cell {s:?} is not T, F or U", i + 1))),
            }
        };
        if rec.len() != header.len() {
            return Err(Error::Schema(format!("row {}: expected {} cells, found {}", i + 1, header.len(), rec.len())));
        }
        let values = (first..header.len() - 1).map(cell).collect::<Result<Vec<_>>>()?;
        let mut row = Row::new(FeatureVector(values), cell(header.len() - 1)?);
        if with_provenance {
            row.provenance = Some((rec[0].to_string(), rec[1].to_string()));
        }
        data.push(row)?;
    }
    Ok(data)
}

pub fn write_dataset_csv(data: &LabeledDataset, writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_provenance = !data.rows.is_empty() && data.rows.iter().all(|r| r.provenance.is_some());
    let mut header: Vec<String> = Vec::new();
    if with_provenance {
        header.extend([SUBJECT_COLUMN.to_string(), RESOURCE_COLUMN.to_string()]);
    }
    header.extend(data.features.iter().map(|f| format!("{} [{}]", f.label, f.cost)));
    header.push(LABEL_COLUMN.to_string());
    w.write_record(&header)?;
    for row in &data.rows {
        let mut rec: Vec<String> = Vec::new();
        if let (true, Some((s, r))) = (with_provenance, &row.provenance) {
            rec.extend([s.clone(), r.clone()]);
        }
        rec.extend(row.values.0.iter().map(|t| t.as_char().to_string()));
        rec.push(row.label.as_char().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &FsPath) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &FsPath) -> Result<Self> {
        Ok(FileDigest { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

/// What a command read, how it was configured and what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &FsPath) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &FsPath) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testmodel::{projects, running_example};
    use crate::tvl::testdata::running_dataset;
    use proptest::prelude::*;

    fn sample_policy() -> Policy {
        Policy::new([
            Rule::new("Student", "Document", ["read"]).with_resource(AtomicCondition::eq(Path::parse("type"), Atom::obj("Handbook"))),
            Rule::new("Student", "Document", ["read", "write"])
                .with_subject(AtomicCondition::within(Path::parse("dept"), [Atom::obj("CS"), Atom::obj("EE")]).negate())
                .with_constraint(AtomicConstraint::new(Path::parse("dept"), ConsOp::Equal, Path::parse("dept")))
                .with_constraint(AtomicConstraint::new(Path::empty(), ConsOp::Equal, Path::empty()).negate()),
        ])
    }

    #[test]
    fn policy_round_trip() {
        let p = sample_policy();
        let text = policy_to_json(&p).unwrap();
        assert!(text.contains("\"subjectType\": \"Student\""));
        assert!(text.contains("\"path2\": \"\""));
        assert_eq!(policy_from_json(&text).unwrap(), p);
    }

    #[test]
    fn policy_rejects_unknown_fields() {
        let bad = r#"{"rules":[{"subjectType":"S","resourceType":"R","actions":["a"],"colour":1}]}"#;
        assert!(matches!(policy_from_json(bad), Err(Error::Schema(_))));
        let bool_value = r#"{"rules":[{"subjectType":"S","resourceType":"R","actions":["a"],
            "resourceCondition":[{"path":"open","op":"in","value":[true]}]}]}"#;
        let p = policy_from_json(bool_value).unwrap();
        assert!(p.rules[0].resource_condition.iter().next().unwrap().value.contains(&Atom::Bool(true)));
    }

    #[test]
    fn models_and_au_round_trip() {
        for (cm, om) in [running_example(), projects()] {
            let cm2: ClassModel = serde_json::from_str(&to_json(&cm).unwrap()).unwrap();
            let om2: ObjectModel = serde_json::from_str(&to_json(&om).unwrap()).unwrap();
            assert_eq!((cm2, om2), (cm, om));
        }
        let au = vec![Sra::new("s", "r", "read")];
        let text = to_json(&au).unwrap();
        assert_eq!(serde_json::from_str::<serde_json::Value>(&text).unwrap(), serde_json::json!([["s", "r", "read"]]));
        assert_eq!(serde_json::from_str::<Vec<Sra>>(&text).unwrap(), au);
    }

    #[test]
    fn acl_files_are_cross_validated() {
        let dir = tempfile::tempdir().unwrap();
        let (cm, om) = running_example();
        let (c, o, a) = (dir.path().join("cm.json"), dir.path().join("om.json"), dir.path().join("au.json"));
        write_json(&c, &cm).unwrap();
        write_json(&o, &om).unwrap();
        write_au(&a, &BTreeSet::from([Sra::new("CS-student-1", "CS-doc-1", "read")])).unwrap();
        assert_eq!(read_acl(&c, &o, &a).unwrap().au.len(), 1);
        write_au(&a, &BTreeSet::from([Sra::new("ghost", "CS-doc-1", "read")])).unwrap();
        assert!(matches!(read_acl(&c, &o, &a), Err(Error::Schema(_))));
        fs::write(&a, "not json").unwrap();
        assert!(matches!(read_acl(&c, &o, &a), Err(Error::Schema(_))));
        assert!(matches!(read_acl(&c, &o, &dir.path().join("missing.json")), Err(Error::Usage(_))));
    }

    #[test]
    fn dataset_csv_round_trip() {
        // Provenance is written only when every row has it.
        let mut d = running_dataset();
        for r in &mut d.rows {
            r.provenance = None;
        }
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        assert_eq!(read_dataset_csv(&buf[..]).unwrap(), d);

        for r in &mut d.rows {
            r.provenance = Some(("s".into(), "r".into()));
        }
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("subject,resource,"));
        assert_eq!(read_dataset_csv(&buf[..]).unwrap(), d);
    }

    #[test]
    fn dataset_csv_errors() {
        assert!(read_dataset_csv("a,b\nT,F\n".as_bytes()).is_err());
        assert!(read_dataset_csv("a,label\nX,F\n".as_bytes()).is_err());
        assert!(read_dataset_csv("a,label\nT\n".as_bytes()).is_err());
        let d = read_dataset_csv("a [3],b,label\nT,U,T\nF,F,F\n".as_bytes()).unwrap();
        assert_eq!(d.features, vec![Feature::new("a", 3), Feature::new("b", 1)]);
        assert_eq!(d.rows.len(), 2);
    }

    #[test]
    fn digests_are_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    fn arb_atom() -> impl Strategy<Value = Atom> {
        prop_oneof![any::<bool>().prop_map(Atom::Bool), "[a-z]{1,4}".prop_map(Atom::Obj)]
    }

    fn arb_path() -> impl Strategy<Value = Path> {
        prop::collection::vec("[a-z]{1,3}", 0..3).prop_map(Path)
    }

    proptest! {
        #[test]
        fn arbitrary_policies_round_trip(
            conds in prop::collection::vec((arb_path(), prop::collection::btree_set(arb_atom(), 1..3), any::<bool>(), any::<bool>()), 0..4),
            cons in prop::collection::vec((arb_path(), arb_path(), any::<bool>()), 0..3),
        ) {
            let mut r = Rule::new("A", "B", ["x"]);
            for (p, v, neg, subject) in conds {
                let c = AtomicCondition { path: p, op: CondOp::In, value: v, negated: neg };
                if subject { r.subject_condition.insert(c); } else { r.resource_condition.insert(c); }
            }
            for (p1, p2, neg) in cons {
                r.constraint.insert(AtomicConstraint { path1: p1, op: ConsOp::Subseteq, path2: p2, negated: neg });
            }
            let p = Policy::new([r]);
            prop_assert_eq!(policy_from_json(&policy_to_json(&p).unwrap()).unwrap(), p);
        }
    }
}
