use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Multiplicity {
    One,
    Optional,
    Many,
}

impl Multiplicity {
    /// Multiplicity of a path made of two consecutive pieces.
    pub fn then(self, next: Multiplicity) -> Multiplicity {
        use Multiplicity::*;
        match (self, next) {
            (Many, _) | (_, Many) => Many,
            (One, One) => One,
            _ => Optional,
        }
    }

    pub fn is_many(self) -> bool {
        self == Multiplicity::Many
    }
}

/// Type of a declared field: another class or Boolean.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum FieldType {
    Bool,
    Class(String),
}

impl From<String> for FieldType {
    fn from(s: String) -> Self {
        if s == "Boolean" {
            FieldType::Bool
        } else {
            FieldType::Class(s)
        }
    }
}

impl From<FieldType> for String {
    fn from(t: FieldType) -> Self {
        match t {
            FieldType::Bool => "Boolean".to_string(),
            FieldType::Class(c) => c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    #[serde(rename = "type")]
    pub ty: FieldType,
    pub multiplicity: Multiplicity,
}

impl FieldDecl {
    pub fn new(ty: FieldType, multiplicity: Multiplicity) -> Self {
        FieldDecl { ty, multiplicity }
    }

    pub fn one(class: &str) -> Self {
        FieldDecl::new(FieldType::Class(class.to_string()), Multiplicity::One)
    }

    pub fn optional(class: &str) -> Self {
        FieldDecl::new(FieldType::Class(class.to_string()), Multiplicity::Optional)
    }

    pub fn many(class: &str) -> Self {
        FieldDecl::new(FieldType::Class(class.to_string()), Multiplicity::Many)
    }

    pub fn boolean() -> Self {
        FieldDecl::new(FieldType::Bool, Multiplicity::One)
    }
}

/// Classes and their fields. Every class also has an implicit `id` field.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassModel {
    pub classes: BTreeMap<String, BTreeMap<String, FieldDecl>>,
}

/// What a path ends in.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathType {
    /// The implicit `id` field.
    Id,
    Bool,
    Class(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathInfo {
    pub ty: PathType,
    pub multiplicity: Multiplicity,
}

impl ClassModel {
    pub fn add_class(&mut self, name: &str, fields: impl IntoIterator<Item = (&'static str, FieldDecl)>) {
        self.classes
            .insert(name.to_string(), fields.into_iter().map(|(f, d)| (f.to_string(), d)).collect());
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.classes.contains_key(class)
    }

    pub fn field(&self, class: &str, field: &str) -> Option<&FieldDecl> {
        self.classes.get(class)?.get(field)
    }

    pub fn fields(&self, class: &str) -> impl Iterator<Item = (&String, &FieldDecl)> {
        self.classes.get(class).into_iter().flat_map(|m| m.iter())
    }

    /// Checks field types, Boolean multiplicities and reserved names.
    pub fn validate(&self) -> Result<()> {
        for (class, fields) in &self.classes {
            for (name, decl) in fields {
                if name == "id" {
                    return Err(Error::Schema(format!("{class}.id is implicit and cannot be declared")));
                }
                match &decl.ty {
                    FieldType::Bool if decl.multiplicity != Multiplicity::One => {
                        return Err(Error::Schema(format!("Boolean field {class}.{name} must have multiplicity one")));
                    }
                    FieldType::Class(c) if !self.has_class(c) => {
                        return Err(Error::Schema(format!("{class}.{name} refers to undeclared class {c}")));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Type and multiplicity of `path` starting at `start`.
    pub fn path_info(&self, start: &str, path: &Path) -> Result<PathInfo> {
        if !self.has_class(start) {
            return Err(Error::Usage(format!("unknown class {start}")));
        }
        let mut ty = PathType::Class(start.to_string());
        let mut multiplicity = Multiplicity::One;
        for field in &path.0 {
            let PathType::Class(class) = &ty else {
                return Err(Error::Usage(format!("path {path} continues past a non-object field")));
            };
            if field == "id" {
                ty = PathType::Id;
                continue;
            }
            let decl = self
                .field(class, field)
                .ok_or_else(|| Error::Usage(format!("class {class} has no field {field} (path {path} from {start})")))?;
            multiplicity = multiplicity.then(decl.multiplicity);
            ty = match &decl.ty {
                FieldType::Bool => PathType::Bool,
                FieldType::Class(c) => PathType::Class(c.clone()),
            };
        }
        Ok(PathInfo { ty, multiplicity })
    }
}

/// A constant: an object id or a Boolean.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Atom {
    Bool(bool),
    Obj(String),
}

impl Atom {
    pub fn obj(id: impl Into<String>) -> Self {
        Atom::Obj(id.into())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Bool(b) => write!(f, "{b}"),
            Atom::Obj(id) => f.write_str(id),
        }
    }
}

/// A field value, or the result of navigating a path.
///
/// Stored sets never contain `unknown`; navigated sets may, which is what
/// `has_unknown` records.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Atom(Atom),
    None,
    Unknown,
    Set { atoms: BTreeSet<Atom>, has_unknown: bool },
}

impl Value {
    pub fn obj(id: impl Into<String>) -> Self {
        Value::Atom(Atom::Obj(id.into()))
    }

    pub fn set(atoms: impl IntoIterator<Item = Atom>) -> Self {
        Value::Set { atoms: atoms.into_iter().collect(), has_unknown: false }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Value::Unknown)
    }

    /// Whether `unknown` was met: the value itself or an element of a set.
    pub fn involves_unknown(&self) -> bool {
        matches!(self, Value::Unknown | Value::Set { has_unknown: true, .. })
    }

    /// Definite atoms carried by this value.
    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Value::Atom(a) => vec![a],
            Value::Set { atoms, .. } => atoms.iter().collect(),
            Value::None | Value::Unknown => vec![],
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match self {
            Value::Atom(a) => a.serialize(s),
            Value::None => s.serialize_none(),
            Value::Unknown => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("$unknown", &true)?;
                m.end()
            }
            Value::Set { atoms, has_unknown } => {
                if *has_unknown {
                    return Err(serde::ser::Error::custom("sets containing unknown cannot be stored"));
                }
                atoms.serialize(s)
            }
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = serde_json::Value::deserialize(d)?;
        value_from_json(&j).map_err(de::Error::custom)
    }
}

fn value_from_json(j: &serde_json::Value) -> std::result::Result<Value, String> {
    use serde_json::Value as J;
    let atom = |j: &J| match j {
        J::String(s) => Ok(Atom::Obj(s.clone())),
        J::Bool(b) => Ok(Atom::Bool(*b)),
        other => Err(format!("expected an object id or Boolean inside a set, found {other}")),
    };
    match j {
        J::Null => Ok(Value::None),
        J::String(_) | J::Bool(_) => Ok(Value::Atom(atom(j)?)),
        J::Array(xs) => Ok(Value::Set { atoms: xs.iter().map(atom).collect::<std::result::Result<_, _>>()?, has_unknown: false }),
        J::Object(m) if m.len() == 1 && m.get("$unknown") == Some(&J::Bool(true)) => Ok(Value::Unknown),
        other => Err(format!("unsupported field value {other}")),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Object {
    pub id: String,
    pub class: String,
    #[serde(default)]
    pub fields: BTreeMap<String, Value>,
}

impl Object {
    pub fn new(id: &str, class: &str) -> Self {
        Object { id: id.to_string(), class: class.to_string(), fields: BTreeMap::new() }
    }

    pub fn with(mut self, field: &str, v: Value) -> Self {
        self.fields.insert(field.to_string(), v);
        self
    }
}

/// Objects indexed by id, with a per-class index in id order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ObjectModel {
    objects: BTreeMap<String, Object>,
    by_class: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct ObjectModelDoc {
    objects: Vec<Object>,
}

impl Serialize for ObjectModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ObjectModelDoc { objects: self.objects.values().cloned().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ObjectModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ObjectModelDoc::deserialize(d)?;
        ObjectModel::new(doc.objects).map_err(de::Error::custom)
    }
}

impl ObjectModel {
    pub fn new(objects: impl IntoIterator<Item = Object>) -> Result<Self> {
        let mut om = ObjectModel::default();
        for o in objects {
            if om.objects.contains_key(&o.id) {
                return Err(Error::Schema(format!("duplicate object id {}", o.id)));
            }
            om.objects.insert(o.id.clone(), o);
        }
        om.reindex();
        Ok(om)
    }

    fn reindex(&mut self) {
        self.by_class.clear();
        for o in self.objects.values() {
            self.by_class.entry(o.class.clone()).or_default().push(o.id.clone());
        }
    }

    pub fn get(&self, id: &str) -> Option<&Object> {
        self.objects.get(id)
    }

    pub fn class_of(&self, id: &str) -> Option<&str> {
        self.objects.get(id).map(|o| o.class.as_str())
    }

    /// Ids of all instances of `class`, sorted.
    pub fn instances(&self, class: &str) -> &[String] {
        self.by_class.get(class).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Object> {
        self.objects.values()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Rewrites field values in place; ids and classes stay fixed.
    pub fn map_values(&mut self, mut f: impl FnMut(&Object, &str, &Value) -> Option<Value>) {
        for o in self.objects.values_mut() {
            let snapshot = o.clone();
            for (name, v) in o.fields.iter_mut() {
                if let Some(nv) = f(&snapshot, name, v) {
                    *v = nv;
                }
            }
        }
    }

    /// Checks every object against the class model: declared class, all
    /// `one` fields present, values of the right shape and type, and no
    /// dangling references.
    pub fn validate(&self, cm: &ClassModel) -> Result<()> {
        for o in self.objects.values() {
            let Some(decls) = cm.classes.get(&o.class) else {
                return Err(Error::Schema(format!("object {} has undeclared class {}", o.id, o.class)));
            };
            for name in o.fields.keys() {
                if !decls.contains_key(name) {
                    return Err(Error::Schema(format!("object {} has undeclared field {name}", o.id)));
                }
            }
            for (name, decl) in decls {
                let here = || format!("{}.{name}", o.id);
                let v = o.fields.get(name);
                let check_atom = |a: &Atom| -> Result<()> {
                    match (&decl.ty, a) {
                        (FieldType::Bool, Atom::Bool(_)) => Ok(()),
                        (FieldType::Class(c), Atom::Obj(id)) => match self.class_of(id) {
                            Some(k) if k == c => Ok(()),
                            Some(k) => Err(Error::Schema(format!("{} refers to {id} of class {k}, expected {c}", here()))),
                            None => Err(Error::Schema(format!("{} refers to missing object {id}", here()))),
                        },
                        _ => Err(Error::Schema(format!("{} holds {a}, which does not match its declared type", here()))),
                    }
                };
                match (decl.multiplicity, v) {
                    (Multiplicity::One, None) => return Err(Error::Schema(format!("{} is missing", here()))),
                    (_, None) | (_, Some(Value::Unknown)) => {}
                    (Multiplicity::Optional, Some(Value::None)) => {}
                    (Multiplicity::One | Multiplicity::Optional, Some(Value::Atom(a))) => check_atom(a)?,
                    (Multiplicity::Many, Some(Value::Set { atoms, has_unknown: false })) => {
                        for a in atoms {
                            check_atom(a)?;
                        }
                    }
                    (m, Some(v)) => {
                        return Err(Error::Schema(format!("{} has value {v:?}, not allowed for multiplicity {m:?}", here())))
                    }
                }
            }
        }
        Ok(())
    }
}

/// A sequence of field names, written without the implicit trailing `id`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<String>);

impl Path {
    pub fn empty() -> Self {
        Path(Vec::new())
    }

    /// Parses `a.b.c`; the empty string is the empty path.
    pub fn parse(s: &str) -> Self {
        if s.is_empty() {
            Path::empty()
        } else {
            Path(s.split('.').map(str::to_string).collect())
        }
    }

    pub fn id() -> Self {
        Path(vec!["id".to_string()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_id(&self) -> bool {
        self.0.last().is_some_and(|f| f == "id")
    }

    /// `subject.dept`, or just `subject` for the empty path.
    pub fn display_from(&self, root: &str) -> String {
        if self.0.is_empty() {
            root.to_string()
        } else {
            format!("{root}.{self}")
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

/// Follows `path` from object `o`.
///
/// Many-valued hops flatten into a set. Meeting `unknown` gives `unknown`
/// for single-valued paths and a set flagged with `has_unknown` for
/// many-valued ones; meeting `None` gives `None` or contributes nothing.
pub fn nav(cm: &ClassModel, om: &ObjectModel, o: &str, path: &Path) -> Result<Value> {
    let class = om.class_of(o).ok_or_else(|| Error::Usage(format!("no object {o}")))?;
    let info = cm.path_info(class, path)?;
    Ok(navigate(om, o, path, info.multiplicity))
}

/// [`nav`] for a path already known to type-check, with its multiplicity.
pub(crate) fn navigate(om: &ObjectModel, o: &str, path: &Path, multiplicity: Multiplicity) -> Value {
    let mut current: Vec<Atom> = vec![Atom::Obj(o.to_string())];
    let mut unknown = false;
    for field in path.0.iter().filter(|f| *f != "id") {
        let mut next = Vec::new();
        for a in &current {
            let Atom::Obj(id) = a else { continue };
            match om.get(id).and_then(|x| x.fields.get(field)) {
                Some(Value::Atom(b)) => next.push(b.clone()),
                Some(Value::Set { atoms, has_unknown }) => {
                    unknown |= *has_unknown;
                    next.extend(atoms.iter().cloned());
                }
                Some(Value::Unknown) => unknown = true,
                Some(Value::None) | None => {}
            }
        }
        next.sort_unstable();
        next.dedup();
        current = next;
        if unknown && !multiplicity.is_many() {
            return Value::Unknown;
        }
    }
    if multiplicity.is_many() {
        Value::Set { atoms: current.into_iter().collect(), has_unknown: unknown }
    } else {
        current.into_iter().next().map_or(Value::None, Value::Atom)
    }
}


#[cfg(test)]
mod tests {
    use super::testmodel::*;
    use super::*;

    fn p(s: &str) -> Path {
        Path::parse(s)
    }

    #[test]
    fn running_example_navigation() {
        let (cm, om) = running_example();
        assert_eq!(nav(&cm, &om, "EE-student-1", &p("dept")).unwrap(), Value::Unknown);
        assert_eq!(nav(&cm, &om, "CS-student-1", &p("dept")).unwrap(), Value::obj("CS"));
        assert_eq!(nav(&cm, &om, "CS-doc-1", &Path::empty()).unwrap(), Value::obj("CS-doc-1"));
        assert_eq!(nav(&cm, &om, "CS-doc-1", &Path::id()).unwrap(), Value::obj("CS-doc-1"));
    }

    #[test]
    fn navigation_type_errors() {
        let (cm, om) = running_example();
        assert!(matches!(nav(&cm, &om, "CS-doc-1", &p("owner")), Err(Error::Usage(_))));
        assert!(matches!(nav(&cm, &om, "nobody", &p("dept")), Err(Error::Usage(_))));
    }

    #[test]
    fn many_valued_navigation_flattens() {
        let (cm, om) = projects();
        assert_eq!(
            nav(&cm, &om, "e1", &p("projects")).unwrap(),
            Value::set([Atom::obj("P1"), Atom::obj("P2")])
        );
        assert_eq!(
            nav(&cm, &om, "e1", &p("projects.dept")).unwrap(),
            Value::Set { atoms: BTreeSet::from([Atom::obj("D1")]), has_unknown: true }
        );
        assert_eq!(
            nav(&cm, &om, "e2", &p("projects.dept")).unwrap(),
            Value::set([Atom::obj("D1"), Atom::obj("D2")])
        );
        assert_eq!(
            nav(&cm, &om, "e3", &p("projects")).unwrap(),
            Value::Set { atoms: BTreeSet::new(), has_unknown: true }
        );
        assert_eq!(
            nav(&cm, &om, "e2", &p("projects.open")).unwrap(),
            Value::Set { atoms: BTreeSet::from([Atom::Bool(true)]), has_unknown: true }
        );
    }

    #[test]
    fn optional_navigation() {
        let (cm, om) = projects();
        assert_eq!(nav(&cm, &om, "e1", &p("mentor")).unwrap(), Value::None);
        assert_eq!(nav(&cm, &om, "e1", &p("mentor.dept")).unwrap(), Value::None);
        assert_eq!(nav(&cm, &om, "e3", &p("mentor.dept")).unwrap(), Value::Unknown);
        assert_eq!(nav(&cm, &om, "e3", &p("mentor.mentor.dept")).unwrap(), Value::obj("D1"));
        // Through None on a many-valued path nothing is contributed.
        assert_eq!(nav(&cm, &om, "e1", &p("mentor.projects")).unwrap(), Value::set([]));
        assert_eq!(
            cm.path_info("Employee", &p("mentor.dept")).unwrap(),
            PathInfo { ty: PathType::Class("Dept".into()), multiplicity: Multiplicity::Optional }
        );
        assert_eq!(cm.path_info("Employee", &p("mentor.projects")).unwrap().multiplicity, Multiplicity::Many);
        assert_eq!(cm.path_info("Employee", &Path::id()).unwrap().ty, PathType::Id);
    }

    #[test]
    fn unknown_in_single_valued_prefix_of_many_path() {
        let mut cm = ClassModel::default();
        cm.add_class("A", [("b", FieldDecl::one("B"))]);
        cm.add_class("B", [("cs", FieldDecl::many("C"))]);
        cm.add_class("C", []);
        let om = ObjectModel::new([Object::new("a", "A").with("b", Value::Unknown)]).unwrap();
        assert_eq!(
            nav(&cm, &om, "a", &p("b.cs")).unwrap(),
            Value::Set { atoms: BTreeSet::new(), has_unknown: true }
        );
    }

    #[test]
    fn validation() {
        let (cm, om) = projects();
        cm.validate().unwrap();
        om.validate(&cm).unwrap();

        let bad = ObjectModel::new([Object::new("x", "Nope")]).unwrap();
        assert!(bad.validate(&cm).is_err());
        let bad = ObjectModel::new([Object::new("D1", "Dept"), Object::new("p", "Project").with("open", Value::obj("D1"))]).unwrap();
        assert!(bad.validate(&cm).is_err());
        let bad = ObjectModel::new([Object::new("p", "Project").with("dept", Value::obj("ghost")).with("open", Value::Unknown)]).unwrap();
        assert!(bad.validate(&cm).is_err());
        assert!(ObjectModel::new([Object::new("a", "Dept"), Object::new("a", "Dept")]).is_err());

        let mut cm2 = cm.clone();
        cm2.add_class("X", [("flag", FieldDecl::new(FieldType::Bool, Multiplicity::Many))]);
        assert!(cm2.validate().is_err());
    }

    #[test]
    fn value_json_encoding() {
        let vals = [
            Value::obj("CS"),
            Value::Atom(Atom::Bool(false)),
            Value::None,
            Value::Unknown,
            Value::set([Atom::obj("a"), Atom::obj("b")]),
        ];
        let text = serde_json::to_string(&vals).unwrap();
        assert_eq!(text, r#"["CS",false,null,{"$unknown":true},["a","b"]]"#);
        let back: Vec<Value> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vals);
        assert!(serde_json::from_str::<Value>(r#"{"$unknown":false}"#).is_err());
    }

    #[test]
    fn instances_are_sorted_by_id() {
        let (_, om) = running_example();
        assert_eq!(om.instances("Document"), ["CS-doc-1", "CS-doc-2", "CS-doc-3"]);
        assert!(om.instances("Nothing").is_empty());
    }
}
