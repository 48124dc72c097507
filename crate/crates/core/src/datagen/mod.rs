//! Synthetic object models with ground-truth rules, and degradation of
//! object models by replacing field values with `unknown`.

mod inject;
mod specs;

use std::collections::BTreeSet;

use log::warn;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use inject::{inject_unknowns, unknown_fraction, UnknownStats};
pub use specs::{builtin, org_chart, univ_mini, BUILTIN_SPECS};

use crate::error::{Error, Result};
use crate::model::{meaning, AclPolicy, Atom, ClassModel, FieldDecl, Object, ObjectModel, Policy, Rule, Value};

/// How likely a field is to stay known when unknowns are injected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldClass {
    /// Never made unknown.
    Required,
    /// Made unknown with probability `0.01 s`.
    Important,
    /// Made unknown with a per-field probability drawn from
    /// `[0.02 s, 0.05 s]`.
    Normal,
}

/// How many instances a class gets for size parameter `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountLaw {
    /// Normally distributed with mean `factor · N`.
    Scaled(usize),
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValueLaw {
    Bool { p_true: f64 },
    /// A uniformly chosen instance of the class.
    Ref(&'static str),
    /// Between `min` and `max` distinct instances of the class.
    RefSet { class: &'static str, min: usize, max: usize },
}

impl ValueLaw {
    fn decl(&self) -> FieldDecl {
        match self {
            ValueLaw::Bool { .. } => FieldDecl::boolean(),
            ValueLaw::Ref(c) => FieldDecl::one(c),
            ValueLaw::RefSet { class, .. } => FieldDecl::many(class),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub name: &'static str,
    pub law: ValueLaw,
    pub class: FieldClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassSpec {
    pub name: &'static str,
    pub count: CountLaw,
    pub fields: Vec<FieldSpec>,
}

/// Classes, value laws and ground-truth rules of a synthetic policy.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub name: &'static str,
    /// In generation order: referenced classes come first.
    pub classes: Vec<ClassSpec>,
    pub rules: Vec<Rule>,
}

/// Share of fields classified Required or Important above which a generator
/// is considered unrealistic.
pub const MAX_KEY_FIELD_SHARE: f64 = 0.15;

impl GeneratorSpec {
    pub fn class_model(&self) -> ClassModel {
        let mut cm = ClassModel::default();
        for c in &self.classes {
            cm.add_class(c.name, c.fields.iter().map(|f| (f.name, f.law.decl())));
        }
        cm
    }

    pub fn field_class(&self, class: &str, field: &str) -> Option<FieldClass> {
        self.classes.iter().find(|c| c.name == class)?.fields.iter().find(|f| f.name == field).map(|f| f.class)
    }

    /// Share of Required and Important fields among all fields.
    pub fn key_field_share(&self) -> f64 {
        let all: Vec<&FieldSpec> = self.classes.iter().flat_map(|c| &c.fields).collect();
        if all.is_empty() {
            return 0.0;
        }
        all.iter().filter(|f| f.class != FieldClass::Normal).count() as f64 / all.len() as f64
    }

    /// Checks the class model and rules; warns when too many fields are
    /// Required or Important.
    pub fn validate(&self) -> Result<()> {
        let cm = self.class_model();
        cm.validate()?;
        Policy::new(self.rules.clone()).check(&cm)?;
        for c in &self.classes {
            for f in &c.fields {
                if let ValueLaw::RefSet { min, max, .. } = f.law {
                    if min > max {
                        return Err(Error::Schema(format!("{}.{}: min {min} exceeds max {max}", c.name, f.name)));
                    }
                }
            }
        }
        let share = self.key_field_share();
        if share > MAX_KEY_FIELD_SHARE {
            warn!("{}: {:.0}% of fields are required or important", self.name, share * 100.0);
        }
        Ok(())
    }
}

/// A generated object model with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub cm: ClassModel,
    /// All values known.
    pub om: ObjectModel,
    pub ground_truth: Policy,
    pub acl: AclPolicy,
}

fn instance_count(law: CountLaw, n: usize, rng: &mut ChaCha8Rng) -> usize {
    match law {
        CountLaw::Fixed(k) => k,
        CountLaw::Scaled(factor) => {
            let mean = (factor * n) as f64;
            let normal = Normal::new(mean, 0.2 * mean).expect("finite parameters");
            normal.sample(rng).round().max(1.0) as usize
        }
    }
}

/// Draws an object model for size parameter `n` and computes the
/// authorizations the ground-truth rules grant in it.
pub fn generate(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<Generated> {
    if n == 0 {
        return Err(Error::Usage("size parameter N must be at least 1".into()));
    }
    spec.validate()?;
    let cm = spec.class_model();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<(&str, Vec<String>)> = Vec::new();
    let mut objects = Vec::new();
    for c in &spec.classes {
        let k = instance_count(c.count, n, &mut rng);
        ids.push((c.name, (1..=k).map(|i| format!("{}-{i}", c.name)).collect()));
    }
    let instances = |class: &str| -> &[String] { &ids.iter().find(|(c, _)| *c == class).expect("validated").1 };
    for c in &spec.classes {
        for id in instances(c.name) {
            let mut o = Object::new(id, c.name);
            for f in &c.fields {
                let v = match &f.law {
                    ValueLaw::Bool { p_true } => Value::Atom(Atom::Bool(rng.random_bool(*p_true))),
                    ValueLaw::Ref(target) => {
                        Value::obj(instances(target).choose(&mut rng).expect("counts are at least 1").as_str())
                    }
                    ValueLaw::RefSet { class, min, max } => {
                        let pool = instances(class);
                        let k = rng.random_range(*min..=*max).min(pool.len());
                        let picked: BTreeSet<Atom> =
                            pool.choose_multiple(&mut rng, k).map(|s| Atom::obj(s.as_str())).collect();
                        Value::Set { atoms: picked, has_unknown: false }
                    }
                };
                o = o.with(f.name, v);
            }
            objects.push(o);
        }
    }
    let om = ObjectModel::new(objects)?;
    om.validate(&cm)?;
    let ground_truth = Policy::new(spec.rules.clone());
    let au = meaning(&cm, &om, &ground_truth.rules);
    let acl = AclPolicy::new(cm.clone(), om.clone(), au);
    Ok(Generated { cm, om, ground_truth, acl })
}
