use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FieldClass, GeneratorSpec};
use crate::error::{Error, Result};
use crate::model::{ObjectModel, Value};

/// Replaces field values with `unknown` at rates scaled by `s`.
///
/// Each field of each class gets one probability: 0 for Required fields,
/// `0.01 s` for Important ones, and `s · u` with `u` uniform in
/// `[0.02, 0.05]` for the rest. The `u` draws depend only on the seed, so
/// for a fixed seed larger `s` means proportionally higher rates.
/// Many-valued fields are replaced as a whole.
pub fn inject_unknowns(om: &ObjectModel, spec: &GeneratorSpec, s: f64, seed: u64) -> Result<ObjectModel> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Usage(format!("scaling factor must be a non-negative number, got {s}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probability: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for c in &spec.classes {
        for f in &c.fields {
            let base = match f.class {
                FieldClass::Required => 0.0,
                FieldClass::Important => 0.01,
                FieldClass::Normal => rng.random_range(0.02..=0.05),
            };
            let mut p = base * s;
            if p > 1.0 {
                warn!("{}.{}: unknown probability {p:.3} clamped to 1", c.name, f.name);
                p = 1.0;
            }
            probability.insert((c.name, f.name), p);
        }
    }
    let mut out = om.clone();
    if s == 0.0 {
        return Ok(out);
    }
    out.map_values(|o, field, _| {
        let p = probability.get(&(o.class.as_str(), field)).copied().unwrap_or(0.0);
        (p > 0.0 && rng.random_bool(p)).then_some(Value::Unknown)
    });
    Ok(out)
}

/// Counts of field values, and of unknown ones, per (class, field).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnknownStats {
    pub per_field: BTreeMap<(String, String), (usize, usize)>,
}

impl UnknownStats {
    pub fn of(om: &ObjectModel) -> Self {
        let mut per_field: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
        for o in om.iter() {
            for (name, v) in &o.fields {
                let e = per_field.entry((o.class.clone(), name.clone())).or_default();
                e.0 += 1;
                e.1 += usize::from(v.involves_unknown());
            }
        }
        UnknownStats { per_field }
    }

    pub fn total(&self) -> usize {
        self.per_field.values().map(|(t, _)| t).sum()
    }

    pub fn unknown(&self) -> usize {
        self.per_field.values().map(|(_, u)| u).sum()
    }

    pub fn fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.unknown() as f64 / self.total() as f64
        }
    }

    /// Unknown values in fields of the given class in `spec`.
    pub fn unknown_in(&self, spec: &GeneratorSpec, class: FieldClass) -> usize {
        self.per_field
            .iter()
            .filter(|((c, f), _)| spec.field_class(c, f) == Some(class))
            .map(|(_, (_, u))| u)
            .sum()
    }
}

/// Fraction of field values that are unknown.
pub fn unknown_fraction(om: &ObjectModel) -> f64 {
    UnknownStats::of(om).fraction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, org_chart, univ_mini};

    #[test]
    fn zero_scale_changes_nothing() {
        let spec = org_chart();
        let g = generate(&spec, 5, 3).unwrap();
        assert_eq!(inject_unknowns(&g.om, &spec, 0.0, 9).unwrap(), g.om);
    }

    #[test]
    fn injection_only_adds_unknowns() {
        let spec = org_chart();
        let g = generate(&spec, 5, 3).unwrap();
        let om = inject_unknowns(&g.om, &spec, 3.0, 9).unwrap();
        assert_eq!(om.len(), g.om.len());
        om.validate(&g.cm).unwrap();
        for o in om.iter() {
            let orig = g.om.get(&o.id).unwrap();
            assert_eq!(o.class, orig.class);
            for (f, v) in &o.fields {
                assert!(v == &orig.fields[f] || v.is_unknown());
            }
        }
        assert!(unknown_fraction(&om) > 0.0);
    }

    #[test]
    fn required_fields_stay_known_and_rates_scale() {
        let spec = org_chart();
        let mut fractions = [0.0; 4];
        for seed in 0..20 {
            let g = generate(&spec, 5, seed).unwrap();
            for (i, s) in [0.0, 1.0, 2.0, 3.0].into_iter().enumerate() {
                let stats = UnknownStats::of(&inject_unknowns(&g.om, &spec, s, seed).unwrap());
                assert_eq!(stats.unknown_in(&spec, FieldClass::Required), 0);
                fractions[i] += stats.fraction() / 20.0;
            }
        }
        assert_eq!(fractions[0], 0.0);
        assert!(fractions[1] < fractions[2] && fractions[2] < fractions[3], "{fractions:?}");
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = univ_mini();
        let g = generate(&spec, 4, 1).unwrap();
        assert_eq!(inject_unknowns(&g.om, &spec, 2.0, 5).unwrap(), inject_unknowns(&g.om, &spec, 2.0, 5).unwrap());
        assert!(inject_unknowns(&g.om, &spec, -1.0, 5).is_err());
        assert!(inject_unknowns(&g.om, &spec, f64::NAN, 5).is_err());
        // Rates above 1 are clamped rather than rejected.
        let all = inject_unknowns(&g.om, &spec, 100.0, 5).unwrap();
        assert_eq!(unknown_fraction(&all), 1.0);
    }
}
