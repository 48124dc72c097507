//! Object-oriented data model with `unknown` values, and the rule language
//! evaluated over it.
//!
//! A [`ClassModel`] declares classes and typed fields, an [`ObjectModel`]
//! holds the objects, and [`nav`] follows a [`Path`] from an object. Rules
//! combine atomic conditions and constraints whose truth value may be `U`
//! when navigation runs into an unknown value; a request is granted only
//! when everything is exactly `T`.

mod objects;
mod policy;

pub use objects::{
    nav, Atom, ClassModel, FieldDecl, FieldType, Multiplicity, Object, ObjectModel, Path, PathInfo, PathType, Value,
};
pub(crate) use objects::navigate;
#[cfg(test)]
pub(crate) use objects::testmodel;
pub(crate) use policy::rule_pairs;
pub use policy::{
    condition_value, constraint_value, meaning, rule_meaning, satisfies, tval_condition, tval_constraint, wsc_policy,
    AclPolicy, AtomicCondition, AtomicConstraint, CondOp, ConsOp, Policy, Rule, Sra,
};
