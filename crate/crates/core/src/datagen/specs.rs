use super::{ClassSpec, CountLaw, FieldClass, FieldSpec, GeneratorSpec, ValueLaw};
use crate::model::{Atom, AtomicCondition, AtomicConstraint, ConsOp, Path, Rule};

pub const BUILTIN_SPECS: [&str; 2] = ["univ-mini", "org-chart"];

pub fn builtin(name: &str) -> Option<GeneratorSpec> {
    match name {
        "univ-mini" => Some(univ_mini()),
        "org-chart" => Some(org_chart()),
        _ => None,
    }
}

fn field(name: &'static str, law: ValueLaw) -> FieldSpec {
    FieldSpec { name, law, class: FieldClass::Normal }
}

fn flag(name: &'static str, p_true: f64) -> FieldSpec {
    field(name, ValueLaw::Bool { p_true })
}

fn eq_bool(path: &str, b: bool) -> AtomicCondition {
    AtomicCondition::eq(Path::parse(path), Atom::Bool(b))
}

/// Students and documents in departments, shaped like the classic
/// same-department / handbook example.
pub fn univ_mini() -> GeneratorSpec {
    GeneratorSpec {
        name: "univ-mini",
        classes: vec![
            ClassSpec { name: "Department", count: CountLaw::Fixed(3), fields: vec![] },
            ClassSpec {
                name: "Student",
                count: CountLaw::Scaled(1),
                fields: vec![field("dept", ValueLaw::Ref("Department")), flag("graduate", 0.3)],
            },
            ClassSpec {
                name: "Document",
                count: CountLaw::Scaled(5),
                fields: vec![field("dept", ValueLaw::Ref("Department")), flag("handbook", 0.2)],
            },
        ],
        rules: vec![
            Rule::new("Student", "Document", ["read", "write"]).with_constraint(AtomicConstraint::new(
                Path::parse("dept"),
                ConsOp::Equal,
                Path::parse("dept"),
            )),
            Rule::new("Student", "Document", ["read"]).with_resource(eq_bool("handbook", true)),
        ],
    }
}

/// Employees working on several projects, with documents attached to
/// projects; exercises many-valued constraints.
pub fn org_chart() -> GeneratorSpec {
    GeneratorSpec {
        name: "org-chart",
        classes: vec![
            ClassSpec { name: "Department", count: CountLaw::Fixed(3), fields: vec![flag("large", 0.5)] },
            ClassSpec {
                name: "Project",
                count: CountLaw::Fixed(3),
                fields: vec![
                    field("dept", ValueLaw::Ref("Department")),
                    flag("active", 0.7),
                    flag("internal", 0.4),
                ],
            },
            ClassSpec {
                name: "Employee",
                count: CountLaw::Scaled(1),
                fields: vec![
                    FieldSpec { name: "dept", law: ValueLaw::Ref("Department"), class: FieldClass::Important },
                    field("projects", ValueLaw::RefSet { class: "Project", min: 1, max: 2 }),
                    flag("manager", 0.3),
                    flag("remote", 0.4),
                    flag("contractor", 0.2),
                ],
            },
            ClassSpec {
                name: "Document",
                count: CountLaw::Scaled(5),
                fields: vec![
                    FieldSpec { name: "project", law: ValueLaw::Ref("Project"), class: FieldClass::Required },
                    field("related", ValueLaw::RefSet { class: "Project", min: 1, max: 2 }),
                    flag("confidential", 0.3),
                    flag("archived", 0.2),
                    flag("draft", 0.3),
                ],
            },
        ],
        rules: vec![
            Rule::new("Employee", "Document", ["read"])
                .with_resource(eq_bool("confidential", false))
                .with_constraint(AtomicConstraint::new(Path::parse("projects"), ConsOp::Contains, Path::parse("project"))),
            Rule::new("Employee", "Document", ["read", "approve"])
                .with_subject(eq_bool("manager", true))
                .with_constraint(AtomicConstraint::new(Path::parse("dept"), ConsOp::Equal, Path::parse("project.dept"))),
            Rule::new("Employee", "Document", ["edit"]).with_constraint(AtomicConstraint::new(
                Path::parse("projects"),
                ConsOp::Supseteq,
                Path::parse("related"),
            )),
        ],
    }
}
